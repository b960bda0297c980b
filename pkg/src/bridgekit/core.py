"""Domain types shared by every solver.

All containers are frozen dataclasses over read-only numpy arrays.
Nonnegative weights that may span hundreds of orders of magnitude
(kernels, path measures, potentials) are stored as natural logs with
``-inf`` standing for an exact zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EnumerationBudgetExceeded,
    HorizonMismatch,
    IndexOutOfRange,
    InputError,
    NegativeEntry,
    NonPositiveTemperature,
    NotNormalized,
)

NORMALIZATION_TOL = 1e-9
MARGINAL_TOL = 1e-9
DEFAULT_PATH_BUDGET = 10**6

Path = tuple  # tuple[int, ...], 0-based node indices


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def safe_log(x) -> np.ndarray:
    """Elementwise log with ``log(0) = -inf`` and no warnings."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(x)


def log_matvec(log_k: np.ndarray, log_v: np.ndarray) -> np.ndarray:
    """``log(K @ v)`` computed from ``log K`` and ``log v``."""
    s = log_k + log_v[None, :]
    m = s.max(axis=1)
    finite = np.isfinite(m)
    shift = np.where(finite, m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(s - shift[:, None]).sum(axis=1)) + shift
    out[~finite] = -np.inf
    return out


def log_rmatvec(log_k: np.ndarray, log_v: np.ndarray) -> np.ndarray:
    """``log(K.T @ v)`` computed from ``log K`` and ``log v``."""
    return log_matvec(log_k.T, log_v)


def log_matmul(log_a: np.ndarray, log_b: np.ndarray) -> np.ndarray:
    """``log(A @ B)`` in the log domain, one output column at a time."""
    out = np.empty((log_a.shape[0], log_b.shape[1]))
    for j in range(log_b.shape[1]):
        out[:, j] = log_matvec(log_a, log_b[:, j])
    return out


def kl_divergence(p, q) -> float:
    """``sum p log(p/q)`` with ``0 log 0 = 0``; ``inf`` if ``p`` is not
    dominated by ``q``.  ``q`` need not be normalized."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes {p.shape} and {q.shape} differ")
    pos = p > 0
    if np.any(q[pos] <= 0):
        return float("inf")
    return float(np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos]))))


def neg_entropy(p) -> float:
    """``sum p log p`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float).ravel()
    pos = p > 0
    return float(np.sum(p[pos] * np.log(p[pos])))


@dataclass(frozen=True)
class NodeSet:
    n: int
    labels: tuple | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InputError(f"node count must be a positive integer, got {self.n}")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.n:
                raise DimensionMismatch(f"{len(labels)} labels for {self.n} nodes")
            if len(set(labels)) != len(labels):
                raise InputError("node labels must be unique")
            object.__setattr__(self, "labels", labels)

    def label(self, i: int) -> str:
        if self.labels is not None:
            return self.labels[i]
        return str(i + 1)


@dataclass(frozen=True)
class Distribution:
    """Probability vector on ``{0, ..., n-1}``.  Use :func:`validate_distribution`
    to build one from raw weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size == 0:
            raise DimensionMismatch("distribution weights must be a non-empty vector")
        if not np.all(np.isfinite(w)):
            raise InputError("distribution weights must be finite")
        if np.any(w < 0):
            raise NegativeEntry(f"negative probability at index {int(np.argmin(w))}")
        if abs(w.sum() - 1.0) > 1e-12:
            raise NotNormalized(f"weights sum to {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)


def validate_distribution(weights, nodeset: NodeSet | int | None = None) -> Distribution:
    """Check and normalize a probability vector.

    Sums within ``1e-9`` of one are renormalized silently; anything
    further off raises :class:`NotNormalized`.
    """
    w = np.asarray(weights, dtype=float)
    if nodeset is not None:
        n = nodeset.n if isinstance(nodeset, NodeSet) else int(nodeset)
        if w.shape != (n,):
            raise DimensionMismatch(f"expected {n} weights, got shape {w.shape}")
    if w.ndim != 1 or w.size == 0:
        raise DimensionMismatch("distribution weights must be a non-empty vector")
    if not np.all(np.isfinite(w)):
        raise InputError("distribution weights must be finite")
    if np.any(w < 0):
        raise NegativeEntry(f"negative probability at index {int(np.argmin(w))}")
    total = w.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"weights sum to {total!r}, not 1")
    return Distribution(w / total)


def dirac(nodeset: NodeSet | int, i: int) -> Distribution:
    n = nodeset.n if isinstance(nodeset, NodeSet) else int(nodeset)
    if not 0 <= i < n:
        raise IndexOutOfRange(f"node index {i} outside 0..{n - 1}")
    w = np.zeros(n)
    w[i] = 1.0
    return Distribution(w)


@dataclass(frozen=True)
class Kernel:
    """Nonnegative square (or rectangular) weight matrix, kept in log form.

    The support is the set of entries with finite log; it stays exact even
    where ``exp`` of the log underflows.
    """

    log_entries: np.ndarray

    def __post_init__(self):
        L = _frozen(self.log_entries)
        if L.ndim != 2:
            raise DimensionMismatch("kernel must be a matrix")
        if np.any(np.isnan(L)) or np.any(L == np.inf):
            raise InputError("kernel entries must be finite")
        object.__setattr__(self, "log_entries", L)

    @classmethod
    def from_entries(cls, entries) -> "Kernel":
        K = np.asarray(entries, dtype=float)
        if K.ndim != 2:
            raise DimensionMismatch("kernel must be a matrix")
        if not np.all(np.isfinite(K)):
            raise InputError("kernel entries must be finite")
        if np.any(K < 0):
            i, j = np.unravel_index(np.argmin(K), K.shape)
            raise NegativeEntry(f"negative kernel entry at ({i + 1}, {j + 1})")
        return cls(safe_log(K))

    @property
    def entries(self) -> np.ndarray:
        return np.exp(self.log_entries)

    @property
    def support(self) -> np.ndarray:
        return np.isfinite(self.log_entries)

    @property
    def shape(self) -> tuple:
        return self.log_entries.shape

    @property
    def n(self) -> int:
        return self.log_entries.shape[0]

    def is_positive(self) -> bool:
        return bool(np.all(self.support))

    @property
    def T(self) -> "Kernel":
        return Kernel(self.log_entries.T)


@dataclass(frozen=True)
class Coupling:
    joint: np.ndarray
    row_marginal: Distribution
    col_marginal: Distribution

    def __post_init__(self):
        J = _frozen(self.joint)
        if J.shape != (self.row_marginal.n, self.col_marginal.n):
            raise DimensionMismatch(f"joint shape {J.shape} does not match marginals")
        if np.any(J < 0):
            raise NegativeEntry("coupling entries must be nonnegative")
        row_err = np.max(np.abs(J.sum(axis=1) - self.row_marginal.weights))
        col_err = np.max(np.abs(J.sum(axis=0) - self.col_marginal.weights))
        if max(row_err, col_err) > MARGINAL_TOL:
            raise NotNormalized(
                f"coupling marginals off by {max(row_err, col_err):.3e} (> {MARGINAL_TOL})"
            )
        object.__setattr__(self, "joint", J)

    def marginal_error(self) -> float:
        return float(
            max(
                np.max(np.abs(self.joint.sum(axis=1) - self.row_marginal.weights)),
                np.max(np.abs(self.joint.sum(axis=0) - self.col_marginal.weights)),
            )
        )


@dataclass(frozen=True)
class WeightedDigraph:
    """Directed graph with edge lengths; ``inf`` marks a missing edge."""

    nodes: NodeSet
    lengths: np.ndarray

    def __post_init__(self):
        L = _frozen(self.lengths)
        n = self.nodes.n
        if L.shape != (n, n):
            raise DimensionMismatch(f"length matrix {L.shape} for {n} nodes")
        if np.any(np.isnan(L)) or np.any(L < 0):
            raise NegativeEntry("edge lengths must be nonnegative")
        object.__setattr__(self, "lengths", L)

    @classmethod
    def from_edges(cls, n: int, edges, labels=None) -> "WeightedDigraph":
        """Build from ``(src, dst)`` or ``(src, dst, length)`` triples (0-based)."""
        L = np.full((n, n), np.inf)
        for e in edges:
            i, j = int(e[0]), int(e[1])
            length = float(e[2]) if len(e) > 2 else 1.0
            if not (0 <= i < n and 0 <= j < n):
                raise IndexOutOfRange(f"edge ({i}, {j}) outside 0..{n - 1}")
            if np.isfinite(L[i, j]):
                raise InputError(f"duplicate edge ({i + 1}, {j + 1})")
            if not np.isfinite(length) or length < 0:
                raise NegativeEntry(f"edge ({i + 1}, {j + 1}) has invalid length {length}")
            L[i, j] = length
        return cls(NodeSet(n, labels), L)

    @property
    def n(self) -> int:
        return self.nodes.n

    @property
    def adjacency(self) -> np.ndarray:
        return np.isfinite(self.lengths).astype(float)

    def edges(self) -> list:
        return [(int(i), int(j), float(self.lengths[i, j])) for i, j in zip(*np.nonzero(np.isfinite(self.lengths)))]

    def with_length(self, i: int, j: int, length: float) -> "WeightedDigraph":
        L = np.array(self.lengths)
        L[i, j] = length
        return WeightedDigraph(self.nodes, L)

    def path_length(self, path: Sequence[int]) -> float:
        return float(sum(self.lengths[a, b] for a, b in zip(path[:-1], path[1:])))


def boltzmann_kernel(graph: WeightedDigraph, T: float) -> Kernel:
    """Weights ``exp(-l_ij / T)`` on edges, zero elsewhere (Boltzmann constant 1)."""
    if not T > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {T}")
    with np.errstate(invalid="ignore"):
        L = -graph.lengths / T
    L[~np.isfinite(graph.lengths)] = -np.inf
    return Kernel(L)


def adjacency_kernel(graph: WeightedDigraph) -> Kernel:
    return Kernel.from_entries(graph.adjacency)


def format_path(path: Sequence[int], nodes: NodeSet | None = None) -> str:
    """1-based display form, e.g. ``(0, 1, 6, 8) -> '1-2-7-9'``."""
    if nodes is None:
        return "-".join(str(i + 1) for i in path)
    return "-".join(nodes.label(i) for i in path)


def parse_path(text: str) -> Path:
    return tuple(int(tok) - 1 for tok in text.strip().split("-"))


@dataclass(frozen=True)
class PathMeasure:
    """Markovian (not necessarily normalized) measure on length-N paths."""

    log_initial: np.ndarray
    steps: tuple

    def __post_init__(self):
        mu = _frozen(self.log_initial)
        steps = tuple(s if isinstance(s, Kernel) else Kernel.from_entries(s) for s in self.steps)
        if len(steps) < 1:
            raise HorizonMismatch("a path measure needs at least one step")
        n = mu.size
        for t, s in enumerate(steps):
            if s.shape != (n, n):
                raise DimensionMismatch(f"step {t} has shape {s.shape}, expected {(n, n)}")
        if np.any(np.isnan(mu)) or np.any(mu == np.inf):
            raise InputError("initial weights must be finite")
        object.__setattr__(self, "log_initial", mu)
        object.__setattr__(self, "steps", steps)

    @classmethod
    def from_weights(cls, initial, steps) -> "PathMeasure":
        mu = np.asarray(initial, dtype=float)
        if np.any(mu < 0) or not np.all(np.isfinite(mu)):
            raise NegativeEntry("initial weights must be finite and nonnegative")
        return cls(safe_log(mu), tuple(steps))

    @classmethod
    def homogeneous(cls, initial, kernel: Kernel, horizon: int) -> "PathMeasure":
        if horizon < 1:
            raise HorizonMismatch(f"horizon must be >= 1, got {horizon}")
        return cls.from_weights(initial, (kernel,) * horizon)

    @property
    def initial(self) -> np.ndarray:
        return np.exp(self.log_initial)

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def n(self) -> int:
        return self.log_initial.size

    def log_mass(self, path: Sequence[int]) -> float:
        if len(path) != self.horizon + 1:
            raise HorizonMismatch(f"path has {len(path) - 1} steps, measure has {self.horizon}")
        total = self.log_initial[path[0]]
        for t, (a, b) in enumerate(zip(path[:-1], path[1:])):
            total += self.steps[t].log_entries[a, b]
        return float(total)

    def marginal_flow(self) -> np.ndarray:
        """Forward pushforward of the initial weights, one row per time step.

        Rows are the one-time marginals when every step is row-stochastic;
        the last row always sums to the total mass.
        """
        rows = [self.log_initial]
        for s in self.steps:
            rows.append(log_rmatvec(s.log_entries, rows[-1]))
        return np.exp(np.array(rows))


def path_mass(measure: PathMeasure, path: Sequence[int]) -> float:
    """``mu0(x0) * prod m_{x_t x_{t+1}}(t)``; zero for infeasible paths."""
    return float(np.exp(measure.log_mass(tuple(int(i) for i in path))))


def enumerate_paths(
    measure: PathMeasure,
    start: int | None = None,
    end: int | None = None,
    budget: int = DEFAULT_PATH_BUDGET,
    prune: float | None = None,
) -> Iterator[tuple]:
    """Depth-first enumeration of positive-mass paths as ``(path, log_mass)``.

    Paths come out in lexicographic order.  With ``prune`` set, a prefix is
    dropped once its log mass falls more than ``-log(prune)`` below the best
    complete path seen so far (an upper bound only when later steps have
    weights at most one).
    """
    N = measure.horizon
    n = measure.n
    # alive[t][i]: some positive-mass continuation from node i at time t reaches `end`
    alive = [None] * (N + 1)
    alive[N] = np.ones(n, dtype=bool) if end is None else (np.arange(n) == end)
    for t in range(N - 1, -1, -1):
        alive[t] = (measure.steps[t].support & alive[t + 1][None, :]).any(axis=1)
    starts = range(n) if start is None else [start]
    count = 0
    best = -np.inf
    cut = None if prune is None else -np.log(prune)
    stack = []
    for s in starts:
        lm = measure.log_initial[s]
        if np.isfinite(lm) and alive[0][s]:
            stack.append(((s,), lm))
        while stack:
            path, lm = stack.pop()
            t = len(path) - 1
            if t == N:
                count += 1
                if count > budget:
                    raise EnumerationBudgetExceeded(f"more than {budget} feasible paths")
                best = max(best, lm)
                yield path, float(lm)
                continue
            if cut is not None and lm < best - cut:
                continue
            row = measure.steps[t].log_entries[path[-1]]
            nxt = np.flatnonzero(np.isfinite(row) & alive[t + 1])
            for j in nxt[::-1]:
                stack.append((path + (int(j),), lm + row[j]))


@dataclass(frozen=True)
class Potentials:
    """Schrödinger factors ``phi(t, .)`` and ``phi_hat(t, .)`` in log form,
    one row per time ``t = 0..N``."""

    log_phi: np.ndarray
    log_phi_hat: np.ndarray

    def __post_init__(self):
        a, b = _frozen(self.log_phi), _frozen(self.log_phi_hat)
        if a.shape != b.shape or a.ndim != 2:
            raise DimensionMismatch("phi and phi_hat must be matching (N+1) x n arrays")
        object.__setattr__(self, "log_phi", a)
        object.__setattr__(self, "log_phi_hat", b)

    @property
    def phi(self) -> np.ndarray:
        return np.exp(self.log_phi)

    @property
    def phi_hat(self) -> np.ndarray:
        return np.exp(self.log_phi_hat)

    def marginal(self, t: int) -> np.ndarray:
        return np.exp(self.log_phi[t] + self.log_phi_hat[t])


__all__ = [
    "Coupling",
    "Distribution",
    "Kernel",
    "NodeSet",
    "Path",
    "PathMeasure",
    "Potentials",
    "WeightedDigraph",
    "adjacency_kernel",
    "boltzmann_kernel",
    "dirac",
    "enumerate_paths",
    "format_path",
    "kl_divergence",
    "log_matmul",
    "log_matvec",
    "log_rmatvec",
    "neg_entropy",
    "parse_path",
    "path_mass",
    "safe_log",
    "validate_distribution",
]
