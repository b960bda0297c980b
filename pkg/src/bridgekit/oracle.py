"""Brute-force reference answers.

Nothing here imports the solver modules: these routines exist to check
them.  They enumerate, grid-search or expand into assignment problems and
are only meant for desk-scale instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, DimensionMismatch, IrrationalMarginals


@dataclass(frozen=True)
class OracleBudget:
    max_paths: int = 10**6
    max_states: int = 12
    max_assignment_units: int = 256

    def __post_init__(self):
        if min(self.max_paths, self.max_states, self.max_assignment_units) <= 0:
            raise ValueError("oracle budgets must be positive")


DEFAULT_BUDGET = OracleBudget()


# -- pinned bridges ---------------------------------------------------------


def _log_steps(prior):
    logs = []
    for s in prior.steps:
        L = getattr(s, "log_entries", None)
        if L is None:
            with np.errstate(divide="ignore"):
                L = np.log(np.asarray(s, dtype=float))
        logs.append(np.asarray(L))
    return logs


def pinned_bridge_oracle(prior, x0: int, xN: int, budget: OracleBudget = DEFAULT_BUDGET):
    """The prior restricted to paths ``x0 -> xN`` and renormalized.

    Returns ``[(path, probability), ...]`` sorted by decreasing probability,
    ties in lexicographic path order.
    """
    logs = _log_steps(prior)
    N = len(logs)
    n = logs[0].shape[0]
    if n > budget.max_states:
        raise BudgetExceeded(f"{n} states exceeds oracle budget {budget.max_states}")
    found = []
    visited = 0

    def walk(path, lm):
        nonlocal visited
        t = len(path) - 1
        if t == N:
            if path[-1] == xN:
                found.append((tuple(path), lm))
            return
        for j in range(n):
            w = logs[t][path[-1], j]
            if w == -math.inf:
                continue
            visited += 1
            if visited > budget.max_paths * (N + 1):
                raise BudgetExceeded("path enumeration budget exhausted")
            path.append(j)
            walk(path, lm + w)
            path.pop()

    walk([x0], 0.0)
    if not found:
        return []
    top = max(lm for _, lm in found)
    weights = [math.exp(lm - top) for _, lm in found]
    total = math.fsum(weights)
    table = [(p, w / total) for (p, _), w in zip(found, weights)]
    table.sort(key=lambda item: (-item[1], item[0]))
    return table


# -- exact linear-programming transport ------------------------------------


def hungarian(cost) -> tuple:
    """Minimum-cost perfect matching of a square cost matrix.

    Shortest augmenting paths with dual potentials, O(n^3).  Returns
    ``(assignment, total)`` where ``assignment[i]`` is the column matched
    to row ``i``.
    """
    C = np.asarray(cost, dtype=float)
    n = C.shape[0]
    if C.shape != (n, n):
        raise DimensionMismatch("hungarian needs a square matrix")
    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)  # match[j] = row assigned to column j (1-based)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = C[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = [0] * n
    for j in range(1, n + 1):
        assignment[match[j] - 1] = j - 1
    total = math.fsum(C[i, assignment[i]] for i in range(n))
    return assignment, total


def _as_fractions(weights, max_den):
    out = []
    for w in np.asarray(weights, dtype=float):
        f = Fraction(float(w)).limit_denominator(max_den)
        if abs(float(f) - w) > 1e-12:
            raise IrrationalMarginals(f"weight {w!r} is not a fraction with denominator <= {max_den}")
        out.append(f)
    return out


def assignment_ot_oracle(cost, p, q, budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Exact value of ``min sum c_ij pi_ij`` over couplings of ``p`` and ``q``.

    Both marginals are written over a common denominator ``D``; each
    becomes ``D`` unit atoms and the resulting ``D x D`` assignment problem
    is solved exactly.  Returns ``cost / D``.
    """
    C = np.asarray(cost, dtype=float)
    max_den = budget.max_assignment_units
    fp = _as_fractions(p, max_den)
    fq = _as_fractions(q, max_den)
    if C.shape != (len(fp), len(fq)):
        raise DimensionMismatch(f"cost {C.shape} does not match marginals")
    D = 1
    for f in fp + fq:
        D = D * f.denominator // math.gcd(D, f.denominator)
    if D > max_den:
        raise BudgetExceeded(f"common denominator {D} exceeds {max_den} assignment units")
    rows = [i for i, f in enumerate(fp) for _ in range(int(f * D))]
    cols = [j for j, f in enumerate(fq) for _ in range(int(f * D))]
    if len(rows) != D or len(cols) != D:
        raise IrrationalMarginals("marginals do not sum to one exactly")
    _, total = hungarian(C[np.ix_(rows, cols)])
    return total / D


def vertex_enumeration_ot(cost, p, q, max_cells: int = 16) -> float:
    """Exact transport value by scanning every basis of the coupling polytope.

    A basis is a set of ``n + m - 1`` cells whose constraint columns are
    independent; feasible bases are the polytope's vertices.  Exponential;
    limited to ``n * m <= max_cells``.
    """
    C = np.asarray(cost, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n, m = C.shape
    if n * m > max_cells:
        raise BudgetExceeded(f"{n}x{m} polytope exceeds vertex-enumeration budget")
    A = np.zeros((n + m, n * m))
    for i in range(n):
        for j in range(m):
            A[i, i * m + j] = 1.0
            A[n + j, i * m + j] = 1.0
    b = np.concatenate([p, q])
    A, b = A[:-1], b[:-1]  # one constraint is redundant
    k = n + m - 1
    best = math.inf
    for cells in itertools.combinations(range(n * m), k):
        B = A[:, cells]
        if abs(np.linalg.det(B)) < 1e-9:
            continue
        x = np.linalg.solve(B, b)
        if np.any(x < -1e-12):
            continue
        best = min(best, math.fsum(C.flat[c] * xi for c, xi in zip(cells, x)))
    return best


# -- static KL projection by search -----------------------------------------


def _kl_grid(pi, prior):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pi > 0, pi * (np.log(pi) - np.log(prior)), 0.0)
    return terms.sum(axis=-1)


def _couplings_2x2(a, p, q):
    a = np.asarray(a, dtype=float)
    return np.stack([a, p[0] - a, q[0] - a, 1.0 - p[0] - q[0] + a], axis=-1)


def _couplings_3x3(x, p, q):
    x = np.atleast_2d(x)
    a, b, c, d = x.T
    e = p[0] - a - b
    f = p[1] - c - d
    g = q[0] - a - c
    h = q[1] - b - d
    k = p[2] - g - h
    return np.stack([a, b, e, c, d, f, g, h, k], axis=-1)


def coupling_kl_oracle(prior_joint, p, q, grid_steps: int = 10_001):
    """Minimize ``D(pi || prior_joint)`` over couplings of ``p`` and ``q`` by search.

    ``n = 2``: one free coordinate, dense grid then repeated zooming.
    ``n = 3``: four free coordinates, coarse grid then repeated zooming.
    Returns ``(joint, value)``.
    """
    R = np.asarray(prior_joint, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = R.shape[0]
    if R.shape != (n, n) or p.size != n or q.size != n:
        raise DimensionMismatch("prior joint and marginals disagree in size")
    if n == 2:
        lo, hi = max(0.0, p[0] + q[0] - 1.0), min(p[0], q[0])
        flat = R.ravel()
        for _ in range(200):
            a = np.linspace(lo, hi, min(grid_steps, 10_001))
            pis = np.clip(_couplings_2x2(a, p, q), 0.0, None)
            vals = _kl_grid(pis, flat)
            k = int(np.argmin(vals))
            width = (hi - lo) / (a.size - 1)
            lo, hi = max(lo, a[k] - width), min(hi, a[k] + width)
            if hi - lo < 1e-15:
                break
        best = np.clip(_couplings_2x2(a[k], p, q), 0.0, None)
        return best.reshape(2, 2), float(_kl_grid(best, flat))
    if n == 3:
        flat = R.ravel()
        lo = np.zeros(4)
        hi = np.array([min(p[0], q[0]), min(p[0], q[1]), min(p[1], q[0]), min(p[1], q[1])])
        pts = 15
        best_x, best_v = None, math.inf
        for _ in range(120):
            axes = [np.linspace(lo[i], hi[i], pts) for i in range(4)]
            X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
            pis = _couplings_3x3(X, p, q)
            ok = np.all(pis >= -1e-15, axis=1)
            if not np.any(ok):
                break
            vals = np.full(len(X), math.inf)
            vals[ok] = _kl_grid(np.clip(pis[ok], 0.0, None), flat)
            k = int(np.argmin(vals))
            if vals[k] <= best_v:
                best_x, best_v = X[k], vals[k]
            width = (hi - lo) / (pts - 1)
            lo = np.maximum(0.0, best_x - 2 * width)
            hi = best_x + 2 * width
            if np.max(hi - lo) < 1e-14:
                break
        best = np.clip(_couplings_3x3(best_x, p, q)[0], 0.0, None)
        return best.reshape(3, 3), float(_kl_grid(best, flat))
    raise BudgetExceeded(f"coupling search supports n <= 3, got {n}")


def bisect_symmetric_2x2(c: float, epsilon: float) -> float:
    """Diagonal mass ``a`` of the entropic optimum for cost ``[[0, c], [c, 0]]``
    with uniform marginals, by bisection on ``dJ/da = 0`` along the
    one-parameter family ``[[a, 1/2 - a], [1/2 - a, a]]``."""

    def grad(a):
        # J(a) = 2 c (1/2 - a) + eps [2 a log a + 2 (1/2 - a) log(1/2 - a)]
        return -2 * c + epsilon * 2 * (math.log(a) - math.log(0.5 - a))

    lo, hi = 1e-300, 0.5 - 1e-16
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if grad(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-17:
            break
    return 0.5 * (lo + hi)


# -- one-dimensional exact transport ----------------------------------------


def quantile_coupling_oracle(x0, w0, x1, w1):
    """Monotone (north-west corner) coupling of two weighted point clouds on
    the line, with its quadratic cost ``sum (x - y)^2 / 2 * mass``.

    Points must be sorted.  Returns ``(cells, cost)`` with
    ``cells = [(i, j, mass), ...]``.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    a = [float(v) for v in np.asarray(w0, dtype=float)]
    b = [float(v) for v in np.asarray(w1, dtype=float)]
    if np.any(np.diff(x0) < 0) or np.any(np.diff(x1) < 0):
        raise ValueError("support points must be sorted")
    sa, sb = math.fsum(a), math.fsum(b)
    a = [v / sa for v in a]
    b = [v / sb for v in b]
    i = j = 0
    cells = []
    while i < len(a) and j < len(b):
        m = min(a[i], b[j])
        if m > 0:
            cells.append((i, j, m))
        a[i] -= m
        b[j] -= m
        if a[i] <= 1e-18:
            i += 1
        if j < len(b) and b[j] <= 1e-18:
            j += 1
    cost = math.fsum(0.5 * (x0[i] - x1[j]) ** 2 * m for i, j, m in cells)
    return cells, cost


__all__ = [
    "OracleBudget",
    "assignment_ot_oracle",
    "bisect_symmetric_2x2",
    "coupling_kl_oracle",
    "hungarian",
    "pinned_bridge_oracle",
    "quantile_coupling_oracle",
    "vertex_enumeration_ot",
]
