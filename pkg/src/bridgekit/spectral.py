"""Perron-Frobenius data of primitive nonnegative matrices and the two
maximal-entropy Markov chains built from it.

For an adjacency matrix ``A`` the Ruelle-Bowen chain has transitions
``r_ij = a_ij phi_j / (lambda phi_i)`` and stationary law
``phihat_i phi_i``; it spreads mass uniformly over equal-length paths.
For a weighted matrix ``B = exp(-l / T)`` the same construction gives the
chain of minimal free-energy rate ``-log lambda_B``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Distribution, Kernel, PathMeasure, WeightedDigraph, boltzmann_kernel, safe_log
from .errors import NotConverged, NotPrimitive
from .hilbert import hilbert_distance_log

POWER_TOL = 1e-14
POWER_MAX_ITER = 1_000_000


@dataclass(frozen=True)
class PerronData:
    lam: float
    right: np.ndarray
    left: np.ndarray
    primitivity_exponent: int
    iterations: int

    @property
    def log_lam(self) -> float:
        return float(np.log(self.lam))


@dataclass(frozen=True)
class StationaryChain:
    transition: np.ndarray
    stationary: Distribution


def _entries(K) -> np.ndarray:
    if isinstance(K, Kernel):
        return K.entries
    return np.asarray(K, dtype=float)


def primitivity_exponent(K) -> int:
    """Smallest ``m`` with ``K^m > 0`` entrywise, checked on the boolean
    support up to Wielandt's bound ``n^2 - 2n + 2``.

    Raises :class:`NotPrimitive` with a zero entry of the last power as
    certificate.
    """
    S = _entries(K) > 0
    n = S.shape[0]
    bound = n * n - 2 * n + 2
    P = S.copy()
    Si = S.astype(np.int64)
    for m in range(1, bound + 1):
        if P.all():
            return m
        P = (P.astype(np.int64) @ Si) > 0
    if P.all():
        return bound + 1  # unreachable for primitive matrices
    i, j = np.argwhere(~P)[0]
    raise NotPrimitive(
        f"matrix is not primitive: (K^{bound})[{i + 1},{j + 1}] = 0 at the Wielandt bound",
        certificate={"power": bound, "zero_entry": (int(i) + 1, int(j) + 1)},
    )


def _power(K: np.ndarray, tol: float, max_iter: int):
    v = np.ones(K.shape[0])
    lv = np.zeros_like(v)
    for k in range(1, max_iter + 1):
        w = K @ v
        w /= w.max()
        lw = safe_log(w)
        step = hilbert_distance_log(lw, lv)
        v, lv = w, lw
        if step < tol:
            return v, k
    raise NotConverged(f"power iteration did not converge in {max_iter} steps", last_distance=step)


def perron(K, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> PerronData:
    """Spectral radius and positive eigenvectors of a primitive matrix.

    Power iteration on ``K`` and ``K^T`` until successive iterates are
    within ``tol`` in Hilbert's metric.  ``right`` is scaled to geometric
    mean one and ``left`` so that ``<left, right> = 1``.
    """
    A = _entries(K)
    m = primitivity_exponent(A)
    phi, it_r = _power(A, tol, max_iter)
    phihat, it_l = _power(A.T, tol, max_iter)
    phi = phi / np.exp(np.mean(np.log(phi)))
    phihat = phihat / (phihat @ phi)
    lam = float(phihat @ (A @ phi) / (phihat @ phi))
    phi.setflags(write=False)
    phihat.setflags(write=False)
    return PerronData(lam, phi, phihat, m, max(it_r, it_l))


def eigen_residuals(K, data: PerronData) -> tuple:
    A = _entries(K)
    r = np.max(np.abs(A @ data.right - data.lam * data.right)) / np.max(data.right)
    l = np.max(np.abs(A.T @ data.left - data.lam * data.left)) / np.max(data.left)
    return float(r), float(l)


def topological_entropy_rate(A) -> float:
    """``log`` of the spectral radius of a primitive adjacency matrix."""
    return perron(A).log_lam


def _chain(A: np.ndarray, data: PerronData) -> StationaryChain:
    R = A * data.right[None, :] / (data.lam * data.right[:, None])
    R = R / R.sum(axis=1, keepdims=True)
    mu = data.left * data.right
    R.setflags(write=False)
    return StationaryChain(R, Distribution(mu / mu.sum()))


def ruelle_bowen_chain(A) -> tuple:
    A = _entries(A)
    data = perron(A)
    return data, _chain(A, data)


def ruelle_bowen(A, N: int) -> PathMeasure:
    """Stationary Ruelle-Bowen path measure over ``N`` steps."""
    _, chain = ruelle_bowen_chain(A)
    return PathMeasure.homogeneous(chain.stationary.weights, Kernel.from_entries(chain.transition), N)


def weighted_pressure_chain(graph: WeightedDigraph, T: float = 1.0) -> tuple:
    """Perron data of ``B(T) = exp(-l / T)`` and its minimal free-energy-rate chain.

    Transitions ``r_ij = b_ij phi_j / (lambda phi_i)`` use the right
    eigenvector, which makes ``phihat * phi`` stationary.
    """
    B = boltzmann_kernel(graph, T).entries
    data = perron(B)
    return data, _chain(B, data)


def entropy_rate(chain: StationaryChain) -> float:
    """``-sum_ij mu_i r_ij log r_ij``."""
    R = chain.transition
    mu = chain.stationary.weights
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(R > 0, R * np.log(R), 0.0)
    return float(-mu @ terms.sum(axis=1))


def length_rate(chain: StationaryChain, lengths) -> float:
    """Average edge length per step, ``sum_ij mu_i r_ij l_ij``."""
    R = chain.transition
    L = np.where(R > 0, np.asarray(lengths, dtype=float), 0.0)
    return float(chain.stationary.weights @ (R * L).sum(axis=1))


def free_energy_rate(chain: StationaryChain, graph: WeightedDigraph, T: float) -> float:
    """``length_rate / T - entropy_rate``; equals ``-log lambda_B(T)`` for the
    chain from :func:`weighted_pressure_chain`."""
    return length_rate(chain, graph.lengths) / T - entropy_rate(chain)


__all__ = [
    "PerronData",
    "StationaryChain",
    "eigen_residuals",
    "entropy_rate",
    "free_energy_rate",
    "length_rate",
    "perron",
    "primitivity_exponent",
    "ruelle_bowen",
    "ruelle_bowen_chain",
    "topological_entropy_rate",
    "weighted_pressure_chain",
]
