"""Heat-kernel Schrödinger bridges between densities on a uniform 1-D grid.

Densities are stored as point values ``rho(x_i)`` with unit Riemann sum
``sum rho_i h = 1``.  The Brownian transition density with diffusion
``epsilon`` is discretized as

    k_ij(s, t) = (2 pi eps (t - s))^(-1/2) exp(-(x_i - x_j)^2 / (2 eps (t - s))) h,

so that ``k(s, t) @ f`` is the quadrature of ``int p(s, x; t, y) f(y) dy``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Kernel
from .errors import DimensionMismatch, InputError, NegativeEntry, NotNormalized
from .scaling import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_on_support

DEFAULT_TIMES = tuple(np.linspace(0.0, 1.0, 11))
UNIT_MASS_TOL = 1e-10
GAUSSIAN_SUPPORT_SIGMAS = 8.0  # exp(-8^2 / 2) ~ 1.3e-14
KERNEL_MARGIN_SIGMAS = 6.0


@dataclass(frozen=True)
class Grid:
    a: float
    b: float
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise InputError(f"grid needs at least 2 points, got {self.m}")
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.b > self.a):
            raise InputError(f"grid interval must satisfy a < b, got [{self.a}, {self.b}]")
        object.__setattr__(self, "m", int(self.m))

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.m)

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.m - 1)


def grid_for_supports(lo: float, hi: float, epsilon: float, m: int) -> Grid:
    """Grid covering ``[lo - 6 sqrt(eps), hi + 6 sqrt(eps)]``.

    The margin keeps the row-sum defect of the heat kernel below about
    ``1e-6`` for rows inside ``[lo, hi]``.
    """
    pad = KERNEL_MARGIN_SIGMAS * np.sqrt(epsilon)
    return Grid(lo - pad, hi + pad, m)


@dataclass(frozen=True)
class GridDensity:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.m,):
            raise DimensionMismatch(f"density has {v.size} values for {self.grid.m} grid points")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise NegativeEntry("density values must be finite and nonnegative")
        mass = v.sum() * self.grid.h
        if abs(mass - 1.0) > UNIT_MASS_TOL:
            raise NotNormalized(f"density integrates to {mass!r}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, grid: Grid, values) -> "GridDensity":
        """Normalize arbitrary nonnegative samples to unit mass."""
        v = np.asarray(values, dtype=float)
        if v.shape != (grid.m,):
            raise DimensionMismatch(f"density has {v.size} values for {grid.m} grid points")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise NegativeEntry("density values must be finite and nonnegative")
        total = v.sum() * grid.h
        if not total > 0:
            raise InputError("density has zero mass on the grid")
        return cls(grid, v / total)

    @property
    def weights(self) -> np.ndarray:
        """Cell masses ``rho_i h`` (a probability vector)."""
        w = self.values * self.grid.h
        return w / w.sum()

    def mean(self) -> float:
        return float(self.weights @ self.grid.points)

    def variance(self) -> float:
        x = self.grid.points
        mu = self.mean()
        return float(self.weights @ (x - mu) ** 2)


def gaussian(grid: Grid, mean: float, var: float) -> GridDensity:
    if not var > 0:
        raise InputError(f"variance must be positive, got {var}")
    x = grid.points
    return GridDensity.from_values(grid, np.exp(-((x - mean) ** 2) / (2 * var)))


def heat_kernel(grid: Grid, epsilon: float, s: float = 0.0, t: float = 1.0) -> Kernel:
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    if not 0 <= s < t <= 1:
        raise InputError(f"need 0 <= s < t <= 1, got s={s}, t={t}")
    v = epsilon * (t - s)
    x = grid.points
    d2 = (x[:, None] - x[None, :]) ** 2
    return Kernel(-0.5 * np.log(2 * np.pi * v) - d2 / (2 * v) + np.log(grid.h))


def _check_pair(rho0: GridDensity, rho1: GridDensity):
    if rho0.grid != rho1.grid:
        raise DimensionMismatch("densities live on different grids")


@dataclass(frozen=True)
class GridBridge:
    """Scaled potentials of the one-step system on ``G = k(0, 1)``.

    Arrays are logs on the full grid, ``-inf`` outside the supports.
    """

    grid: Grid
    epsilon: float
    log_phi1: np.ndarray
    log_phihat0: np.ndarray
    log_rho0: np.ndarray
    log_rho1: np.ndarray
    iterations: int
    final_step: float
    residual: float

    def coupling(self) -> np.ndarray:
        """Endpoint coupling ``phihat0_i G_ij phi1_j`` as cell masses."""
        G = heat_kernel(self.grid, self.epsilon).log_entries
        with np.errstate(invalid="ignore"):
            L = self.log_phihat0[:, None] + G + self.log_phi1[None, :]
        P = np.exp(L)
        P[np.isnan(P)] = 0.0
        return P / P.sum()


def solve_grid_bridge(rho0: GridDensity, rho1: GridDensity, epsilon: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> GridBridge:
    _check_pair(rho0, rho1)
    grid = rho0.grid
    G = heat_kernel(grid, epsilon)
    p, q = rho0.weights, rho1.weights
    _, sol, rows, cols = solve_on_support(G.log_entries, p, q, tol=tol, max_iter=max_iter)
    lphi1 = np.full(grid.m, -np.inf)
    lhat0 = np.full(grid.m, -np.inf)
    lphi1[cols] = sol.log_phi1
    lhat0[rows] = sol.log_phihat0
    with np.errstate(divide="ignore"):
        lr0, lr1 = np.log(rho0.values), np.log(rho1.values)
    return GridBridge(grid, float(epsilon), lphi1, lhat0, lr0, lr1, sol.iterations, sol.final_step, sol.residual)


def _logsumexp_rows(L: np.ndarray) -> np.ndarray:
    m = np.max(L, axis=1)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.sum(np.exp(L - safe[:, None]), axis=1))


def marginal_at(bridge: GridBridge, t: float) -> np.ndarray:
    """Density values of ``rho(t)`` on the grid (unit Riemann sum)."""
    if t <= 0.0:
        return np.exp(bridge.log_rho0)
    if t >= 1.0:
        return np.exp(bridge.log_rho1)
    K_t1 = heat_kernel(bridge.grid, bridge.epsilon, t, 1.0).log_entries
    K_0t = heat_kernel(bridge.grid, bridge.epsilon, 0.0, t).log_entries
    lphi = _logsumexp_rows(K_t1 + bridge.log_phi1[None, :])
    lhat = _logsumexp_rows(K_0t.T + bridge.log_phihat0[None, :])
    lr = lphi + lhat
    lr -= np.max(lr)
    r = np.exp(lr)
    return r / (r.sum() * bridge.grid.h)


def entropic_interpolation(rho0: GridDensity, rho1: GridDensity, epsilon: float, times=DEFAULT_TIMES, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> list:
    """Marginal densities ``rho(t) = phi(t) phihat(t)`` of the heat-kernel bridge.

    ``phi(t) = k(t, 1) phi(1)`` and ``phihat(t) = k(0, t)^T phihat(0)``.
    Endpoint times return the inputs themselves, which the scaled
    potentials reproduce to solver tolerance.
    """
    times = [float(t) for t in times]
    if any(not 0.0 <= t <= 1.0 for t in times):
        raise InputError("interpolation times must lie in [0, 1]")
    bridge = solve_grid_bridge(rho0, rho1, epsilon, tol=tol, max_iter=max_iter)
    return [GridDensity(rho0.grid, marginal_at(bridge, t)) for t in times]


def bridge_marginal_error(bridge: GridBridge) -> float:
    """Max-norm gap between ``phi(0) phihat(0)``, ``phi(1) phihat(1)`` and the inputs."""
    G = heat_kernel(bridge.grid, bridge.epsilon).log_entries
    h = bridge.grid.h
    with np.errstate(invalid="ignore"):
        lphi0 = _logsumexp_rows(G + bridge.log_phi1[None, :])
        lhat1 = _logsumexp_rows(G.T + bridge.log_phihat0[None, :])
    r0 = np.nan_to_num(np.exp(lphi0 + bridge.log_phihat0)) / h
    r1 = np.nan_to_num(np.exp(lhat1 + bridge.log_phi1)) / h
    return float(max(np.max(np.abs(r0 - np.exp(bridge.log_rho0))), np.max(np.abs(r1 - np.exp(bridge.log_rho1)))))


def transport_cost_of(grid: Grid, coupling: np.ndarray) -> float:
    """``sum (x_i - x_j)^2 / 2 * pi_ij``."""
    x = grid.points
    return float(np.sum(0.5 * (x[:, None] - x[None, :]) ** 2 * coupling))


def entropic_cost_curve(rho0: GridDensity, rho1: GridDensity, epsilons, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> list:
    """``[(eps, sum c pi*(eps)), ...]`` for the quadratic cost ``c = |x - y|^2 / 2``.

    The heat kernel at diffusion ``eps`` is ``exp(-c / eps)`` up to a
    constant factor, so the bridge coupling is the entropic transport plan.
    """
    eps = [float(e) for e in epsilons]
    if any(not e > 0 for e in eps):
        raise InputError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise InputError("epsilons must be strictly decreasing")
    out = []
    for e in eps:
        bridge = solve_grid_bridge(rho0, rho1, e, tol=tol, max_iter=max_iter)
        out.append((e, transport_cost_of(rho0.grid, bridge.coupling())))
    return out


__all__ = [
    "DEFAULT_TIMES",
    "Grid",
    "GridBridge",
    "GridDensity",
    "bridge_marginal_error",
    "entropic_cost_curve",
    "entropic_interpolation",
    "gaussian",
    "grid_for_supports",
    "heat_kernel",
    "marginal_at",
    "solve_grid_bridge",
    "transport_cost_of",
]
