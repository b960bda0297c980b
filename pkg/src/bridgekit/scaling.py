"""Fortet / IPF / Sinkhorn scaling for the one-step Schrödinger system.

Given a positive matrix ``G`` and probability vectors ``p`` and ``q`` find
vectors with

    phi0 = G phi1,   phihat1 = G^T phihat0,   phi0 * phihat0 = p,   phi1 * phihat1 = q.

The solver iterates the composed map

    C(x) = G (q / (G^T (p / x))),   x_0 = 1,

and stops once successive iterates are within ``tol`` in Hilbert's
projective metric, the metric in which ``C`` is a strict contraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Coupling,
    Distribution,
    Kernel,
    kl_divergence,
    log_matvec,
    log_rmatvec,
    safe_log,
    validate_distribution,
)
from .errors import DimensionMismatch, MaxIterationsExceeded, NonPositiveKernel, NotConverged
from .hilbert import hilbert_distance_log

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000
LINEAR_DYNAMIC_RANGE = 1e-8


@dataclass(frozen=True)
class ScalingProblem:
    G: Kernel
    p: Distribution
    q: Distribution

    def __post_init__(self):
        G = self.G if isinstance(self.G, Kernel) else Kernel.from_entries(self.G)
        p = self.p if isinstance(self.p, Distribution) else validate_distribution(self.p)
        q = self.q if isinstance(self.q, Distribution) else validate_distribution(self.q)
        if G.shape != (p.n, q.n):
            raise DimensionMismatch(f"kernel {G.shape} does not match marginals ({p.n}, {q.n})")
        if not G.is_positive():
            i, j = np.argwhere(~G.support)[0]
            raise NonPositiveKernel(
                f"kernel must be strictly positive: entry ({i + 1}, {j + 1}) is zero"
            )
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def dynamic_range(self) -> float:
        L = self.G.log_entries
        return float(np.exp(L.min() - L.max()))


@dataclass(frozen=True)
class ScalingSolution:
    log_phi0: np.ndarray
    log_phihat0: np.ndarray
    log_phi1: np.ndarray
    log_phihat1: np.ndarray
    iterations: int
    final_step: float
    residual: float
    converged: bool
    tol: float
    steps: tuple = field(repr=False, default=())

    @property
    def phi0(self):
        return np.exp(self.log_phi0)

    @property
    def phihat0(self):
        return np.exp(self.log_phihat0)

    @property
    def phi1(self):
        return np.exp(self.log_phi1)

    @property
    def phihat1(self):
        return np.exp(self.log_phihat1)


class _LogOps:
    def __init__(self, problem):
        self.L = problem.G.log_entries
        self.lp = safe_log(problem.p.weights)
        self.lq = safe_log(problem.q.weights)

    def forward(self, lx):  # E
        return log_matvec(self.L, lx)

    def adjoint(self, lx):  # E^dagger
        return log_rmatvec(self.L, lx)


class _LinearOps(_LogOps):
    # plain matvecs on exp(L - max L); the vector is shifted the same way,
    # so kernels whose entries are all tiny or all huge stay representable
    def __init__(self, problem):
        super().__init__(problem)
        self.shift = float(self.L.max())
        self.G = np.exp(self.L - self.shift)

    def _apply(self, M, lx):
        c = np.max(lx)
        if not np.isfinite(c):
            return np.full(M.shape[0], -np.inf)
        return safe_log(M @ np.exp(lx - c)) + c + self.shift

    def forward(self, lx):
        return self._apply(self.G, lx)

    def adjoint(self, lx):
        return self._apply(self.G.T, lx)


def _ops(problem, domain):
    if domain == "auto":
        domain = "linear" if problem.dynamic_range > LINEAR_DYNAMIC_RANGE else "log"
    if domain == "linear":
        return _LinearOps(problem)
    if domain == "log":
        return _LogOps(problem)
    raise ValueError(f"unknown domain {domain!r}")


def _divide(log_num, log_den):
    # 0 / positive = 0
    out = log_num - log_den
    out[np.isneginf(log_num)] = -np.inf
    return out


def _cycle(ops, lphi0):
    lhat0 = _divide(ops.lp, lphi0)
    lhat1 = ops.adjoint(lhat0)
    lphi1 = _divide(ops.lq, lhat1)
    return ops.forward(lphi1), lphi1


def sinkhorn_cycle(problem: ScalingProblem, phi0) -> np.ndarray:
    """One application of ``C = E o D1 o E^dagger o D0`` to a positive vector."""
    phi0 = np.asarray(phi0, dtype=float)
    if phi0.shape != (problem.p.n,):
        raise DimensionMismatch(f"expected a vector of length {problem.p.n}")
    if np.any(phi0 <= 0):
        raise ValueError("sinkhorn_cycle needs a strictly positive vector")
    new, _ = _cycle(_LogOps(problem), np.log(phi0))
    return np.exp(new)


def solve_schrodinger_system(
    problem: ScalingProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    domain: str = "auto",
    raise_on_failure: bool = True,
) -> ScalingSolution:
    """Iterate ``phi0 <- C(phi0)`` from the all-ones vector to a fixed point.

    After the last cycle one closing half-step sets ``phihat0 = p / phi0``
    and ``phihat1 = G^T phihat0``, so three of the four equations hold to
    rounding and ``residual`` reports the remaining violation of
    ``phi1 * phihat1 = q``.  The returned representative of the solution
    ray has ``phi0`` with geometric mean one.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    ops = _ops(problem, domain)
    lphi0 = np.zeros(problem.p.n)
    steps = []
    step = float("inf")
    converged = False
    lphi1 = None
    for _ in range(max_iter):
        new, lphi1 = _cycle(ops, lphi0)
        step = hilbert_distance_log(new, lphi0)
        steps.append(step)
        lphi0 = new
        if step < tol:
            converged = True
            break
    if not converged and raise_on_failure:
        raise MaxIterationsExceeded(
            f"no convergence in {max_iter} cycles (last Hilbert step {step:.3e}, tol {tol:.1e})",
            last_distance=step,
        )
    lhat0 = _divide(ops.lp, lphi0)
    lhat1 = ops.adjoint(lhat0)
    with np.errstate(invalid="ignore"):
        residual = float(np.max(np.abs(np.exp(lphi1 + lhat1) - problem.q.weights)))
    c = float(np.mean(lphi0))
    return ScalingSolution(
        log_phi0=lphi0 - c,
        log_phihat0=lhat0 + c,
        log_phi1=lphi1 - c,
        log_phihat1=lhat1 + c,
        iterations=len(steps),
        final_step=step,
        residual=residual,
        converged=converged,
        tol=tol,
        steps=tuple(steps),
    )


def coupling_matrix(problem: ScalingProblem, solution: ScalingSolution) -> np.ndarray:
    """``phihat0_i g_ij phi1_j``, renormalized to unit mass."""
    J = np.exp(solution.log_phihat0[:, None] + problem.G.log_entries + solution.log_phi1[None, :])
    return J / J.sum()


def induced_coupling(problem: ScalingProblem, solution: ScalingSolution) -> Coupling:
    if not solution.converged:
        raise NotConverged(
            f"solution did not converge (last step {solution.final_step:.3e})",
            last_distance=solution.final_step,
        )
    return Coupling(coupling_matrix(problem, solution), problem.p, problem.q)


def fixed_point_residual(problem: ScalingProblem, solution: ScalingSolution) -> float:
    """``||C(phi0) - phi0||_inf / ||phi0||_inf`` at the returned potentials."""
    ops = _LogOps(problem)
    new, _ = _cycle(ops, solution.log_phi0)
    phi0 = np.exp(solution.log_phi0)
    return float(np.max(np.abs(np.exp(new) - phi0)) / np.max(phi0))


def system_residuals(problem: ScalingProblem, solution: ScalingSolution) -> dict:
    """Max violation of each of the four Schrödinger equations (linear scale,
    relative for the two linear equations)."""
    G = problem.G.entries
    phi0, phi1 = solution.phi0, solution.phi1
    hat0, hat1 = solution.phihat0, solution.phihat1
    return {
        "forward": float(np.max(np.abs(phi0 - G @ phi1) / np.maximum(phi0, 1e-300))),
        "backward": float(
            np.max(np.abs(hat1 - G.T @ hat0) / np.maximum(np.abs(hat1), 1e-300))
        ),
        "source": float(np.max(np.abs(phi0 * hat0 - problem.p.weights))),
        "target": float(np.max(np.abs(phi1 * hat1 - problem.q.weights))),
    }


def ipf_couplings(problem: ScalingProblem, half_cycles: int):
    """Couplings after each IPF half-step, starting from the prior ``G``.

    Odd steps match the row marginal, even steps the column marginal.
    """
    ops = _LogOps(problem)
    L = problem.G.log_entries
    lphi1 = np.zeros(problem.q.n)
    for k in range(half_cycles):
        if k % 2 == 0:
            lhat0 = _divide(ops.lp, ops.forward(lphi1))
        else:
            lphi1 = _divide(ops.lq, ops.adjoint(lhat0))
        yield np.exp(lhat0[:, None] + L + lphi1[None, :])


def prior_divergence(problem: ScalingProblem, joint) -> float:
    """``D(joint || G / sum(G))``."""
    G = problem.G.entries
    return kl_divergence(joint, G / G.sum())


def solve_on_support(
    log_kernel: np.ndarray,
    p,
    q,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    domain: str = "auto",
):
    """Solve the system for a kernel that need only be positive on
    ``supp(p) x supp(q)``.

    Returns ``(subproblem, solution, rows, cols)`` where the solution lives on the
    restricted index sets.  Callers embed the potentials back with zeros
    (``-inf`` logs) outside the supports.  Raises
    :class:`~bridgekit.errors.NonPositiveKernel` naming a zero entry of
    the restricted kernel.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    rows = np.flatnonzero(p > 0)
    cols = np.flatnonzero(q > 0)
    sub = np.asarray(log_kernel)[np.ix_(rows, cols)]
    if not np.all(np.isfinite(sub)):
        a, b = np.argwhere(~np.isfinite(sub))[0]
        raise NonPositiveKernel(
            f"kernel entry ({rows[a] + 1}, {cols[b] + 1}) is zero on the marginal supports"
        )
    pr = p[rows] / p[rows].sum()
    qc = q[cols] / q[cols].sum()
    problem = ScalingProblem(Kernel(sub), Distribution(pr), Distribution(qc))
    return problem, solve_schrodinger_system(problem, tol=tol, max_iter=max_iter, domain=domain), rows, cols


__all__ = [
    "ScalingProblem",
    "ScalingSolution",
    "coupling_matrix",
    "fixed_point_residual",
    "induced_coupling",
    "ipf_couplings",
    "prior_divergence",
    "sinkhorn_cycle",
    "solve_on_support",
    "solve_schrodinger_system",
    "system_residuals",
]
