"""Multi-step Schrödinger bridges over Markovian priors on a finite state space.

The prior is a :class:`~bridgekit.core.PathMeasure` with initial weights
``mu0`` and one-step weight matrices ``M(0), ..., M(N-1)``.  The bridge
between marginals ``nu0`` and ``nuN`` is obtained by scaling the product
``G = M(0) ... M(N-1)`` and then propagating the two potentials through
the individual steps:

    phi(t) = M(t) phi(t+1),        phihat(t+1) = M(t)^T phihat(t),
    Pi(t)  = diag(phi(t))^-1 M(t) diag(phi(t+1)),
    rho(t) = phi(t) * phihat(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_PATH_BUDGET,
    Coupling,
    Distribution,
    Kernel,
    PathMeasure,
    Potentials,
    enumerate_paths,
    log_matmul,
    log_matvec,
    log_rmatvec,
    safe_log,
    validate_distribution,
)
from .errors import (
    DimensionMismatch,
    InfeasibleSupport,
    InputError,
    NoFeasiblePath,
    NonPositiveKernel,
    NotConverged,
)
from .hilbert import contraction_ratio
from .scaling import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_on_support

MAX_MASS_RTOL = 1e-9


@dataclass(frozen=True)
class BridgeProblem:
    """Prior path measure plus the two end-point marginals.

    Only the block of ``G`` on ``supp(nu0) x supp(nuN)`` has to be
    positive, and ``mu0`` only on ``supp(nu0)``.
    """

    prior: PathMeasure
    nu0: Distribution
    nuN: Distribution
    log_G: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nu0 = self.nu0 if isinstance(self.nu0, Distribution) else validate_distribution(self.nu0)
        nuN = self.nuN if isinstance(self.nuN, Distribution) else validate_distribution(self.nuN)
        n = self.prior.n
        if nu0.n != n or nuN.n != n:
            raise DimensionMismatch(f"marginals must have {n} entries")
        if np.any(np.isneginf(self.prior.log_initial[nu0.support])):
            i = nu0.support[np.isneginf(self.prior.log_initial[nu0.support])][0]
            raise InfeasibleSupport(f"prior initial weight vanishes at node {i + 1} where nu0 > 0")
        log_G = self.prior.steps[0].log_entries
        for s in self.prior.steps[1:]:
            log_G = log_matmul(log_G, s.log_entries)
        block = log_G[np.ix_(nu0.support, nuN.support)]
        if not np.all(np.isfinite(block)):
            a, b = np.argwhere(~np.isfinite(block))[0]
            i, j = nu0.support[a], nuN.support[b]
            raise InfeasibleSupport(
                f"G = M(0)...M(N-1) has a zero entry at ({i + 1}, {j + 1}): "
                f"node {j + 1} is unreachable from node {i + 1} in {self.prior.horizon} steps"
            )
        log_G.setflags(write=False)
        object.__setattr__(self, "nu0", nu0)
        object.__setattr__(self, "nuN", nuN)
        object.__setattr__(self, "log_G", log_G)

    @property
    def horizon(self) -> int:
        return self.prior.horizon

    @property
    def n(self) -> int:
        return self.prior.n


@dataclass(frozen=True)
class BridgeSolution:
    potentials: Potentials
    transitions: tuple
    marginal_flow: np.ndarray
    nu0: Distribution
    iterations: int
    final_step: float
    residual: float
    kappa: float
    flagged_rows: tuple = ()

    @property
    def horizon(self) -> int:
        return len(self.transitions)

    @property
    def measure(self) -> PathMeasure:
        """The bridge as a Markov path measure ``nu0(x0) prod Pi_{x_t x_{t+1}}(t)``."""
        steps = tuple(Kernel(safe_log(P)) for P in self.transitions)
        return PathMeasure(safe_log(self.nu0.weights), steps)


def solve_bridge(problem: BridgeProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> BridgeSolution:
    n, N = problem.n, problem.horizon
    try:
        _, sol, rows, cols = solve_on_support(
            problem.log_G, problem.nu0.weights, problem.nuN.weights, tol=tol, max_iter=max_iter
        )
    except NonPositiveKernel as exc:  # pre-checked in BridgeProblem; kept for safety
        raise InfeasibleSupport(str(exc)) from exc
    if not sol.converged:
        raise NotConverged("Schrödinger system did not converge", last_distance=sol.final_step)
    kappa = contraction_ratio(Kernel(problem.log_G[np.ix_(rows, cols)]))

    log_phi = np.full((N + 1, n), -np.inf)
    log_hat = np.full((N + 1, n), -np.inf)
    log_phi[N, cols] = sol.log_phi1
    log_hat[0, rows] = sol.log_phihat0
    for t in range(N - 1, -1, -1):
        log_phi[t] = log_matvec(problem.prior.steps[t].log_entries, log_phi[t + 1])
    for t in range(N):
        log_hat[t + 1] = log_rmatvec(problem.prior.steps[t].log_entries, log_hat[t])

    transitions = []
    flagged = []
    for t in range(N):
        L = problem.prior.steps[t].log_entries
        with np.errstate(invalid="ignore"):
            logP = L + log_phi[t + 1][None, :] - log_phi[t][:, None]
        P = np.exp(logP)
        dead = np.isneginf(log_phi[t])
        for i in np.flatnonzero(dead):
            support = np.isfinite(L[i])
            P[i] = support / support.sum() if support.any() else 0.0
            flagged.append((t, int(i)))
        P[np.isnan(P)] = 0.0
        P.setflags(write=False)
        transitions.append(P)

    flow = np.exp(log_phi + log_hat)
    flow.setflags(write=False)
    return BridgeSolution(
        potentials=Potentials(log_phi, log_hat),
        transitions=tuple(transitions),
        marginal_flow=flow,
        nu0=problem.nu0,
        iterations=sol.iterations,
        final_step=sol.final_step,
        residual=sol.residual,
        kappa=kappa,
        flagged_rows=tuple(flagged),
    )


def _as_measure(obj) -> PathMeasure:
    if isinstance(obj, BridgeSolution):
        return obj.measure
    if isinstance(obj, PathMeasure):
        return obj
    raise TypeError(f"expected PathMeasure or BridgeSolution, got {type(obj).__name__}")


def path_mass_table(problem: BridgeProblem, solution: BridgeSolution, budget: int = DEFAULT_PATH_BUDGET, prune: float | None = None):
    """Positive-mass paths of the bridge, most probable first.

    Ties are broken by lexicographic path order so the table is
    deterministic.
    """
    measure = solution.measure
    table = [(path, float(np.exp(lm))) for path, lm in enumerate_paths(measure, budget=budget, prune=prune)]
    table = [(p, m) for p, m in table if m > 0]
    table.sort(key=lambda item: (-item[1], item[0]))
    return table


def maximal_mass_paths(measure, x0: int, xN: int, budget: int = DEFAULT_PATH_BUDGET, rtol: float = MAX_MASS_RTOL) -> set:
    """All feasible ``x0 -> xN`` paths whose mass is within ``rtol`` of the largest."""
    measure = _as_measure(measure)
    items = list(enumerate_paths(measure, start=x0, end=xN, budget=budget))
    if not items:
        raise NoFeasiblePath(f"no positive-mass path from node {x0 + 1} to node {xN + 1}")
    top = max(lm for _, lm in items)
    # mass >= (1 - rtol) * max  <=>  log mass >= top + log1p(-rtol)
    cut = top + np.log1p(-rtol)
    return {p for p, lm in items if lm >= cut}


@dataclass(frozen=True)
class PinnedPrior:
    """The prior's conditional law given both end points."""

    prior: PathMeasure
    log_endpoint: np.ndarray  # log of mu0(i) G_ij, the prior's end-point joint

    def probability(self, path) -> float:
        lm = self.prior.log_mass(path)
        denom = self.log_endpoint[path[0], path[-1]]
        if not np.isfinite(lm):
            return 0.0
        return float(np.exp(lm - denom))


def static_reduction(problem: BridgeProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Split the bridge into an end-point coupling and the pinned prior.

    The coupling minimizes ``D(p0N || mu0(i) G_ij)`` under the two marginal
    constraints.  Recombining ``P*(x) = pinned(x) * p0N(x0, xN)`` gives
    the same path measure as :func:`solve_bridge`.
    """
    log_J = problem.prior.log_initial[:, None] + problem.log_G
    sub, sol, rows, cols = solve_on_support(log_J, problem.nu0.weights, problem.nuN.weights, tol=tol, max_iter=max_iter)
    if not sol.converged:
        raise NotConverged("end-point scaling did not converge", last_distance=sol.final_step)
    joint = np.zeros((problem.n, problem.n))
    block = np.exp(sol.log_phihat0[:, None] + sub.G.log_entries + sol.log_phi1[None, :])
    joint[np.ix_(rows, cols)] = block / block.sum()
    coupling = Coupling(joint, problem.nu0, problem.nuN)
    return coupling, PinnedPrior(problem.prior, log_J)


def composed_path_masses(coupling: Coupling, pinned: PinnedPrior, budget: int = DEFAULT_PATH_BUDGET):
    """``[(path, pinned(path) * p0N(x0, xN)), ...]`` over positive-mass paths."""
    out = []
    P = coupling.joint
    for path, lm in enumerate_paths(pinned.prior, budget=budget):
        w = P[path[0], path[-1]]
        if w > 0:
            out.append((path, float(np.exp(lm - pinned.log_endpoint[path[0], path[-1]]) * w)))
    out.sort(key=lambda item: (-item[1], item[0]))
    return out


def relative_entropy_on_paths(P, Q, budget: int = DEFAULT_PATH_BUDGET) -> float:
    """``sum_x P(x) log(P(x) / Q(x))``; ``inf`` if ``P`` charges a ``Q``-null path."""
    P, Q = _as_measure(P), _as_measure(Q)
    if P.horizon != Q.horizon or P.n != Q.n:
        raise DimensionMismatch("path measures differ in horizon or state count")
    total = []
    for path, lp in enumerate_paths(P, budget=budget):
        lq = Q.log_mass(path)
        if not np.isfinite(lq):
            return float("inf")
        total.append(np.exp(lp) * (lp - lq))
    return float(np.sum(total))


def static_kkt_residual(coupling: Coupling, log_prior_joint) -> float:
    """Distance of ``log(p0N / J)`` from the additive form ``u_i + v_j``
    on the coupling's support block (zero at the optimum)."""
    P = coupling.joint
    rows = coupling.row_marginal.support
    cols = coupling.col_marginal.support
    with np.errstate(divide="ignore"):
        R = np.log(P[np.ix_(rows, cols)]) - np.asarray(log_prior_joint)[np.ix_(rows, cols)]
    if not np.all(np.isfinite(R)):
        return float("inf")
    R = R - R.mean(axis=1, keepdims=True) - R.mean(axis=0, keepdims=True) + R.mean()
    return float(np.max(np.abs(R)))


__all__ = [
    "BridgeProblem",
    "BridgeSolution",
    "PinnedPrior",
    "composed_path_masses",
    "maximal_mass_paths",
    "path_mass_table",
    "relative_entropy_on_paths",
    "solve_bridge",
    "static_kkt_residual",
    "static_reduction",
]
