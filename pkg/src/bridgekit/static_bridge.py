"""Free-energy statics and entropy-regularized discrete transport.

Temperature and regularization strength are the same knob (Boltzmann
constant fixed to one): the regularized transport objective

    J(pi) = sum c_ij pi_ij + eps * sum pi_ij log pi_ij

is the free energy of ``pi`` on the product space with energies ``c`` at
temperature ``eps``, and its minimizer over couplings is the relative
entropy projection of the Boltzmann joint ``exp(-c / eps) / Z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Coupling, Distribution, Kernel, kl_divergence, neg_entropy, validate_distribution
from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    InputError,
    IrrationalMarginals,
    NegativeEntry,
    NonPositiveTemperature,
    OracleScaleExceeded,
)
from .oracle import assignment_ot_oracle, vertex_enumeration_ot, OracleBudget
from .scaling import ScalingProblem, induced_coupling, solve_schrodinger_system


def _logsumexp(v) -> float:
    v = np.asarray(v, dtype=float)
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


@dataclass(frozen=True)
class EnergyLandscape:
    energies: np.ndarray
    T: float

    def __post_init__(self):
        E = np.array(self.energies, dtype=float)
        if E.ndim != 1 or not np.all(np.isfinite(E)):
            raise InputError("energies must be a finite vector")
        if np.any(E < 0):
            raise NegativeEntry("energies must be nonnegative")
        if not self.T > 0:
            raise NonPositiveTemperature(f"temperature must be positive, got {self.T}")
        E.setflags(write=False)
        object.__setattr__(self, "energies", E)


def log_partition(landscape: EnergyLandscape) -> float:
    return _logsumexp(-landscape.energies / landscape.T)


def boltzmann_distribution(landscape: EnergyLandscape) -> Distribution:
    logw = -landscape.energies / landscape.T
    w = np.exp(logw - _logsumexp(logw))
    return Distribution(w / w.sum())


def free_energy(pi, landscape: EnergyLandscape) -> float:
    """Helmholtz free energy ``U(pi) - T S(pi)``."""
    pi = np.asarray(pi, dtype=float)
    if pi.shape != landscape.energies.shape:
        raise DimensionMismatch("distribution and energies differ in length")
    return float(pi @ landscape.energies + landscape.T * neg_entropy(pi))


@dataclass(frozen=True)
class TransportInstance:
    cost: np.ndarray
    p: Distribution
    q: Distribution
    epsilon: float = 0.0

    def __post_init__(self):
        C = np.array(self.cost, dtype=float)
        p = self.p if isinstance(self.p, Distribution) else validate_distribution(self.p)
        q = self.q if isinstance(self.q, Distribution) else validate_distribution(self.q)
        if C.shape != (p.n, q.n):
            raise DimensionMismatch(f"cost {C.shape} does not match marginals ({p.n}, {q.n})")
        if not np.all(np.isfinite(C)) or np.any(C < 0):
            raise NegativeEntry("costs must be finite and nonnegative")
        if self.epsilon < 0:
            raise InputError("epsilon must be nonnegative")
        C.setflags(write=False)
        object.__setattr__(self, "cost", C)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def boltzmann_kernel(self) -> Kernel:
        return Kernel(-self.cost / self.epsilon)

    def boltzmann_joint(self) -> np.ndarray:
        L = -self.cost / self.epsilon
        return np.exp(L - _logsumexp(L.ravel()))


def transport_cost(joint, cost) -> float:
    return float(np.sum(np.asarray(joint) * np.asarray(cost)))


def regularized_objective(joint, cost, epsilon: float) -> float:
    return transport_cost(joint, cost) + epsilon * neg_entropy(joint)


def regularized_ot(instance: TransportInstance, tol: float = 1e-12, max_iter: int = 100_000):
    """Entropic optimal coupling and its objective value ``J(pi*)``.

    Solved as a Schrödinger system on the kernel ``exp(-c / eps)``.
    """
    if not instance.epsilon > 0:
        raise InputError("regularized_ot needs epsilon > 0; use ot_lp_value for epsilon = 0")
    problem = ScalingProblem(instance.boltzmann_kernel(), instance.p, instance.q)
    solution = solve_schrodinger_system(problem, tol=tol, max_iter=max_iter)
    coupling = induced_coupling(problem, solution)
    return coupling, regularized_objective(coupling.joint, instance.cost, instance.epsilon)


def boltzmann_divergence(instance: TransportInstance, joint) -> float:
    """``D(joint || pi_B)``; equals ``(J(joint) + eps log Z) / eps``."""
    return kl_divergence(joint, instance.boltzmann_joint())


def ot_lp_value(instance: TransportInstance, budget: OracleBudget | None = None) -> float:
    """Exact unregularized transport value ``min sum c_ij pi_ij``.

    Rational marginals (common denominator up to the assignment budget)
    go through an assignment expansion; other instances up to 4x4 through
    vertex enumeration.
    """
    budget = budget or OracleBudget(max_assignment_units=64)
    p, q = instance.p.weights, instance.q.weights
    try:
        return assignment_ot_oracle(instance.cost, p, q, budget)
    except (IrrationalMarginals, BudgetExceeded):
        pass
    try:
        return vertex_enumeration_ot(instance.cost, p, q)
    except BudgetExceeded as exc:
        raise OracleScaleExceeded(
            f"{instance.cost.shape} instance with marginals outside the exact oracles' reach"
        ) from exc


def solve_transport(instance: TransportInstance, **kwargs):
    """Dispatch on ``epsilon``: exact LP value for zero, entropic solve otherwise.

    Returns ``(coupling or None, value)``.
    """
    if instance.epsilon == 0:
        return None, ot_lp_value(instance)
    return regularized_ot(instance, **kwargs)


__all__ = [
    "EnergyLandscape",
    "TransportInstance",
    "boltzmann_distribution",
    "boltzmann_divergence",
    "free_energy",
    "log_partition",
    "ot_lp_value",
    "regularized_objective",
    "regularized_ot",
    "solve_transport",
    "transport_cost",
]
