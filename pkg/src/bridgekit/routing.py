"""Robust routing: bridge a maximal-entropy prior from a source node to a
sink node over a fixed number of steps.

Two priors are available.  ``"ruelle_bowen"`` spreads mass uniformly over
equal-length paths; ``"boltzmann"`` weights a path by
``exp(-length / T)``.  With point-mass marginals the bridge over either
chain equals the bridge over its raw kernel (adjacency ``A`` or
``B(T)``), because the chain's transitions differ from the kernel only
by a diagonal similarity and a constant factor.  ``plan_route`` uses the
raw kernel, which also works on graphs that are not primitive;
``route="chain"`` builds the Perron chain first and is kept as a
cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_PATH_BUDGET,
    Kernel,
    PathMeasure,
    WeightedDigraph,
    adjacency_kernel,
    boltzmann_kernel,
    dirac,
    enumerate_paths,
    format_path,
)
from .dynamic_bridge import BridgeProblem, maximal_mass_paths, path_mass_table, solve_bridge
from .errors import IndexOutOfRange, InputError, NoFeasiblePath, NonPositiveTemperature
from .spectral import ruelle_bowen_chain, weighted_pressure_chain

DEFAULT_SWEEP = (100.0, 10.0, 1.0, 0.3, 0.1)
LENGTH_TIE_TOL = 1e-12

_PRIOR_ALIASES = {
    "rb": "ruelle_bowen",
    "ruelle_bowen": "ruelle_bowen",
    "ruelle-bowen": "ruelle_bowen",
    "boltzmann": "boltzmann",
}


@dataclass(frozen=True)
class RoutingRequest:
    graph: WeightedDigraph
    source: int
    sink: int
    horizon: int
    prior: str = "boltzmann"
    temperature: float = 1.0
    temperatures: tuple | None = None

    def __post_init__(self):
        n = self.graph.n
        for name in ("source", "sink"):
            v = getattr(self, name)
            if not 0 <= v < n:
                raise IndexOutOfRange(f"{name} {v + 1} outside 1..{n}")
        if self.horizon < 1:
            raise InputError(f"horizon must be >= 1, got {self.horizon}")
        kind = _PRIOR_ALIASES.get(str(self.prior).lower())
        if kind is None:
            raise InputError(f"unknown prior {self.prior!r}; use 'rb' or 'boltzmann'")
        object.__setattr__(self, "prior", kind)
        if kind == "boltzmann" and not self.temperature > 0:
            raise NonPositiveTemperature(f"temperature must be positive, got {self.temperature}")
        if self.temperatures is not None:
            temps = tuple(float(t) for t in self.temperatures)
            if any(not t > 0 for t in temps):
                raise NonPositiveTemperature("sweep temperatures must be positive")
            object.__setattr__(self, "temperatures", temps)

    def at_temperature(self, T: float) -> "RoutingRequest":
        return RoutingRequest(self.graph, self.source, self.sink, self.horizon, "boltzmann", T)


@dataclass(frozen=True)
class RoutingReport:
    request: RoutingRequest
    flow: np.ndarray
    paths: list
    most_probable: frozenset
    diagnostics: dict = field(default_factory=dict)

    def path_table(self) -> list:
        return [(format_path(p, self.request.graph.nodes), m) for p, m in self.paths]


def reachable_in(graph: WeightedDigraph, source: int, steps: int) -> np.ndarray:
    """Boolean mask of nodes reachable from ``source`` in exactly ``steps`` steps."""
    S = np.isfinite(graph.lengths)
    reach = np.zeros(graph.n, dtype=bool)
    reach[source] = True
    for _ in range(steps):
        reach = (reach[:, None] & S).any(axis=0)
    return reach


def _check_feasible(graph, source, sink, N):
    if not reachable_in(graph, source, N)[sink]:
        raise NoFeasiblePath(
            f"node {sink + 1} is not reachable from node {source + 1} in exactly {N} steps"
        )


def _length_measure(graph, source, N) -> PathMeasure:
    # log mass of a path from `source` = -(its length)
    with np.errstate(invalid="ignore"):
        L = -graph.lengths
    L[~np.isfinite(graph.lengths)] = -np.inf
    init = np.full(graph.n, -np.inf)
    init[source] = 0.0
    return PathMeasure(init, (Kernel(L),) * N)


def feasible_paths(graph: WeightedDigraph, source: int, sink: int, N: int, budget: int = DEFAULT_PATH_BUDGET) -> list:
    """``[(path, length), ...]`` for every ``source -> sink`` path of ``N`` steps."""
    m = _length_measure(graph, source, N)
    return [(p, -lm) for p, lm in enumerate_paths(m, start=source, end=sink, budget=budget)]


def shortest_paths(graph: WeightedDigraph, source: int, sink: int, N: int, budget: int = DEFAULT_PATH_BUDGET):
    """Minimum total length over ``N``-step paths and the set attaining it."""
    items = feasible_paths(graph, source, sink, N, budget)
    if not items:
        raise NoFeasiblePath(f"no {N}-step path from node {source + 1} to node {sink + 1}")
    best = min(length for _, length in items)
    tie = LENGTH_TIE_TOL * max(1.0, abs(best))
    return best, {p for p, length in items if length <= best + tie}


def tv_distance(a, b) -> float:
    """Total variation between two path tables given as mappings or pair lists."""
    a, b = dict(a), dict(b)
    return 0.5 * float(sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b)))


def _uniform(paths) -> dict:
    paths = list(paths)
    return {p: 1.0 / len(paths) for p in paths}


def _prior_measure(request: RoutingRequest, route: str) -> PathMeasure:
    g, N = request.graph, request.horizon
    if route == "direct":
        K = adjacency_kernel(g) if request.prior == "ruelle_bowen" else boltzmann_kernel(g, request.temperature)
        return PathMeasure.homogeneous(np.ones(g.n), K, N)
    if route == "chain":
        if request.prior == "ruelle_bowen":
            _, chain = ruelle_bowen_chain(g.adjacency)
        else:
            _, chain = weighted_pressure_chain(g, request.temperature)
        return PathMeasure.homogeneous(
            chain.stationary.weights, Kernel.from_entries(chain.transition), N
        )
    raise InputError(f"unknown route {route!r}")


def plan_route(request: RoutingRequest, route: str = "direct", tol: float = 1e-12, max_iter: int = 100_000, budget: int = DEFAULT_PATH_BUDGET) -> RoutingReport:
    g, s, t, N = request.graph, request.source, request.sink, request.horizon
    _check_feasible(g, s, t, N)
    prior = _prior_measure(request, route)
    problem = BridgeProblem(prior, dirac(g.n, s), dirac(g.n, t))
    solution = solve_bridge(problem, tol=tol, max_iter=max_iter)
    table = path_mass_table(problem, solution, budget=budget)
    best = maximal_mass_paths(solution, s, t, budget=budget)

    masses = np.array([m for _, m in table])
    lengths = {p: length for p, length in feasible_paths(g, s, t, N, budget)}
    min_len = min(lengths.values())
    tie = LENGTH_TIE_TOL * max(1.0, abs(min_len))
    shortest = [p for p, length in lengths.items() if length <= min_len + tie]
    diagnostics = {
        "prior": request.prior,
        "route": route,
        "temperature": request.temperature if request.prior == "boltzmann" else None,
        "horizon": N,
        "iterations": solution.iterations,
        "final_hilbert_step": solution.final_step,
        "kappa_bound": solution.kappa,
        "marginal_residual": solution.residual,
        "tol": tol,
        "max_iter": max_iter,
        "path_entropy": float(-np.sum(masses[masses > 0] * np.log(masses[masses > 0]))),
        "feasible_paths": len(lengths),
        "min_length": min_len,
        "mean_length": float(sum(lengths[p] * m for p, m in table)),
        "tv_to_shortest": tv_distance(table, _uniform(shortest)),
        "tv_to_uniform": tv_distance(table, _uniform(lengths)),
        "flagged_rows": len(solution.flagged_rows),
    }
    return RoutingReport(request, np.array(solution.marginal_flow), table, frozenset(best), diagnostics)


def temperature_sweep(request: RoutingRequest, **kwargs) -> list:
    """One Boltzmann-prior report per temperature (default ``100, 10, 1, 0.3, 0.1``).

    Each report's diagnostics carry the total-variation distances to the
    two limits: uniform on the minimum-length paths (``T -> 0``) and
    uniform on all feasible paths (``T -> inf``).
    """
    temps = request.temperatures or DEFAULT_SWEEP
    return [plan_route(request.at_temperature(T), **kwargs) for T in temps]


__all__ = [
    "DEFAULT_SWEEP",
    "RoutingReport",
    "RoutingRequest",
    "feasible_paths",
    "plan_route",
    "reachable_in",
    "shortest_paths",
    "temperature_sweep",
    "tv_distance",
]
