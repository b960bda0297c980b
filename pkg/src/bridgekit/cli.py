"""``bridgekit`` command line.

Every subcommand writes a JSON report (stdout, or ``--out``) whose floats
carry 12 significant digits, and optionally a CSV table (``--csv``) and a
figure (``--figure``).  Exit status: 0 on success, 2 for bad input, 3 when
a computation fails (infeasible support, no convergence, not primitive).

BLAS threads are capped by ``BRIDGEKIT_THREADS`` (default 1) so reports
are byte-reproducible.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .core import Kernel, PathMeasure, adjacency_kernel, boltzmann_kernel, format_path, validate_distribution
from .dynamic_bridge import BridgeProblem, path_mass_table, solve_bridge
from .errors import ComputationError, InputError
from .fileio import (
    check_square,
    density_argument,
    dumps_report,
    load_graph,
    load_matrix,
    parse_float_list,
    parse_grid,
    vector_argument,
    write_csv,
)
from .grid1d import (
    GAUSSIAN_SUPPORT_SIGMAS,
    DEFAULT_TIMES,
    bridge_marginal_error,
    entropic_cost_curve,
    grid_for_supports,
    marginal_at,
    solve_grid_bridge,
)
from .hilbert import contraction_ratio
from .oracle import quantile_coupling_oracle
from .routing import RoutingRequest, plan_route, temperature_sweep
from .scaling import DEFAULT_MAX_ITER, DEFAULT_TOL, ScalingProblem, coupling_matrix, solve_schrodinger_system
from .spectral import (
    eigen_residuals,
    entropy_rate,
    free_energy_rate,
    length_rate,
    ruelle_bowen_chain,
    weighted_pressure_chain,
)

THREADS_ENV = "BRIDGEKIT_THREADS"
EXIT_OK, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3


def _solver_args(p):
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="Hilbert-metric stopping tolerance")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)


def _output_args(p, csv_help):
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help=csv_help)
    p.add_argument("--figure", help="render a figure to this file (.png, .pdf, .svg)")


def _emit(args, report):
    text = dumps_report(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _solver_echo(args):
    return {"tol": args.tol, "max_iter": args.max_iter}


# -- scale -----------------------------------------------------------------


def cmd_scale(args):
    G = load_matrix(args.kernel)
    p = vector_argument(args.p, G.shape[0])
    q = vector_argument(args.q, G.shape[1])
    if p.size != G.shape[0] or q.size != G.shape[1]:
        raise InputError(f"kernel is {G.shape[0]}x{G.shape[1]} but marginals have {p.size} and {q.size} entries")
    if np.any(G < 0):
        raise InputError("kernel entries must be nonnegative")
    problem = ScalingProblem(G, p, q)
    sol = solve_schrodinger_system(problem, tol=args.tol, max_iter=args.max_iter)
    P = coupling_matrix(problem, sol)
    report = {
        "command": "scale",
        "problem": {"shape": list(G.shape), "p": problem.p.weights, "q": problem.q.weights},
        "solver": _solver_echo(args),
        "diagnostics": {
            "iterations": sol.iterations,
            "final_hilbert_step": sol.final_step,
            "kappa_bound": contraction_ratio(problem.G),
            "marginal_residual": sol.residual,
            "row_sum_error": float(np.max(np.abs(P.sum(axis=1) - problem.p.weights))),
            "col_sum_error": float(np.max(np.abs(P.sum(axis=0) - problem.q.weights))),
        },
        "scalings": {"phihat0": sol.phihat0, "phi1": sol.phi1},
        "potentials": {"phi0": sol.phi0, "phihat0": sol.phihat0, "phi1": sol.phi1, "phihat1": sol.phihat1},
        "coupling": P,
    }
    if args.csv:
        write_csv(args.csv, None, P.tolist())
    if args.figure:
        from .plotting import flow_heatmap

        flow_heatmap(P, args.figure, title="coupling")
    return report


# -- route -----------------------------------------------------------------


def _route_block(rep, with_paths):
    block = {"diagnostics": rep.diagnostics, "flow": rep.flow,
             "most_probable": sorted(format_path(p, rep.request.graph.nodes) for p in rep.most_probable)}
    if with_paths:
        block["paths"] = [{"path": s, "mass": m} for s, m in rep.path_table()]
    return block


def cmd_route(args):
    graph = load_graph(args.graph)
    temps = parse_float_list(args.sweep) if args.sweep else None
    request = RoutingRequest(graph, args.source - 1, args.sink - 1, args.horizon,
                             "boltzmann" if temps else args.prior, args.temperature, temps)
    kw = {"route": args.route, "tol": args.tol, "max_iter": args.max_iter}
    reports = temperature_sweep(request, **kw) if temps else [plan_route(request, **kw)]
    report = {
        "command": "route",
        "problem": {"graph": str(args.graph), "nodes": graph.n, "edges": len(graph.edges()),
                    "source": args.source, "sink": args.sink, "horizon": args.horizon,
                    "prior": request.prior, "temperatures": temps or
                    ([args.temperature] if request.prior == "boltzmann" else [])},
        "solver": _solver_echo(args),
    }
    if temps:
        report["sweep"] = [dict(temperature=r.request.temperature, **_route_block(r, args.paths)) for r in reports]
    else:
        report.update(_route_block(reports[0], args.paths))
    if args.paths:
        for r in reports:
            head = f"# T = {r.request.temperature:g}" if r.request.prior == "boltzmann" else "# Ruelle-Bowen prior"
            print(head, file=sys.stderr)
            for s, m in r.path_table():
                print(f"{s}\t{m:.12g}", file=sys.stderr)
    if args.csv:
        n = graph.n
        header = (["temperature"] if temps else []) + ["t"] + [graph.nodes.label(i) for i in range(n)]
        rows = []
        for r in reports:
            for t, row in enumerate(r.flow):
                rows.append(([r.request.temperature] if temps else []) + [t] + [float(v) for v in row])
        write_csv(args.csv, header, rows)
    if args.figure:
        from .plotting import flow_heatmap, sweep_plot

        if temps:
            sweep_plot(temps, [dict(r.path_table()) for r in reports], args.figure)
        else:
            labels = [graph.nodes.label(i) for i in range(graph.n)]
            flow_heatmap(reports[0].flow, args.figure, labels)
    return report


# -- bridge ----------------------------------------------------------------


def cmd_bridge(args):
    if args.kernel:
        M = load_matrix(args.kernel)
        check_square(M, "kernel")
        if np.any(M < 0):
            raise InputError("kernel entries must be nonnegative")
        K = Kernel.from_entries(M)
        labels = None
        source = f"kernel {args.kernel}"
    else:
        if not args.graph:
            raise InputError("give a graph file or --kernel")
        graph = load_graph(args.graph)
        K = adjacency_kernel(graph) if args.prior == "rb" else boltzmann_kernel(graph, args.temperature)
        labels = graph.nodes
        source = f"graph {args.graph}"
    n = K.n
    nu0 = validate_distribution(vector_argument(args.nu0, n))
    nuN = validate_distribution(vector_argument(args.nuN, n))
    if nu0.n != n or nuN.n != n:
        raise InputError(f"marginals must have {n} entries, got {nu0.n} and {nuN.n}")
    problem = BridgeProblem(PathMeasure.homogeneous(np.ones(n), K, args.horizon), nu0, nuN)
    sol = solve_bridge(problem, tol=args.tol, max_iter=args.max_iter)
    report = {
        "command": "bridge",
        "problem": {"prior": source, "prior_kind": "kernel" if args.kernel else args.prior,
                    "temperature": None if args.kernel or args.prior == "rb" else args.temperature,
                    "nodes": n, "horizon": args.horizon, "nu0": nu0.weights, "nuN": nuN.weights},
        "solver": _solver_echo(args),
        "diagnostics": {"iterations": sol.iterations, "final_hilbert_step": sol.final_step,
                        "kappa_bound": sol.kappa, "marginal_residual": sol.residual,
                        "flagged_rows": [[t, i + 1] for t, i in sol.flagged_rows]},
        "flow": sol.marginal_flow,
        "transitions": [P for P in sol.transitions],
        "potentials": {"phi": sol.potentials.phi, "phihat": sol.potentials.phi_hat},
    }
    if args.paths:
        report["paths"] = [{"path": format_path(p, labels), "mass": m}
                           for p, m in path_mass_table(problem, sol)]
    if args.csv:
        header = ["t"] + [labels.label(i) if labels else str(i + 1) for i in range(n)]
        write_csv(args.csv, header, [[t] + [float(v) for v in row] for t, row in enumerate(sol.marginal_flow)])
    if args.figure:
        from .plotting import flow_heatmap

        flow_heatmap(sol.marginal_flow, args.figure, [labels.label(i) for i in range(n)] if labels else None)
    return report


# -- interp ----------------------------------------------------------------


def _auto_grid(specs, eps_max, m):
    lo, hi = [], []
    for s in specs:
        if not s.startswith("gaussian:"):
            raise InputError("--grid is required unless both densities are gaussian presets")
        mean, var = parse_float_list(s.split(":", 1)[1])
        if not var > 0:
            raise InputError(f"variance must be positive, got {var}")
        w = GAUSSIAN_SUPPORT_SIGMAS * np.sqrt(var)
        lo.append(mean - w)
        hi.append(mean + w)
    return grid_for_supports(min(lo), max(hi), eps_max, m)


def cmd_interp(args):
    eps_list = parse_float_list(args.eps_sweep) if args.eps_sweep else []
    if args.epsilon is None and not eps_list:
        raise InputError("give --epsilon and/or --eps-sweep")
    eps_all = ([args.epsilon] if args.epsilon is not None else []) + eps_list
    grid = parse_grid(args.grid) if args.grid else _auto_grid([args.rho0, args.rho1], max(eps_all), 200)
    rho0 = density_argument(args.rho0, grid)
    rho1 = density_argument(args.rho1, grid)
    times = parse_float_list(args.times) if args.times else list(DEFAULT_TIMES)
    report = {
        "command": "interp",
        "problem": {"rho0": args.rho0, "rho1": args.rho1, "grid": [grid.a, grid.b, grid.m], "h": grid.h},
        "solver": _solver_echo(args),
    }
    x = grid.points
    if args.epsilon is not None:
        if any(not 0 <= t <= 1 for t in times):
            raise InputError("interpolation times must lie in [0, 1]")
        bridge = solve_grid_bridge(rho0, rho1, args.epsilon, tol=args.tol, max_iter=args.max_iter)
        dens = [marginal_at(bridge, t) for t in times]
        h = grid.h
        report["interpolation"] = {
            "epsilon": args.epsilon,
            "diagnostics": {"iterations": bridge.iterations, "final_hilbert_step": bridge.final_step,
                            "marginal_residual": bridge.residual,
                            "endpoint_density_error": bridge_marginal_error(bridge)},
            "times": times,
            "mass": [float(d.sum() * h) for d in dens],
            "mean": [float(d @ x * h) for d in dens],
            "variance": [float(d @ (x - d @ x * h) ** 2 * h) for d in dens],
        }
    if eps_list:
        curve = entropic_cost_curve(rho0, rho1, eps_list, tol=args.tol, max_iter=args.max_iter)
        _, w2 = quantile_coupling_oracle(x, rho0.weights, x, rho1.weights)
        report["cost_curve"] = {"epsilons": [e for e, _ in curve], "transport_cost": [c for _, c in curve],
                                "monotone_rearrangement_cost": w2}
    if args.csv:
        if eps_list:
            write_csv(args.csv, ["epsilon", "transport_cost"], [[e, c] for e, c in curve])
        else:
            write_csv(args.csv, ["t", "x", "rho"], [[t, float(xi), float(v)] for t, d in zip(times, dens) for xi, v in zip(x, d)])
    if args.figure:
        from .plotting import cost_curve_plot, interpolation_plot

        if eps_list:
            cost_curve_plot([e for e, _ in curve], [c for _, c in curve], args.figure, reference=w2)
        else:
            interpolation_plot(x, times, dens, args.figure)
    return report


# -- spectral --------------------------------------------------------------


def cmd_spectral(args):
    graph = load_graph(args.graph)
    A = graph.adjacency
    data, chain = ruelle_bowen_chain(A)
    report = {
        "command": "spectral",
        "problem": {"graph": str(args.graph), "nodes": graph.n, "edges": len(graph.edges()),
                    "temperature": args.temperature},
        "solver": {"power_tol": 1e-14},
        "adjacency": {
            "spectral_radius": data.lam,
            "topological_entropy": data.log_lam,
            "primitivity_exponent": data.primitivity_exponent,
            "iterations": data.iterations,
            "eigen_residuals": list(eigen_residuals(A, data)),
            "right_eigenvector": data.right,
            "left_eigenvector": data.left,
            "ruelle_bowen_transition": chain.transition,
            "stationary": chain.stationary.weights,
            "entropy_rate": entropy_rate(chain),
        },
    }
    if args.temperature is not None:
        T = args.temperature
        bdata, bchain = weighted_pressure_chain(graph, T)
        report["boltzmann"] = {
            "temperature": T,
            "spectral_radius": bdata.lam,
            "log_spectral_radius": bdata.log_lam,
            "iterations": bdata.iterations,
            "transition": bchain.transition,
            "stationary": bchain.stationary.weights,
            "entropy_rate": entropy_rate(bchain),
            "length_rate": length_rate(bchain, graph.lengths),
            "free_energy_rate": free_energy_rate(bchain, graph, T),
        }
    if args.csv:
        write_csv(args.csv, ["node", "right", "left", "stationary"],
                  [[graph.nodes.label(i), float(data.right[i]), float(data.left[i]), float(chain.stationary.weights[i])]
                   for i in range(graph.n)])
    if args.figure:
        from .plotting import flow_heatmap

        flow_heatmap(chain.transition, args.figure, [graph.nodes.label(i) for i in range(graph.n)],
                     title="maximal-entropy transition matrix")
    return report


# -- driver ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bridgekit", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scale", help="Sinkhorn scaling of a positive kernel to two marginals")
    p.add_argument("kernel", help="matrix file, one row per line")
    p.add_argument("p", help="row marginal: file, comma list, or 'uniform'")
    p.add_argument("q", help="column marginal: file, comma list, or 'uniform'")
    _solver_args(p)
    _output_args(p, "write the coupling matrix as CSV")
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("route", help="maximal-entropy routing between two nodes")
    p.add_argument("graph", help="graph file, or fixture:nine-node / fixture:nine-node-l79")
    p.add_argument("--source", type=int, required=True, help="1-based source node")
    p.add_argument("--sink", type=int, required=True, help="1-based sink node")
    p.add_argument("--horizon", type=int, required=True, help="number of steps N")
    p.add_argument("--prior", choices=["rb", "boltzmann"], default="boltzmann")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--sweep", help="comma-separated temperatures (implies --prior boltzmann)")
    p.add_argument("--paths", action="store_true", help="include the ranked path table")
    p.add_argument("--route", choices=["direct", "chain"], default="direct",
                   help="bridge over the raw kernel (default) or over its Perron chain")
    _solver_args(p)
    _output_args(p, "write flow rows (one per time step) as CSV")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("bridge", help="multi-step bridge between two marginals")
    p.add_argument("graph", nargs="?", help="graph file (omit with --kernel)")
    p.add_argument("nu0", help="initial marginal: file, comma list, uniform, delta:<node>")
    p.add_argument("nuN", help="final marginal: file, comma list, uniform, delta:<node>")
    p.add_argument("--kernel", help="one-step prior weight matrix instead of a graph")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--prior", choices=["rb", "boltzmann"], default="boltzmann")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--paths", action="store_true")
    _solver_args(p)
    _output_args(p, "write flow rows as CSV")
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("interp", help="entropic interpolation between 1-D densities")
    p.add_argument("rho0", help="'gaussian:mean,var' or a two-column file")
    p.add_argument("rho1", help="'gaussian:mean,var' or a two-column file")
    p.add_argument("--epsilon", type=float, help="diffusion coefficient of the prior")
    p.add_argument("--eps-sweep", help="comma-separated decreasing epsilons for the cost curve")
    p.add_argument("--grid", help="a,b,m; write --grid=-3,3,200 when a is negative (default: fitted to gaussian presets, m = 200)")
    p.add_argument("--times", help="comma-separated times in [0, 1] (default 11 points)")
    _solver_args(p)
    _output_args(p, "write (t, x, rho) rows, or (epsilon, cost) rows with --eps-sweep")
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("spectral", help="Perron data, entropy and pressure of a graph")
    p.add_argument("graph")
    p.add_argument("--temperature", type=float, help="also analyse B(T) = exp(-l / T)")
    _output_args(p, "write eigenvectors and stationary law as CSV")
    p.set_defaults(func=cmd_spectral)
    return ap


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with threadpool_limits(limits=_threads()):
            report = args.func(args)
        _emit(args, report)
    except InputError as exc:
        print(f"bridgekit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"bridgekit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ComputationError as exc:
        print(f"bridgekit: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
