import csv
import json
import math

import numpy as np
import pytest

from bridgekit.cli import EXIT_COMPUTE, EXIT_INPUT, EXIT_OK, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_OK, err
    return json.loads(out)


@pytest.fixture
def files(tmp_path, rng):
    G = rng.uniform(0.1, 1.0, (4, 4))
    kernel = tmp_path / "kernel.txt"
    kernel.write_text("\n".join(" ".join(repr(float(v)) for v in row) for row in G) + "\n")
    zero = tmp_path / "zero.txt"
    zero.write_text("1 0\n1 1\n")
    cyc = tmp_path / "cycle.txt"
    cyc.write_text("1 2\n2 3\n3 1\n")
    k4 = tmp_path / "complete.txt"
    k4.write_text("\n".join(f"{i} {j}" for i in range(1, 5) for j in range(1, 5)) + "\n")
    fib = tmp_path / "fib.json"
    fib.write_text('{"nodes": 2, "edges": [[1, 2], [2, 1], [2, 2]]}')
    return {"kernel": kernel, "G": G, "zero": zero, "cycle": cyc, "complete": k4, "fib": fib, "dir": tmp_path}


class TestScale:
    def test_doubly_stochastic(self, capsys, files):
        r = report(capsys, "scale", files["kernel"], "uniform", "uniform")
        P = np.array(r["coupling"])
        assert np.allclose(P.sum(axis=0), 0.25, atol=1e-10)
        assert np.allclose(P.sum(axis=1), 0.25, atol=1e-10)
        assert r["diagnostics"]["iterations"] > 0
        assert r["solver"] == {"tol": 1e-12, "max_iter": 100000}
        # coupling = diag(phihat0) G diag(phi1)
        s = r["scalings"]
        assert np.allclose(np.array(s["phihat0"])[:, None] * files["G"] * np.array(s["phi1"])[None, :], P, rtol=1e-10)

    def test_zero_kernel_exit_3(self, capsys, files):
        code, _, err = run(capsys, "scale", files["zero"], "0.5,0.5", "0.5,0.5")
        assert code == EXIT_COMPUTE and "kernel must be strictly positive" in err

    def test_dimension_mismatch_exit_2(self, capsys, files):
        code, _, err = run(capsys, "scale", files["kernel"], "0.5,0.5", "uniform")
        assert code == EXIT_INPUT and "marginals" in err

    def test_missing_file_exit_2(self, capsys, files):
        code, _, _ = run(capsys, "scale", files["dir"] / "nope.txt", "uniform", "uniform")
        assert code == EXIT_INPUT

    def test_iteration_cap_exit_3(self, capsys, files):
        code, _, err = run(capsys, "scale", files["kernel"], "0.1,0.2,0.3,0.4", "uniform", "--max-iter", "1", "--tol", "1e-15")
        assert code == EXIT_COMPUTE and "no convergence" in err


class TestRoute:
    def test_ruelle_bowen_three_steps(self, capsys):
        r = report(capsys, "route", "fixture:nine-node", "--source", 1, "--sink", 9, "--horizon", 3, "--prior", "rb")
        flow = np.array(r["flow"])
        assert flow[1, 1:4] == pytest.approx([1 / 3] * 3, abs=1e-11)
        assert flow[2, 6:8] == pytest.approx([1 / 3, 2 / 3], abs=1e-11)
        assert r["most_probable"] == ["1-2-7-9", "1-3-8-9", "1-4-8-9"]
        assert r["diagnostics"]["tol"] == 1e-12 and r["diagnostics"]["iterations"] >= 1

    def test_boltzmann_four_steps_with_paths(self, capsys):
        code, out, err = run(capsys, "route", "fixture:nine-node", "--source", 1, "--sink", 9, "--horizon", 4,
                             "--prior", "boltzmann", "--temperature", 1, "--paths")
        assert code == EXIT_OK
        r = json.loads(out)
        assert np.array(r["flow"])[1, 1:4] == pytest.approx([0.4705, 0.3059, 0.2236], abs=5e-5)
        masses = [p["mass"] for p in r["paths"]]
        assert masses == pytest.approx([0.2236] * 3 + [0.0823] * 4, abs=5e-5)
        lines = [ln for ln in err.splitlines() if not ln.startswith("#")]
        assert len(lines) == 7 and lines[0].startswith("1-")

    def test_sweep_matches_three_matrices(self, capsys, files):
        out_csv = files["dir"] / "flow.csv"
        r = report(capsys, "route", "fixture:nine-node-l79", "--source", 1, "--sink", 9, "--horizon", 3,
                   "--sweep", "100,1,0.1", "--paths", "--csv", out_csv)
        want = {100.0: (0.3311, 0.3344, 0.3344), 1.0: (0.1554, 0.4223, 0.4223), 0.1: (0.0, 0.5, 0.5)}
        assert [s["temperature"] for s in r["sweep"]] == [100.0, 1.0, 0.1]
        for s in r["sweep"]:
            m = {p["path"]: p["mass"] for p in s["paths"]}
            got = [m.get(k, 0.0) for k in ("1-2-7-9", "1-3-8-9", "1-4-8-9")]
            assert got == pytest.approx(want[s["temperature"]], abs=5e-4)
        rows = list(csv.reader(open(out_csv)))
        assert rows[0] == ["temperature", "t"] + [str(i) for i in range(1, 10)]
        assert len(rows) == 1 + 3 * 4

    def test_infeasible_horizon_exit_3(self, capsys):
        code, _, err = run(capsys, "route", "fixture:nine-node", "--source", 1, "--sink", 9, "--horizon", 2)
        assert code == EXIT_COMPUTE and "not reachable" in err

    def test_bad_node_exit_2(self, capsys):
        code, _, _ = run(capsys, "route", "fixture:nine-node", "--source", 1, "--sink", 10, "--horizon", 3)
        assert code == EXIT_INPUT

    def test_bad_choice_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["route", "fixture:nine-node", "--source", "1", "--sink", "9", "--horizon", "3", "--prior", "x"])
        assert info.value.code == EXIT_INPUT

    def test_chain_route_on_reducible_graph(self, capsys):
        code, _, err = run(capsys, "route", "fixture:nine-node", "--source", 1, "--sink", 9, "--horizon", 3,
                           "--prior", "rb", "--route", "chain")
        assert code == EXIT_COMPUTE and "not primitive" in err

    def test_deterministic_bytes(self, capsys, files):
        argv = ["route", "fixture:nine-node", "--source", 1, "--sink", 9, "--horizon", 4, "--paths"]
        a = files["dir"] / "a.json"
        b = files["dir"] / "b.json"
        run(capsys, *argv, "--out", a)
        run(capsys, *argv, "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_figure(self, capsys, files):
        png = files["dir"] / "flow.png"
        report(capsys, "route", "fixture:nine-node", "--source", 1, "--sink", 9, "--horizon", 3, "--prior", "rb",
               "--figure", png)
        assert png.read_bytes()[:4] == b"\x89PNG"


class TestBridge:
    def test_delta_marginals_match_route(self, capsys):
        b = report(capsys, "bridge", "fixture:nine-node", "delta:1", "delta:9", "--horizon", 4, "--paths")
        r = report(capsys, "route", "fixture:nine-node", "--source", 1, "--sink", 9, "--horizon", 4, "--paths")
        assert np.allclose(b["flow"], r["flow"], atol=1e-12)
        assert [p["path"] for p in b["paths"]] == [p["path"] for p in r["paths"]]

    def test_positive_marginals_on_kernel(self, capsys, files, rng):
        nu0 = ",".join(repr(v) for v in [0.1, 0.2, 0.3, 0.4])
        r = report(capsys, "bridge", "uniform", nu0, "--kernel", files["kernel"], "--horizon", 3)
        flow = np.array(r["flow"])
        assert np.allclose(flow[0], 0.25, atol=1e-9) and np.allclose(flow[-1], [0.1, 0.2, 0.3, 0.4], atol=1e-9)
        assert r["diagnostics"]["marginal_residual"] < 1e-9
        for t, P in enumerate(r["transitions"]):
            P = np.array(P)
            assert np.allclose(P.sum(axis=1), 1.0, atol=1e-10)
            assert np.allclose(flow[t] @ P, flow[t + 1], atol=1e-10)

    def test_infeasible_names_entry(self, capsys):
        code, _, err = run(capsys, "bridge", "fixture:nine-node", "delta:1", "delta:9", "--horizon", 2)
        assert code == EXIT_COMPUTE and "(1, 9)" in err

    def test_needs_prior(self, capsys):
        code, _, _ = run(capsys, "bridge", "delta:1", "delta:2", "--horizon", 2)
        assert code == EXIT_INPUT


class TestInterp:
    def test_cost_curve_csv(self, capsys, files):
        out = files["dir"] / "cost.csv"
        r = report(capsys, "interp", "gaussian:-1,0.04", "gaussian:1,0.04", "--eps-sweep", "1,0.1,0.01",
                   "--grid=-3,3,200", "--csv", out)
        costs = r["cost_curve"]["transport_cost"]
        assert costs[0] > costs[1] > costs[2] > r["cost_curve"]["monotone_rearrangement_cost"]
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["epsilon", "transport_cost"] and len(rows) == 4

    def test_identical_marginals(self, capsys, files):
        out = files["dir"] / "rho.csv"
        r = report(capsys, "interp", "gaussian:0,0.1", "gaussian:0,0.1", "--epsilon", "0.01", "--times", "0,0.5,1",
                   "--csv", out)
        block = r["interpolation"]
        assert np.allclose(block["mean"], 0.0, atol=1e-10)
        assert np.allclose(block["mass"], 1.0, atol=1e-8)
        assert block["variance"][1] == pytest.approx(0.1, rel=0.05)
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["t", "x", "rho"] and len(rows) == 1 + 3 * 200

    def test_malformed_density_exit_2(self, capsys, files):
        bad = files["dir"] / "bad.txt"
        bad.write_text("0 1 2\n")
        code, _, _ = run(capsys, "interp", bad, "gaussian:0,1", "--epsilon", "0.1", "--grid=-3,3,50")
        assert code == EXIT_INPUT

    def test_grid_needed_for_files(self, capsys, files):
        f = files["dir"] / "d.txt"
        f.write_text("-1 0\n0 1\n1 0\n")
        code, _, err = run(capsys, "interp", f, "gaussian:0,1", "--epsilon", "0.1")
        assert code == EXIT_INPUT and "--grid" in err

    def test_needs_epsilon(self, capsys):
        code, _, _ = run(capsys, "interp", "gaussian:0,1", "gaussian:1,1")
        assert code == EXIT_INPUT

    def test_figures(self, capsys, files):
        a, b = files["dir"] / "i.svg", files["dir"] / "c.pdf"
        report(capsys, "interp", "gaussian:-1,0.1", "gaussian:1,0.1", "--epsilon", "0.1", "--figure", a)
        report(capsys, "interp", "gaussian:-1,0.1", "gaussian:1,0.1", "--eps-sweep", "1,0.1", "--figure", b)
        assert b"<svg" in a.read_bytes() and b.read_bytes()[:4] == b"%PDF"


class TestSpectral:
    def test_complete_graph(self, capsys, files):
        r = report(capsys, "spectral", files["complete"])
        assert r["adjacency"]["topological_entropy"] == pytest.approx(math.log(4), abs=1e-11)

    def test_fibonacci(self, capsys, files):
        r = report(capsys, "spectral", files["fib"], "--temperature", "2")
        assert round(r["adjacency"]["spectral_radius"], 10) == 1.6180339887
        b = r["boltzmann"]
        assert b["free_energy_rate"] == pytest.approx(-b["log_spectral_radius"], abs=1e-11)

    def test_cycle_exit_3(self, capsys, files):
        code, _, err = run(capsys, "spectral", files["cycle"])
        assert code == EXIT_COMPUTE and "not primitive" in err


def test_thread_variable_checked(capsys, monkeypatch):
    monkeypatch.setenv("BRIDGEKIT_THREADS", "zero")
    code, _, err = run(capsys, "spectral", "fixture:nine-node")
    assert code == EXIT_INPUT and "BRIDGEKIT_THREADS" in err
