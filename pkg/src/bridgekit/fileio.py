"""Readers for graph, vector, matrix and density inputs; writers for reports.

Graph text format, one edge per line::

    nodes 9          # optional; otherwise the largest label
    1 2              # src dst, length defaults to 1
    9 9 0            # src dst length

Labels are 1-based.  ``#`` starts a comment.  A JSON document
``{"nodes": 9, "edges": [[1, 2], [9, 9, 0], ...]}`` is also accepted;
``nodes`` may instead be a list of label strings.
"""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .core import WeightedDigraph
from .errors import DimensionMismatch, InputError, ParseError
from .grid1d import Grid, GridDensity, gaussian

SIG_DIGITS = 12

FIXTURES = {
    "nine-node": "nine_node.txt",
    "nine-node-l79": "nine_node_l79.txt",
}


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _number(tok: str, lineno: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"cannot parse {what} {tok!r}", line=lineno) from None
    if math.isnan(v):
        raise ParseError(f"{what} is NaN", line=lineno)
    return v


def _label(tok: str, lineno: int) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise ParseError(f"node label {tok!r} is not an integer", line=lineno) from None
    if v < 1:
        raise ParseError(f"node labels are 1-based, got {v}", line=lineno)
    return v


def _build_graph(n, edges, labels=None, where=lambda k: None) -> WeightedDigraph:
    seen = {}
    for k, (s, d, _) in enumerate(edges):
        if (s, d) in seen:
            raise ParseError(f"duplicate edge {s} -> {d}", line=where(k))
        seen[(s, d)] = k
        if s > n or d > n:
            raise ParseError(f"edge {s} -> {d} exceeds node count {n}", line=where(k))
    try:
        return WeightedDigraph.from_edges(n, [(s - 1, d - 1, l) for s, d, l in edges], labels)
    except InputError as exc:
        raise ParseError(str(exc)) from exc


def parse_graph_text(text: str) -> WeightedDigraph:
    n = None
    edges, lines = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        toks = line.replace(",", " ").split()
        if toks[0].lower() == "nodes":
            if len(toks) != 2:
                raise ParseError(f"expected 'nodes <count>'", line=lineno)
            n = _label(toks[1], lineno)
            continue
        if len(toks) not in (2, 3):
            raise ParseError(f"expected 'src dst [length]', got {len(toks)} fields", line=lineno)
        s, d = _label(toks[0], lineno), _label(toks[1], lineno)
        length = _number(toks[2], lineno, "length") if len(toks) == 3 else 1.0
        if length < 0 or not math.isfinite(length):
            raise ParseError(f"length must be finite and nonnegative", line=lineno)
        edges.append((s, d, length))
        lines.append(lineno)
    if not edges:
        raise ParseError("graph file has no edges")
    if n is None:
        n = max(max(s, d) for s, d, _ in edges)
    return _build_graph(n, edges, where=lambda k: lines[k])


def parse_graph_json(text: str) -> WeightedDigraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", line=exc.lineno) from None
    if not isinstance(doc, dict) or "edges" not in doc:
        raise ParseError("JSON graph needs an 'edges' list")
    labels = None
    nodes = doc.get("nodes")
    if isinstance(nodes, list):
        labels = [str(v) for v in nodes]
        nodes = len(labels)
    edges = []
    for k, e in enumerate(doc["edges"]):
        if not isinstance(e, (list, tuple)) or len(e) not in (2, 3):
            raise ParseError(f"edge #{k + 1}: expected [src, dst] or [src, dst, length]")
        s, d = _label(str(e[0]), k + 1), _label(str(e[1]), k + 1)
        length = float(e[2]) if len(e) == 3 else 1.0
        if length < 0 or not math.isfinite(length):
            raise ParseError(f"edge #{k + 1}: length must be finite and nonnegative")
        edges.append((s, d, length))
    if not edges:
        raise ParseError("graph document has no edges")
    n = int(nodes) if nodes is not None else max(max(s, d) for s, d, _ in edges)
    return _build_graph(n, edges, labels)


def fixture_text(name: str) -> str:
    if name not in FIXTURES:
        raise InputError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    return resources.files("bridgekit").joinpath("data").joinpath(FIXTURES[name]).read_text()


def load_fixture(name: str = "nine-node") -> WeightedDigraph:
    """The bundled nine-node network (``"nine-node"``) or its variant with
    edge 7 -> 9 of length 2 (``"nine-node-l79"``)."""
    return parse_graph_text(fixture_text(name))


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def load_graph(path_or_fixture: str) -> WeightedDigraph:
    """Read a graph file; ``fixture:<name>`` selects a bundled graph."""
    s = str(path_or_fixture)
    if s.startswith("fixture:"):
        return load_fixture(s.split(":", 1)[1])
    text = _read(s)
    if s.endswith(".json") or text.lstrip().startswith("{"):
        return parse_graph_json(text)
    return parse_graph_text(text)


def parse_matrix_text(text: str) -> np.ndarray:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        rows.append(([_number(t, lineno, "entry") for t in line.replace(",", " ").split()], lineno))
    if not rows:
        raise ParseError("no numeric rows found")
    width = len(rows[0][0])
    for r, lineno in rows:
        if len(r) != width:
            raise ParseError(f"expected {width} entries, got {len(r)}", line=lineno)
    return np.array([r for r, _ in rows], dtype=float)


def parse_vector_text(text: str) -> np.ndarray:
    """A vector written on one line, one entry per line, or a mix."""
    vals = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if line:
            vals.extend(_number(t, lineno, "entry") for t in line.replace(",", " ").split())
    if not vals:
        raise ParseError("no numbers found")
    return np.array(vals, dtype=float)


def load_matrix(path) -> np.ndarray:
    return parse_matrix_text(_read(path))


def load_vector(path) -> np.ndarray:
    return parse_vector_text(_read(path))


def vector_argument(spec: str, n: int | None = None) -> np.ndarray:
    """A vector from a file path, an inline list ``"0.2,0.8"``, ``uniform``
    or a point mass ``delta:<label>`` (1-based; needs ``n``)."""
    if spec == "uniform":
        if n is None:
            raise InputError("'uniform' needs a known dimension")
        return np.full(n, 1.0 / n)
    if spec.startswith("delta:"):
        if n is None:
            raise InputError("'delta:' needs a known dimension")
        k = int(spec.split(":", 1)[1])
        if not 1 <= k <= n:
            raise InputError(f"delta index {k} outside 1..{n}")
        v = np.zeros(n)
        v[k - 1] = 1.0
        return v
    if Path(spec).exists():
        return load_vector(spec)
    try:
        return np.array([float(t) for t in spec.split(",")])
    except ValueError:
        raise InputError(f"cannot read vector {spec!r}: not a file, list or keyword") from None


def parse_grid(spec: str) -> Grid:
    parts = spec.split(",")
    if len(parts) != 3:
        raise InputError(f"grid spec must be 'a,b,m', got {spec!r}")
    try:
        a, b, m = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"grid spec must be 'a,b,m', got {spec!r}") from None
    return Grid(a, b, m)


def parse_float_list(spec: str) -> list:
    try:
        return [float(t) for t in spec.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {spec!r}") from None


def density_argument(spec: str, grid: Grid) -> GridDensity:
    """``gaussian:mean,var`` or a two-column ``x value`` file, linearly
    interpolated onto ``grid`` (zero outside the file's range)."""
    if spec.startswith("gaussian:"):
        vals = parse_float_list(spec.split(":", 1)[1])
        if len(vals) != 2:
            raise InputError(f"gaussian preset needs 'mean,var', got {spec!r}")
        return gaussian(grid, vals[0], vals[1])
    table = parse_matrix_text(_read(spec))
    if table.shape[1] != 2:
        raise ParseError(f"{spec}: density file needs two columns (x, value), got {table.shape[1]}")
    x, v = table[:, 0], table[:, 1]
    if np.any(np.diff(x) <= 0):
        raise ParseError(f"{spec}: abscissae must be strictly increasing")
    if np.any(v < 0):
        raise ParseError(f"{spec}: density values must be nonnegative")
    return GridDensity.from_values(grid, np.interp(grid.points, x, v, left=0.0, right=0.0))


# -- output ----------------------------------------------------------------


def fmt(x: float) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def _round(obj):
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(fmt(x)) if math.isfinite(x) else x
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def dumps_report(report: dict) -> str:
    """JSON text with every float rounded to 12 significant digits."""
    return json.dumps(_round(report), indent=2) + "\n"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def check_square(M: np.ndarray, what: str) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{what} must be square, got shape {M.shape}")


__all__ = [
    "FIXTURES",
    "density_argument",
    "dumps_report",
    "fixture_text",
    "fmt",
    "load_fixture",
    "load_graph",
    "load_matrix",
    "load_vector",
    "parse_float_list",
    "parse_graph_json",
    "parse_graph_text",
    "parse_grid",
    "parse_matrix_text",
    "parse_vector_text",
    "vector_argument",
    "write_csv",
]
