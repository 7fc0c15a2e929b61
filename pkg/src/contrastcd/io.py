"""Text formats for datasets, graphs, evidence ledgers and configs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .graphs import Dag, GraphInputError, Pdag
from .scm import TwoRegimeDataset


class ParseError(ValueError):
    """Malformed input file; ``lineno`` is 1-based."""

    def __init__(self, path, lineno: int, msg: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


def _fmt(x: float) -> str:
    return "%.17g" % x


def format_dataset(ds: TwoRegimeDataset, with_truth: bool = True) -> str:
    m0, m1 = len(ds.samples0), len(ds.samples1)
    lines = [f"nodes={ds.n_vars} samples0={m0} samples1={m1}"]
    for c, X in ((0, ds.samples0), (1, ds.samples1)):
        for row in X:
            lines.append(",".join([str(c)] + [_fmt(v) for v in row]))
    if with_truth and ds.truth_dag is not None:
        for a, b in sorted(ds.truth_dag.edges):
            lines.append(f"# edge {a} {b}")
        for t in sorted(ds.truth_targets or ()):
            lines.append(f"# target {t}")
    return "\n".join(lines) + "\n"


def write_dataset(path, ds: TwoRegimeDataset, with_truth: bool = True) -> None:
    Path(path).write_text(format_dataset(ds, with_truth))


def read_dataset(path) -> TwoRegimeDataset:
    text = Path(path).read_text()
    return parse_dataset(text, path)


def parse_dataset(text: str, path="<string>") -> TwoRegimeDataset:
    lines = text.splitlines()
    if not lines:
        raise ParseError(path, 1, "empty dataset file")
    header = {}
    for tok in lines[0].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ParseError(path, 1, f"bad header token {tok!r}")
        header[key] = val
    try:
        n = int(header["nodes"])
        m0 = int(header["samples0"])
        m1 = int(header["samples1"])
    except (KeyError, ValueError):
        raise ParseError(path, 1, "header must be 'nodes=<n> samples0=<m0> samples1=<m1>'")
    rows = {0: [], 1: []}
    edges, targets = [], []
    has_truth = False
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            try:
                if parts[0] == "edge" and len(parts) == 3:
                    edges.append((int(parts[1]), int(parts[2])))
                    has_truth = True
                elif parts[0] == "target" and len(parts) == 2:
                    targets.append(int(parts[1]))
                    has_truth = True
            except ValueError:
                raise ParseError(path, lineno, f"bad truth footer {line!r}")
            continue
        fields = line.split(",")
        if len(fields) != n + 1:
            raise ParseError(path, lineno, f"expected {n + 1} fields, got {len(fields)}")
        try:
            c = int(fields[0])
            vals = [float(v) for v in fields[1:]]
        except ValueError:
            raise ParseError(path, lineno, "non-numeric field")
        if c not in rows:
            raise ParseError(path, lineno, f"regime label must be 0 or 1, got {c}")
        if not np.isfinite(vals).all():
            raise ParseError(path, lineno, "non-finite value")
        rows[c].append(vals)
    if len(rows[0]) != m0 or len(rows[1]) != m1:
        raise ParseError(path, 1, f"row counts {len(rows[0])}/{len(rows[1])} disagree with header")
    X0 = np.array(rows[0], dtype=float).reshape(m0, n)
    X1 = np.array(rows[1], dtype=float).reshape(m1, n)
    dag = tg = None
    if has_truth:
        try:
            dag = Dag(n, frozenset(edges))
        except GraphInputError as e:
            raise ParseError(path, 1, f"invalid truth graph: {e}")
        tg = frozenset(targets)
    return TwoRegimeDataset(X0, X1, dag, tg)


def format_graph(g: Dag | Pdag) -> str:
    lines = [f"n={g.n}"]
    directed = g.edges if isinstance(g, Dag) else g.directed
    lines += [f"{a} -> {b}" for a, b in sorted(directed)]
    if isinstance(g, Pdag):
        lines += [f"{a} -- {b}" for a, b in sorted(g.undirected)]
    return "\n".join(lines) + "\n"


def write_graph(path, g) -> None:
    Path(path).write_text(format_graph(g))


def parse_graph(text: str, path="<string>", first_line: int = 1) -> Pdag:
    """Parse one graph block; ``first_line`` offsets reported line numbers."""
    lines = [l.strip() for l in text.splitlines()]
    if not lines or not lines[0].startswith("n="):
        raise ParseError(path, first_line, "graph file must start with 'n=<n>'")
    try:
        n = int(lines[0][2:])
    except ValueError:
        raise ParseError(path, first_line, "bad node count")
    directed, undirected = [], []
    for lineno, line in enumerate(lines[1:], start=first_line + 1):
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3 or parts[1] not in ("->", "--"):
            raise ParseError(path, lineno, f"bad edge line {line!r}")
        try:
            a, b = int(parts[0]), int(parts[2])
        except ValueError:
            raise ParseError(path, lineno, "non-integer node")
        (directed if parts[1] == "->" else undirected).append((a, b))
    try:
        return Pdag(n, frozenset(directed), frozenset(undirected))
    except GraphInputError as e:
        raise ParseError(path, first_line, str(e))


def read_graph(path) -> Pdag:
    return parse_graph(Path(path).read_text(), path)


def read_graphs(path) -> list[Pdag]:
    """A file may hold several graphs, each starting with an ``n=`` line."""
    text = Path(path).read_text()
    blocks, cur, start = [], [], 1
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith("n=") or not cur:
            if cur:
                blocks.append((start, cur))
            if not line.strip():
                continue
            cur, start = [], lineno
        cur.append(line)
    if cur:
        blocks.append((start, cur))
    return [parse_graph("\n".join(b), path, s) for s, b in blocks]


def pdag_as_dag(p: Pdag) -> Dag:
    if p.undirected:
        raise GraphInputError("truth graph must be fully directed")
    return Dag(p.n, p.directed)
