"""Command-line entry points: ``generate``, ``discover``, ``oracle``, ``eval``.

Exit codes: 0 success, 1 input error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .graphs import GraphInputError, evaluate
from .io import ParseError, read_dataset, read_graphs, write_dataset, write_graph
from .oracle import MODES, coverage_grid, coverage_tail, run_suite
from .pipeline import run_discovery
from .scm import generate_dataset

log = logging.getLogger("contrastcd")

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2


def _load_cfg(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.paths.out = args.out
    return cfg


def _out_dir(cfg) -> Path:
    out = Path(cfg.paths.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def metrics_table(reports, names=None) -> list[str]:
    """Per-graph metric lines followed by ``mean +- std`` over graphs."""
    lines = []
    for t, rep in enumerate(reports):
        name = names[t] if names else str(t)
        lines.append(f"graph={name} {rep.line()}")
    if reports:
        cols = {k: np.array([getattr(r, k) for r in reports], float) for k in ("shd", "f1", "precision", "recall")}
        parts = [f"{k}={v.mean():.4g}+-{v.std():.4g}" for k, v in cols.items()]
        lines.append(f"mean graphs={len(reports)} " + " ".join(parts))
    return lines


def cmd_generate(cfg: cfgmod.RunConfig) -> int:
    dc = cfg.data
    if dc.count <= 0:
        return EXIT_OK
    out = _out_dir(cfg)
    for g in range(dc.count):
        rng = cfgmod.derive_rng(cfg.seed, "data", g)
        ds, _ = generate_dataset(dc.nodes, dc.edges, dc.family, dc.samples, rng, dc.p_interv)
        write_dataset(out / f"graph_{g:03d}.data", ds)
        write_graph(out / f"graph_{g:03d}.truth", ds.truth_dag)
        if ds.meta.get("clamped"):
            log.warning("graph %d: %d values clamped", g, ds.meta["clamped"])
    print(f"wrote {dc.count} datasets to {out}")
    return EXIT_OK


def cmd_discover(cfg: cfgmod.RunConfig, paths) -> int:
    out = _out_dir(cfg)
    reports, names = [], []
    for p in paths:
        p = Path(p)
        ds = read_dataset(p)
        run = run_discovery(ds, cfg)
        for w in run.warnings:
            print(f"warning: {p.name}: {w}", file=sys.stderr)
        write_graph(out / f"{p.stem}.graph", run.h_ctr)
        (out / f"{p.stem}.ledger").write_text("".join(l + "\n" for l in run.ledger_lines()))
        if ds.truth_dag is not None:
            rep = evaluate(run.h_ctr, ds.truth_dag)
            reports.append(rep)
            names.append(p.stem)
            print(f"graph={p.stem} {rep.line()}")
    if len(reports) > 1:
        print(metrics_table(reports, names)[-1])
    if reports:
        (out / "metrics.txt").write_text("\n".join(metrics_table(reports, names)) + "\n")
    return EXIT_OK


def cmd_eval(pred_path, truth_path) -> int:
    preds = read_graphs(pred_path)
    truths = read_graphs(truth_path)
    if len(preds) != len(truths):
        raise GraphInputError(f"{len(preds)} predicted graphs but {len(truths)} truth graphs")
    reports = []
    for t, (p, q) in enumerate(zip(preds, truths)):
        if p.n != q.n:
            raise GraphInputError(f"graph {t}: node counts differ ({p.n} vs {q.n})")
        reports.append(evaluate(p, q))
    for line in metrics_table(reports):
        print(line)
    return EXIT_OK


def coverage_report(valid_only: bool = False) -> tuple[int, int, list[str]]:
    points = violations = 0
    examples = []
    for T, pi, r in coverage_grid():
        if valid_only and r / T > pi:
            continue
        exact, bound = coverage_tail(T, pi, r)
        points += 1
        if exact > bound:
            violations += 1
            if len(examples) < 5:
                examples.append(f"T={T} pi={pi} r={r} exact={exact:.4g} bound={bound:.4g}")
    return points, violations, examples


def cmd_oracle(cfg: cfgmod.RunConfig, modes, coverage: bool = True) -> int:
    n = cfg.oracle.n
    out = _out_dir(cfg)
    ok = True
    for mode in modes:
        summ = run_suite(n, mode, keep_lines=True, max_len=cfg.oracle.max_len)
        (out / f"oracle_{mode}_n{n}.txt").write_text("\n".join(summ.lines) + "\n")
        for line in summ.table():
            print(line)
        checks = {
            "rule_soundness": summ.violations == 0,
            "monotone_enrichment": summ.enrichment_fail == 0,
            "separation": summ.separation_fail == 0,
            "ctr_soundness": summ.ctr_unsound == 0,
        }
        for name, passed in checks.items():
            print(f"{'PASS' if passed else 'FAIL'} {name} mode={mode} n={n}")
        ok &= all(checks.values())
    if coverage:
        points, bad, examples = coverage_report()
        print(f"{'PASS' if not bad else 'FAIL'} coverage_tail points={points} violations={bad}")
        for e in examples:
            print(f"  {e}")
        vp, vbad, _ = coverage_report(valid_only=True)
        print(f"{'PASS' if not vbad else 'FAIL'} coverage_tail_r_le_T_pi points={vp} violations={vbad}")
        ok &= not bad and not vbad
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="contrastcd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write synthetic two-regime datasets")
    d = sub.add_parser("discover", parents=[common], help="run the rule-based pipeline on datasets")
    d.add_argument("datasets", nargs="+")
    o = sub.add_parser("oracle", parents=[common], help="exhaustive small-graph verification")
    o.add_argument("--mode", choices=MODES, help="discovery mode (default: both)")
    o.add_argument("--n", type=int, help="node count (default from config)")
    o.add_argument("--no-coverage", action="store_true", help="skip the coverage-tail sweep")
    e = sub.add_parser("eval", parents=[common], help="compare predicted and true graph files")
    e.add_argument("pred")
    e.add_argument("truth")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_cfg(args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "discover":
            return cmd_discover(cfg, args.datasets)
        if args.command == "oracle":
            if args.n is not None:
                cfg.oracle.n = args.n
            modes = [args.mode] if args.mode else list(MODES)
            return cmd_oracle(cfg, modes, coverage=not args.no_coverage)
        if args.command == "eval":
            return cmd_eval(args.pred, args.truth)
    except (ParseError, GraphInputError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
