"""Command line entry point: ``hgdas {run,gradcheck,heatmap,gen}``.

Exit codes: 0 success, 1 failed validation (invalid config values,
gradient check out of tolerance, inconsistent traces), 2 bad arguments or
unreadable files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config, sample_config_text
from .gradcheck import run_gradcheck
from .harness import export_heatmap, load_trace_csv, run_experiment, write_outputs
from .problem import ConfigError


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hgdas", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark sweep from a config file")
    run.add_argument("config", help="key = value or JSON config file")
    run.add_argument("--workers", type=int, default=None, help="worker threads")
    run.add_argument("--output-dir", default=None, help="overrides config and $HGDAS_OUTPUT_DIR")

    gc = sub.add_parser("gradcheck", help="closed-form vs finite-difference hypergradients")
    gc.add_argument("--seed", type=int, default=7)
    gc.add_argument("--cases", type=int, default=100)

    hm = sub.add_parser("heatmap", help="architecture heatmap CSV from trace CSVs")
    hm.add_argument("traces", nargs="+", help="trace CSV files of one variant")
    hm.add_argument("-o", "--output", required=True)

    gen = sub.add_parser("gen", help="print a sample config")
    gen.add_argument("-o", "--output", default=None, help="write to file instead of stdout")
    return ap


def _err(msg: str):
    print(f"hgdas: {msg}", file=sys.stderr)


def _cmd_run(args) -> int:
    path = Path(args.config)
    if not path.is_file():
        _err(f"config file not found: {path}")
        return 2
    try:
        cfg = load_config(path)
    except OSError as exc:
        _err(str(exc))
        return 2
    except ConfigError as exc:
        _err(f"{path}: {exc}")
        return 1
    outdir = cfg.resolved_output_dir(args.output_dir)
    report = run_experiment(cfg, workers=args.workers)
    write_outputs(report, outdir)
    for name, s in report.summaries.items():
        print(f"{name:<14s} final_mse={s.final_mse:.6g} ok={s.n_ok} failed={s.n_failed} "
              f"time/signal={s.mean_time_ms:.3f} ms")
    print(f"wrote {outdir}")
    return 0


def _cmd_gradcheck(args) -> int:
    if args.cases < 1:
        _err("--cases must be positive")
        return 2
    res = run_gradcheck(seed=args.seed, cases=args.cases)
    for line in res.lines():
        print(line)
    return 0 if res.passed else 1


def _cmd_heatmap(args) -> int:
    try:
        traces = [load_trace_csv(p) for p in args.traces]
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return 2
    try:
        export_heatmap(traces, args.output)
    except ValueError as exc:
        _err(str(exc))
        return 1
    return 0


def _cmd_gen(args) -> int:
    text = sample_config_text()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"run": _cmd_run, "gradcheck": _cmd_gradcheck,
               "heatmap": _cmd_heatmap, "gen": _cmd_gen}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
