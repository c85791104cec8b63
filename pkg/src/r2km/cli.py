"""Command-line interface.

Exit status: 0 success, 1 usage error, 2 data/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .datasets import CsvSchema, load_csv
from .errors import DataError, NumericalError
from .models import load_model
from .reporting import (
    StageError,
    load_config,
    read_palette,
    render_report_map,
    run_experiment,
    tune_only,
)
from .stat_tests import (
    Q_ALPHA_K5_005,
    average_ranks,
    friedman,
    load_score_table,
    nemenyi_cd,
    rademacher_bound,
    read_score_table,
    significant_pairs,
)

OUTPUT_ENV = "R2KM_OUTPUT_DIR"
DEFAULT_SEED = 42

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser():
    p = _Parser(prog="r2km", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def experiment_flags(sp):
        sp.add_argument("config", type=Path)
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--json", action="store_true")

    bench = sub.add_parser("bench", help="run a benchmark experiment")
    bench_sub = bench.add_subparsers(dest="bench_command", parser_class=_Parser)
    experiment_flags(bench_sub.add_parser("run", help="tune, refit, evaluate, report"))

    experiment_flags(sub.add_parser("tune", help="grid search only"))

    pr = sub.add_parser("predict", help="predict a CSV with a saved model")
    pr.add_argument("model", type=Path)
    pr.add_argument("csv", type=Path)
    pr.add_argument("--no-header", action="store_true")
    pr.add_argument("--label-column", default=None, help="column to drop before predicting")
    pr.add_argument("--coord-columns", nargs=2, default=None)
    pr.add_argument("--seed", type=int, default=DEFAULT_SEED)
    pr.add_argument("--json", action="store_true")

    mp = sub.add_parser("map", help="render a classification map from a report")
    mp.add_argument("report", type=Path)
    mp.add_argument("palette", type=Path)
    mp.add_argument("--model", default=None, help="model kind (default: first in report)")
    mp.add_argument("--out", type=Path, default=None)
    mp.add_argument("--json", action="store_true")

    st = sub.add_parser("stats", help="Friedman test and Nemenyi critical difference")
    st_sub = st.add_subparsers(dest="stats_command", parser_class=_Parser)
    fr = st_sub.add_parser("friedman")
    fr.add_argument("scores", type=Path)
    fr.add_argument("--ranks", action="store_true", help="file holds average ranks")
    fr.add_argument("--n", type=int, default=None, help="number of datasets (with --ranks)")
    fr.add_argument("--lower-better", action="store_true")
    fr.add_argument("--q", type=float, default=Q_ALPHA_K5_005)
    fr.add_argument("--seed", type=int, default=DEFAULT_SEED)
    fr.add_argument("--json", action="store_true")
    cd = st_sub.add_parser("cd")
    cd.add_argument("--k", type=int, required=True)
    cd.add_argument("--n", type=int, required=True)
    cd.add_argument("--q", type=float, default=Q_ALPHA_K5_005)
    cd.add_argument("--seed", type=int, default=DEFAULT_SEED)
    cd.add_argument("--json", action="store_true")

    bd = sub.add_parser("bound", help="Rademacher generalization bound")
    bd.add_argument("--diag-csv", type=Path, required=True, help="kernel diagonal k(x_i, x_i)")
    bd.add_argument("--norm", type=float, required=True)
    bd.add_argument("--eps", type=float, required=True)
    bd.add_argument("--slacks-csv", type=Path, default=None, help="default: all zero")
    bd.add_argument("--seed", type=int, default=DEFAULT_SEED)
    bd.add_argument("--json", action="store_true")
    return p


def _emit(args, payload, lines):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _output_dir(args):
    if args.out is not None:
        return args.out
    return os.environ.get(OUTPUT_ENV)


def _config(args):
    return load_config(args.config, seed=args.seed, output_dir=_output_dir(args))


def cmd_bench_run(args):
    config = _config(args)
    report = run_experiment(config, jobs=args.jobs)
    summary = {k: v["metrics"] for k, v in report["models"].items()}
    lines = [f"seed: {config.seed}", f"output: {config.output_dir}"]
    for kind, metrics in summary.items():
        shown = {k: v for k, v in metrics.items() if k != "per_class"}
        lines.append(f"{kind}: " + ", ".join(f"{k}={v:.4f}" for k, v in shown.items() if v is not None))
    _emit(
        args,
        {"seed": config.seed, "output_dir": str(config.output_dir), "metrics": summary},
        lines,
    )


def cmd_tune(args):
    config = _config(args)
    results = tune_only(config, jobs=args.jobs)
    best = {
        kind.value: {
            "params": {k: getattr(v, "name", v) for k, v in res.best_params.items()},
            "cv_score": res.best_score,
        }
        for kind, res in results.items()
    }
    lines = [f"seed: {config.seed}"] + [
        f"{k}: {v['params']} cv_score={v['cv_score']:.4f}" for k, v in best.items()
    ]
    _emit(args, {"seed": config.seed, "best": best}, lines)


def cmd_predict(args):
    model, extra = load_model(args.model)
    n_coord = 2 if args.coord_columns else 0
    if args.label_column is not None:
        schema = CsvSchema(
            label_column=args.label_column,
            has_header=not args.no_header,
            coord_columns=tuple(args.coord_columns) if args.coord_columns else None,
            task="regression" if model.codec is None else "classification",
        )
        x = load_csv(args.csv, schema).x
    else:
        x = _read_feature_csv(args.csv, not args.no_header, n_coord)
    if "scaler_mean" in extra:
        x = (x - extra["scaler_mean"]) / extra["scaler_std"]
    pred = model.predict(x)
    pred = [p.item() if isinstance(p, np.generic) else p for p in pred]
    if model.codec is not None and "class_names" in extra:
        names = [str(c) for c in extra["class_names"]]
        pred = [names[i] for i in pred]
    _emit(args, {"seed": args.seed, "predictions": pred}, [str(p) for p in pred])


def _read_feature_csv(path, has_header, skip_leading):
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if has_header:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    try:
        return np.array([[float(c) for c in r[skip_leading:]] for r in rows])
    except ValueError:
        raise DataError(f"{path}: non-numeric feature value") from None


def cmd_map(args):
    try:
        report = json.loads(args.report.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"no such report: {args.report}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.report}: {exc}") from None
    ppm = render_report_map(report, args.model, read_palette(args.palette))
    out = args.out or args.report.parent / "map.ppm"
    out.write_bytes(ppm)
    _emit(args, {"map": str(out), "bytes": len(ppm)}, [f"wrote {out} ({len(ppm)} bytes)"])


def cmd_friedman(args):
    if args.ranks:
        if args.n is None:
            raise UsageError("stats friedman --ranks needs --n (number of datasets)")
        values, models, _ = read_score_table(args.scores)
        ranks = values[0]
        n = args.n
    else:
        table = load_score_table(args.scores, higher_is_better=not args.lower_better)
        ranks = average_ranks(table)
        models, n = table.models, table.n_datasets
    res = friedman(ranks, n)
    cd = nemenyi_cd(len(ranks), n, args.q)
    pairs = significant_pairs(ranks, cd, list(models))
    payload = {
        "models": list(models),
        "average_ranks": [float(r) for r in ranks],
        "n_datasets": n,
        "chi2": res.chi2,
        "f_stat": res.f_stat,
        "df_chi2": res.df_chi2,
        "df_f": list(res.df_f),
        "cd": cd,
        "q_alpha": args.q,
        "significant_pairs": [list(p) for p in pairs],
        "seed": args.seed,
    }
    lines = [
        "average ranks: " + ", ".join(f"{m}={r:.4f}" for m, r in zip(models, ranks)),
        f"chi2_F = {res.chi2:.4f} (df {res.df_chi2})",
        f"F_F = {res.f_stat:.4f} (df {res.df_f[0]}, {res.df_f[1]})",
        f"CD = {cd:.4f} (q_alpha {args.q})",
    ] + [f"significant: {a} vs {b} (gap {g:.4f})" for a, b, g in pairs]
    _emit(args, payload, lines)


def cmd_cd(args):
    cd = nemenyi_cd(args.k, args.n, args.q)
    _emit(args, {"cd": cd, "k": args.k, "n": args.n, "q_alpha": args.q, "seed": args.seed},
          [f"{cd:.4f}"])


def _read_column(path):
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    values = []
    with path.open(newline="", encoding="utf-8") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            for cell in row:
                cell = cell.strip()
                if not cell:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    if line == 1:
                        break
                    raise DataError(f"{path}: non-numeric value on line {line}") from None
    return np.array(values)


def cmd_bound(args):
    diag = _read_column(args.diag_csv)
    slacks = _read_column(args.slacks_csv) if args.slacks_csv else np.zeros(1)
    terms = rademacher_bound(diag, args.norm, slacks, args.eps)
    payload = {
        "bound": terms.total,
        "empirical": terms.empirical,
        "confidence": terms.confidence,
        "complexity": terms.complexity,
        "n": int(diag.size),
        "seed": args.seed,
    }
    _emit(args, payload, [f"{k}: {v:.6g}" for k, v in payload.items() if k != "seed"])


def _dispatch(args, parser):
    if args.command == "bench" and args.bench_command == "run":
        return cmd_bench_run(args)
    if args.command == "tune":
        return cmd_tune(args)
    if args.command == "predict":
        return cmd_predict(args)
    if args.command == "map":
        return cmd_map(args)
    if args.command == "stats" and args.stats_command == "friedman":
        return cmd_friedman(args)
    if args.command == "stats" and args.stats_command == "cd":
        return cmd_cd(args)
    if args.command == "bound":
        return cmd_bound(args)
    raise UsageError(parser.format_help())


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(sys.argv[1:] if argv is None else argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        _dispatch(args, parser)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except Exception as exc:
        cause = exc.cause if isinstance(exc, StageError) else exc
        if isinstance(cause, NumericalError) or isinstance(cause, np.linalg.LinAlgError):
            print(f"numerical error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        if isinstance(cause, (DataError, OSError, ValueError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
