"""Command-line entry point: ``mixboost run | compare | sweep``.

Options may also come from a ``--config`` file of ``key=value`` lines whose
keys are long option names without dashes (``min-count=4``); explicit flags win.
On failure the last stderr line is ``error<TAB>kind=...<TAB>message=...``.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .classifier import MlpConfig
from .core import MixConfig
from .dataset import DataError
from .experiment import METHODS, ExperimentConfig, ExperimentError, compare, run_experiment, sweep
from .stats import DirichletConfig


def _error(kind: str, message: str) -> None:
    print(f"error\tkind={kind}\tmessage={message}", file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _error("UsageError", message)
        sys.exit(2)


def _label_column(value: str):
    try:
        return int(value)
    except ValueError:
        return value


def _add_experiment_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--dataset", required=True, help="CSV file")
    g.add_argument("--label-column", type=_label_column, default=-1, help="name or 0-based index (default: last)")
    g.add_argument("--minority-label", default=None, help="raw label of the minority class (default: rarer class)")
    g.add_argument("--no-header", action="store_true", help="first CSV row is data")
    g.add_argument("--name", default=None, help="dataset key in outputs (default: file stem)")

    g = p.add_argument_group("protocol")
    g.add_argument("--method", choices=METHODS, default="mixboost")
    g.add_argument("--strategy", choices=["R", "EW"], default="EW")
    g.add_argument("--min-count", type=int, default=4)
    g.add_argument("--runs", type=int, default=30)
    g.add_argument("--seed", type=int, default=0, help="master seed; run i uses seed+i")
    g.add_argument("--synthetic-multiple", type=float, default=1.0, help="synthetic rows as a multiple of the training size")
    g.add_argument("--classifier", choices=["mlp", "knn"], default="mlp")
    g.add_argument("--knn-k", type=int, default=5)
    g.add_argument("--k-neighbors", type=int, default=5, help="SMOTE-family neighbour count")
    g.add_argument("--out", default=None, help="output directory")
    g.add_argument("--fail-fast", action="store_true")
    g.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")

    g = p.add_argument_group("augmentation")
    g.add_argument("--iterations", type=int, default=5)
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--lambda-dist", choices=["beta", "uniform"], default="beta")
    g.add_argument("--label-mode", choices=["soft", "one_hot"], default="soft")
    g.add_argument("--warm-start", action="store_true", help="fine-tune instead of refitting from scratch")

    g = p.add_argument_group("classifier")
    g.add_argument("--epochs", type=int, default=MlpConfig.epochs)
    g.add_argument("--learning-rate", type=float, default=MlpConfig.learning_rate)
    g.add_argument("--batch-size", type=int, default=MlpConfig.batch_size)
    g.add_argument("--hidden", default=",".join(str(h) for h in MlpConfig.hidden_layers),
                   help="comma-separated hidden layer widths")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixboost", description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None, help="key=value defaults file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = {}

    p = parser.commands["run"] = sub.add_parser("run", help="repeated runs of one method on one dataset")
    _add_experiment_options(p)

    p = parser.commands["sweep"] = sub.add_parser("sweep", help="repeat an experiment over minority counts or synthetic sizes")
    _add_experiment_options(p)
    p.add_argument("--axis", choices=["min_count", "n_syn"], required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")

    p = parser.commands["compare"] = sub.add_parser("compare", help="Bayesian signed test between two methods across datasets")
    p.add_argument("--a", nargs="+", required=True, help="summary CSV(s) for method A")
    p.add_argument("--b", nargs="+", required=True, help="summary CSV(s) for method B")
    p.add_argument("--metric", choices=["gmean", "roc_auc"], default="gmean")
    p.add_argument("--rope", type=float, default=DirichletConfig.rope_width)
    p.add_argument("--prior-strength", type=float, default=DirichletConfig.prior_strength)
    p.add_argument("--prior-point", type=float, default=DirichletConfig.prior_point)
    p.add_argument("--samples", type=int, default=DirichletConfig.posterior_samples)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--aggregate", choices=["none", "max"], default="none",
                   help="collapse several rows per dataset to the best mean")
    p.add_argument("--attribution", choices=["max", "mean"], default="max")
    p.add_argument("--out", default=None)
    return parser


def _read_config_file(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config_defaults(parser: argparse.ArgumentParser, argv) -> None:
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    values = _read_config_file(known.config)
    for sub in parser.commands.values():
        defaults = {}
        for a in sub._actions:
            if a.dest not in values:
                continue
            raw = values[a.dest]
            if a.nargs == 0:  # store_true flags
                defaults[a.dest] = raw.lower() in ("1", "true", "yes")
            else:
                defaults[a.dest] = a.type(raw) if a.type else raw
            a.required = False
        sub.set_defaults(**defaults)


def experiment_config(args) -> ExperimentConfig:
    hidden = tuple(int(h) for h in str(args.hidden).split(",") if h.strip())
    return ExperimentConfig(
        dataset=args.dataset,
        method=args.method,
        min_count=args.min_count,
        runs=args.runs,
        synthetic_multiple=args.synthetic_multiple,
        mix=MixConfig(iterations=args.iterations, alpha=args.alpha, strategy=args.strategy,
                      label_mode=args.label_mode, lambda_dist=args.lambda_dist, warm_start=args.warm_start),
        mlp=MlpConfig(hidden_layers=hidden, learning_rate=args.learning_rate,
                      batch_size=args.batch_size, epochs=args.epochs),
        classifier=args.classifier,
        knn_k=args.knn_k,
        k_neighbors=args.k_neighbors,
        seed=args.seed,
        label_column=args.label_column,
        minority_label=args.minority_label,
        header=not args.no_header,
        name=args.name,
        fail_fast=args.fail_fast,
        jobs=args.jobs,
    )


def _cmd_run(args) -> int:
    cfg = experiment_config(args)
    result = run_experiment(cfg, args.out)
    if result.records:
        g, auc = result.summary("gmean"), result.summary("roc_auc")
        print(f"dataset={cfg.dataset_key} method={cfg.method} strategy={cfg.strategy_label or '-'} "
              f"classifier={cfg.classifier} min_count={cfg.min_count} runs={g.runs} "
              f"gmean={g.mean:.3f}+-{g.std:.3f} roc_auc={auc.mean:.3f}+-{auc.std:.3f} (std: population)")
    for f in result.failures:
        print(f"failed\trun={f.run}\tseed={f.seed}\tstage={f.stage}\tmessage={f.message}", file=sys.stderr)
    if result.failures:
        _error("RunFailure", f"{len(result.failures)} of {cfg.runs} runs failed")
        return 1
    return 0


def _cmd_sweep(args) -> int:
    cfg = experiment_config(args)
    cast = int if args.axis == "min_count" else float
    values = [cast(v) for v in args.values.split(",") if v.strip()]
    rows = sweep(cfg, args.axis, values, args.out)
    print("axis,value,runs,gmean_mean,gmean_std_population,roc_auc_mean,roc_auc_std_population")
    for r in rows:
        print(",".join(str(x) for x in r))
    return 0


def _cmd_compare(args) -> int:
    cfg = DirichletConfig(args.prior_strength, args.prior_point, args.rope, args.samples, args.seed)
    result, _, diffs = compare(args.a, args.b, cfg, metric=args.metric,
                               aggregate=None if args.aggregate == "none" else "max",
                               attribution=args.attribution, out_dir=args.out)
    print(f"datasets={len(diffs)} metric={args.metric} rope_width={cfg.rope_width} (configurable via --rope)")
    print(f"p_left(A better)={result.p_left:.4f} p_rope={result.p_rope:.4f} p_right(B better)={result.p_right:.4f}")
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config_defaults(parser, argv)
    except (OSError, ValueError) as exc:
        _error(type(exc).__name__, str(exc))
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "compare": _cmd_compare}
    try:
        return handlers[args.command](args)
    except (DataError, ExperimentError, ValueError, OSError) as exc:
        _error(type(exc).__name__, str(exc).replace("\n", " "))
        return 1


if __name__ == "__main__":
    sys.exit(main())
