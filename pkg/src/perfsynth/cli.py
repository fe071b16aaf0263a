"""Command-line front end.

    perfsynth describe   --input sort.csv --schema sort.json --output sort.summary.json
    perfsynth generate   --summary sort.summary.json --rows 1000 --seed 1 --output synth.csv
    perfsynth fit-eval   --train synth.csv --test sort.csv --schema sort.json --model gbt ...
    perfsynth experiment --kind low-data --output low-data.csv

Exit status: 0 success, 1 data or processing failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from . import describer, experiments, generator, models
from .errors import PerfSynthError
from .trace_io import (
    BUNDLED_JOBS,
    bundled_schema,
    bundled_trace_path,
    load_csv,
    load_schema,
    write_csv,
)

SEED_ENV = "PERFSYNTH_SEED"


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _bins(text):
    value = _positive_int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 bins, got {value}")
    return value


def _epsilon(text):
    try:
        value = describer.parse_epsilon(text)
    except ValueError:
        value = -1.0
    if value is not None and not value > 0:
        raise argparse.ArgumentTypeError("epsilon must be a positive number or 'off'")
    return value


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw else 0


def cmd_describe(args):
    schema = load_schema(args.schema)
    data = load_csv(args.input, schema)
    privacy = describer.PrivacyParams(args.epsilon, args.degree, args.bins, args.seed)
    summary = describer.describe(data, privacy)
    describer.save_summary(summary, args.output)
    print(f"d={summary.d}")
    print(f"n_rows={summary.n_rows}")
    for key, value in summary.privacy.to_dict().items():
        print(f"{key}={value}")
    return 0


def cmd_generate(args):
    summary = describer.load_summary(args.summary)
    synthetic = generator.sample(summary, args.rows, args.seed)
    write_csv(synthetic, args.output)
    print(f"rows={len(synthetic)}")
    print(f"output={args.output}")
    return 0


def cmd_fit_eval(args):
    schema = load_schema(args.schema)
    train = load_csv(args.train, schema)
    test = load_csv(args.test, schema)
    if args.model == "ernest":
        scale = args.scale_attr or schema.scale_attribute
        machines = args.machines_attr or schema.machines_attribute
        if not scale or not machines:
            raise PerfSynthError("Ernest needs --scale-attr/--machines-attr or an 'ernest' "
                                 f"block in {args.schema}")
        model = models.fit_ernest(train, scale, machines)
    else:
        params = models.GbtParams(args.n_trees, args.learning_rate, args.max_depth,
                                  args.min_samples_leaf)
        model = models.fit_gbt(train, params, args.seed)
    score = models.mape(models.predict_dataset(model, test), test.target_values())
    models.save_model(model, args.output)
    print(f"model={args.model}")
    print(f"mape={score:.12g}")
    return 0


def _load_config(kind, path):
    if path is None:
        ref = resources.files("perfsynth") / "data" / "configs" / f"{kind}.json"
        return json.loads(ref.read_text(encoding="utf-8")), None
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh), Path(path).resolve().parent
        except json.JSONDecodeError as exc:
            raise PerfSynthError(f"{path}: invalid config ({exc})") from None


def _resolve_job(entry, base_dir):
    if isinstance(entry, str):
        if entry not in BUNDLED_JOBS:
            raise PerfSynthError(f"unknown bundled job {entry!r}")
        schema = bundled_schema(entry)
        return load_csv(bundled_trace_path(entry), schema, name=entry), schema
    base_dir = base_dir or Path.cwd()
    schema = load_schema(base_dir / entry["schema"])
    data = load_csv(base_dir / entry["data"], schema, name=entry.get("name"))
    return data, schema


def run_experiment(kind, config, base_dir=None, jobs=1) -> experiments.EvalReport:
    if kind == "overhead":
        privacy = describer.PrivacyParams(describer.parse_epsilon(
            config.get("privacy", {}).get("epsilon", "off")))
        return experiments.exp_overhead(
            tuple(config.get("row_counts", (100, 1000))),
            tuple(config.get("column_counts", (5, 10, 20))),
            tuple(config.get("synth_counts", (1000, 10000))),
            int(config.get("trials", 3)), int(config.get("base_seed", 0)), privacy=privacy)

    p = config.get("privacy", {})
    eps_values = p.get("epsilon", "off")
    if not isinstance(eps_values, list):
        eps_values = [eps_values]
    gbt = models.GbtParams(**config.get("gbt", {}))
    report = experiments.EvalReport([], {"experiment": kind, "jobs": []})
    for entry in config.get("jobs", list(BUNDLED_JOBS)):
        data, schema = _resolve_job(entry, base_dir)
        for eps in eps_values:
            privacy = describer.PrivacyParams(describer.parse_epsilon(eps),
                                              int(p.get("degree_k", describer.DEFAULT_DEGREE)),
                                              int(p.get("bins", describer.DEFAULT_BINS)))
            common = dict(privacy=privacy, base_seed=int(config.get("base_seed", 0)),
                          scale_attr=schema.scale_attribute or "data_size_MB",
                          machines_attr=schema.machines_attribute or "instance_count",
                          gbt=gbt, jobs=jobs)
            if kind == "low-data":
                part = experiments.exp_low_data(
                    data,
                    tuple(config.get("original_counts", experiments.DEFAULT_ORIGINAL_COUNTS)),
                    int(config.get("n_synthetic", experiments.DEFAULT_N_SYNTHETIC)),
                    int(config.get("trials", 10)),
                    test_fraction=float(config.get("test_fraction",
                                                   experiments.LOW_DATA_TEST_FRACTION)),
                    **common)
            else:
                part = experiments.exp_synth_size(
                    data, tuple(config.get("synth_sizes", experiments.DEFAULT_SYNTH_SIZES)),
                    int(config.get("trials", 3)), **common)
            report.extend(part)
            report.config["jobs"].append(part.config)
    return report


def cmd_experiment(args):
    config, base_dir = _load_config(args.kind, args.config)
    report = run_experiment(args.kind, config, base_dir, args.jobs)
    report.write(args.output)
    print(f"rows={len(report.rows)}")
    print(f"output={args.output}")
    if args.kind == "overhead":
        for r in report.ratios:
            fixed = (f"n_synthetic={r['n_synthetic']}" if r["ratio"] == "cols"
                     else f"n_cols={r['n_cols']}")
            print(f"ratio_{r['ratio']} n_rows={r['n_rows']} {fixed} {r['from']}->{r['to']} "
                  f"value={r['value']:.4g}")
    else:
        labels = sorted({r.epsilon for r in report.rows})
        if len(labels) > 1:
            for label in labels:
                part = experiments.EvalReport([r for r in report.rows if r.epsilon == label])
                print(f"mean_abs_gap[epsilon={label}]={part.mean_abs_gap():.6g}")
        print(f"mean_abs_gap={report.mean_abs_gap():.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perfsynth", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    seed_default = _default_seed()

    p = sub.add_parser("describe", help="build a privacy-preserving data summary")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--epsilon", type=_epsilon, default=None, help="positive real or 'off'")
    p.add_argument("--degree", type=_positive_int, default=describer.DEFAULT_DEGREE)
    p.add_argument("--bins", type=_bins, default=describer.DEFAULT_BINS)
    p.add_argument("--seed", type=int, default=seed_default)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("generate", help="sample synthetic rows from a summary")
    p.add_argument("--summary", required=True)
    p.add_argument("--rows", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit-eval", help="fit a runtime model and report test MAPE")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--model", choices=("ernest", "gbt"), required=True)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--min-samples-leaf", type=_positive_int, default=1)
    p.add_argument("--scale-attr")
    p.add_argument("--machines-attr")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_fit_eval)

    p = sub.add_parser("experiment", help="run a batch evaluation")
    p.add_argument("--kind", choices=("synth-size", "low-data", "overhead"), required=True)
    p.add_argument("--config", help="JSON config; defaults to the bundled one for --kind")
    p.add_argument("--output", required=True)
    p.add_argument("--jobs", type=_positive_int, default=1,
                   help="parallel trials (keep 1 for timing runs)")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PerfSynthError, OSError, KeyError, TypeError, ValueError) as exc:
        print(f"perfsynth {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
