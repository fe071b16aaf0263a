"""Batch evaluations: synthetic-size sweep, low-data sweep, synthesis overhead.

Every run is a list of ``ScenarioResult`` rows plus a config snapshot. Trial
``t`` uses seed ``base_seed + t`` for its split, subsample, summary and
generation, so any row can be regenerated in isolation.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import describer, generator
from .describer import PrivacyParams
from .errors import RangeError
from .models import GbtParams, fit_ernest, fit_gbt, mape, predict_dataset
from .trace_io import (
    AttributeSpec,
    Kind,
    Role,
    TraceDataset,
    atomic_write_text,
    sample_rows,
    split,
    write_csv,
)

MODEL_KINDS = ("ernest", "gbt")
DEFAULT_SYNTH_SIZES = (100, 300, 1000, 3000, 10000)
DEFAULT_ORIGINAL_COUNTS = (3, 5, 10, 20, 30)
DEFAULT_N_SYNTHETIC = 1000
SYNTH_SIZE_TEST_FRACTION = 0.2
LOW_DATA_TEST_FRACTION = 0.15
TIMING_FIELDS = ("describe_ms", "generate_ms", "fit_ms")


@dataclass(frozen=True)
class ScenarioResult:
    job: str
    model_kind: str
    n_original: int
    n_synthetic: int
    epsilon: str
    trial_seed: int
    mape_original: float
    mape_synthetic: float  # nan for original-only baselines
    describe_ms: float
    generate_ms: float
    fit_ms: float

    @property
    def abs_gap(self) -> float:
        return abs(self.mape_synthetic - self.mape_original)


FIELDS = tuple(f.name for f in dataclasses.fields(ScenarioResult))


def _fmt(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _parse_result(record: dict) -> ScenarioResult:
    kwargs = {}
    for f in dataclasses.fields(ScenarioResult):
        raw = record[f.name]
        if f.type == "int":
            kwargs[f.name] = int(raw)
        elif f.type == "float":
            kwargs[f.name] = float("nan") if raw == "" else float(raw)
        else:
            kwargs[f.name] = raw
    return ScenarioResult(**kwargs)


def _mean_std(values):
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return float("nan"), float("nan")
    mean = math.fsum(values) / len(values)
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))


def aggregate(rows) -> list[dict]:
    """Mean and population std over trials, per (job, model, counts, epsilon)."""
    groups: dict[tuple, list[ScenarioResult]] = {}
    for r in rows:
        groups.setdefault((r.job, r.model_kind, r.n_original, r.n_synthetic, r.epsilon),
                          []).append(r)
    out = []
    for (job, kind, n_orig, n_syn, eps), members in groups.items():
        entry = {"job": job, "model_kind": kind, "n_original": n_orig, "n_synthetic": n_syn,
                 "epsilon": eps, "trials": len(members)}
        for name, values in (
            ("mape_original", [m.mape_original for m in members]),
            ("mape_synthetic", [m.mape_synthetic for m in members]),
            ("abs_gap", [m.abs_gap for m in members]),
        ):
            entry[f"{name}_mean"], entry[f"{name}_std"] = _mean_std(values)
        for name in TIMING_FIELDS:
            entry[f"{name}_mean"] = _mean_std([getattr(m, name) for m in members])[0]
        out.append(entry)
    return out


@dataclass
class EvalReport:
    rows: list[ScenarioResult]
    config: dict = field(default_factory=dict)
    ratios: list[dict] = field(default_factory=list)

    @property
    def aggregate(self) -> list[dict]:
        return aggregate(self.rows)

    def mean_abs_gap(self) -> float:
        return _mean_std([r.abs_gap for r in self.rows if r.n_synthetic > 0])[0]

    def extend(self, other: "EvalReport") -> None:
        self.rows.extend(other.rows)
        self.ratios.extend(other.ratios)

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FIELDS)
        for r in self.rows:
            writer.writerow([_fmt(getattr(r, f)) for f in FIELDS])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {"config": self.config, "aggregate": self.aggregate, "ratios": self.ratios,
                "mean_abs_gap": _json_float(self.mean_abs_gap())}

    def write(self, path) -> Path:
        """Write the report CSV and ``<path>.config.json``; returns the sidecar path."""
        path = Path(path)
        side = path.with_name(path.name + ".config.json")
        atomic_write_text(side, json.dumps(_jsonable(self.sidecar()), indent=2) + "\n")
        atomic_write_text(path, self.csv_text())
        return side


def _json_float(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return _json_float(obj)
    return obj


def read_report(path) -> list[ScenarioResult]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [_parse_result(rec) for rec in csv.DictReader(fh)]


def _ms(start_ns: int) -> float:
    return (time.perf_counter_ns() - start_ns) / 1e6


def schema_digest(schema) -> str:
    blob = json.dumps([a.to_dict() for a in schema], sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def fit_and_score(kind: str, train: TraceDataset, test: TraceDataset, *, scale_attr: str,
                  machines_attr: str, gbt: GbtParams, seed: int) -> tuple[float, float]:
    """Fit one model kind on ``train``; return (test MAPE, fit milliseconds)."""
    start = time.perf_counter_ns()
    if kind == "ernest":
        model = fit_ernest(train, scale_attr, machines_attr)
    elif kind == "gbt":
        model = fit_gbt(train, gbt, seed)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    fit_ms = _ms(start)
    return mape(predict_dataset(model, test), test.target_values()), fit_ms


def _eps_label(privacy: PrivacyParams) -> str:
    return "off" if privacy.epsilon is None else repr(float(privacy.epsilon))


def _base_config(kind, data, privacy, gbt, base_seed, trials, scale_attr, machines_attr):
    return {
        "experiment": kind,
        "job": data.name,
        "n_rows": len(data),
        "schema_sha256": schema_digest(data.schema),
        "privacy": privacy.to_dict() | {"seed": "trial_seed"},
        "gbt": gbt.to_dict(),
        "ernest": {"scale": scale_attr, "machines": machines_attr},
        "base_seed": base_seed,
        "trials": trials,
        "trial_seeds": [base_seed + t for t in range(trials)],
    }


def _map_trials(fn, args_list, jobs):
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*args_list)))


def _synth_size_trial(data, sizes, privacy, seed, scale_attr, machines_attr, gbt,
                      artifact_dir):
    eps = _eps_label(privacy)
    train, test = split(data, SYNTH_SIZE_TEST_FRACTION, seed)
    common = dict(scale_attr=scale_attr, machines_attr=machines_attr, gbt=gbt, seed=seed)
    rows, baseline = [], {}
    for kind in MODEL_KINDS:
        score, fit_ms = fit_and_score(kind, train, test, **common)
        baseline[kind] = score
        rows.append(ScenarioResult(data.name, kind, len(train), 0, eps, seed, score,
                                   float("nan"), 0.0, 0.0, fit_ms))
    start = time.perf_counter_ns()
    summary = describer.describe(train, dataclasses.replace(privacy, seed=seed))
    describe_ms = _ms(start)
    for m in sizes:
        start = time.perf_counter_ns()
        synthetic = generator.sample(summary, m, seed)
        generate_ms = _ms(start)
        if artifact_dir is not None:
            _persist(artifact_dir, data.name, seed, len(train), m, synthetic, test)
        for kind in MODEL_KINDS:
            score, fit_ms = fit_and_score(kind, synthetic, test, **common)
            rows.append(ScenarioResult(data.name, kind, len(train), m, eps, seed,
                                       baseline[kind], score, describe_ms, generate_ms, fit_ms))
    return rows


def exp_synth_size(data: TraceDataset, synth_sizes=DEFAULT_SYNTH_SIZES, trials: int = 3,
                   privacy: PrivacyParams | None = None, base_seed: int = 0, *,
                   scale_attr: str = "data_size_MB", machines_attr: str = "instance_count",
                   gbt: GbtParams | None = None, jobs: int = 1,
                   artifact_dir=None) -> EvalReport:
    """Model error when training on growing amounts of synthetic data.

    Per trial the full training split gives the baseline; its summary is then
    sampled at every size in ``synth_sizes`` and both models are refit.
    """
    privacy = privacy or PrivacyParams()
    gbt = gbt or GbtParams()
    if trials < 1 or not synth_sizes:
        raise RangeError("need at least one trial and one synthetic size")
    args = [(data, tuple(synth_sizes), privacy, base_seed + t, scale_attr, machines_attr, gbt,
             artifact_dir) for t in range(trials)]
    rows = [r for trial in _map_trials(_synth_size_trial, args, jobs) for r in trial]
    config = _base_config("synth-size", data, privacy, gbt, base_seed, trials, scale_attr,
                          machines_attr)
    config |= {"synth_sizes": list(synth_sizes), "test_fraction": SYNTH_SIZE_TEST_FRACTION,
               "summary_reuse": "one summary per trial, sampled at every size"}
    return EvalReport(rows, config)


def _low_data_trial(data, counts, n_synthetic, privacy, seed, test_fraction, scale_attr,
                    machines_attr, gbt, artifact_dir):
    eps = _eps_label(privacy)
    train, test = split(data, test_fraction, seed)
    common = dict(scale_attr=scale_attr, machines_attr=machines_attr, gbt=gbt, seed=seed)
    rows = []
    for c in counts:
        subset = sample_rows(train, c, seed)
        start = time.perf_counter_ns()
        summary = describer.describe(subset, dataclasses.replace(privacy, seed=seed))
        describe_ms = _ms(start)
        start = time.perf_counter_ns()
        synthetic = generator.sample(summary, n_synthetic, seed)
        generate_ms = _ms(start)
        if artifact_dir is not None:
            _persist(artifact_dir, data.name, seed, c, n_synthetic, synthetic, test)
        for kind in MODEL_KINDS:
            original, _ = fit_and_score(kind, subset, test, **common)
            score, fit_ms = fit_and_score(kind, synthetic, test, **common)
            rows.append(ScenarioResult(data.name, kind, c, n_synthetic, eps, seed, original,
                                       score, describe_ms, generate_ms, fit_ms))
    return rows


def exp_low_data(data: TraceDataset, original_counts=DEFAULT_ORIGINAL_COUNTS,
                 n_synthetic: int = DEFAULT_N_SYNTHETIC, trials: int = 10,
                 privacy: PrivacyParams | None = None, base_seed: int = 0, *,
                 test_fraction: float = LOW_DATA_TEST_FRACTION,
                 scale_attr: str = "data_size_MB", machines_attr: str = "instance_count",
                 gbt: GbtParams | None = None, jobs: int = 1,
                 artifact_dir=None) -> EvalReport:
    """Original vs. synthetic training when only a handful of rows exist.

    For every count ``c`` a random subset of the training split is used
    directly and, separately, re-described and expanded to ``n_synthetic``
    rows. Both variants are scored on the same untouched test split.
    """
    privacy = privacy or PrivacyParams()
    gbt = gbt or GbtParams()
    if trials < 1 or not original_counts:
        raise RangeError("need at least one trial and one original count")
    n_test = min(max(math.floor(test_fraction * len(data) + 0.5), 1), len(data) - 1)
    n_train = len(data) - n_test
    if max(original_counts) > n_train:
        raise RangeError(f"original count {max(original_counts)} exceeds the {n_train}-row "
                         f"training split of {data.name or 'dataset'}")
    args = [(data, tuple(original_counts), n_synthetic, privacy, base_seed + t, test_fraction,
             scale_attr, machines_attr, gbt, artifact_dir) for t in range(trials)]
    rows = [r for trial in _map_trials(_low_data_trial, args, jobs) for r in trial]
    config = _base_config("low-data", data, privacy, gbt, base_seed, trials, scale_attr,
                          machines_attr)
    config |= {"original_counts": list(original_counts), "n_synthetic": n_synthetic,
               "test_fraction": test_fraction,
               "summary_reuse": "re-described per trial and per original count"}
    return EvalReport(rows, config)


def _persist(artifact_dir, job, seed, n_original, n_synthetic, synthetic, test):
    root = Path(artifact_dir)
    root.mkdir(parents=True, exist_ok=True)
    stem = f"{job}-seed{seed}-orig{n_original}-syn{n_synthetic}"
    write_csv(synthetic, root / f"{stem}.synthetic.csv")
    write_csv(test, root / f"{stem}.test.csv")


# -- overhead ---------------------------------------------------------------

def make_corpus(n_rows: int, n_cols: int, seed: int) -> TraceDataset:
    """Synthetic trace-like table with ``n_cols`` columns, the last being a runtime.

    Feature columns cycle through categorical (4 machine types), integer
    (machine counts 1..16) and continuous (input sizes) kinds.
    """
    if n_cols < 2:
        raise RangeError("corpus needs at least one feature and the target")
    rng = np.random.default_rng(seed)
    schema, columns = [], []
    runtime = np.full(n_rows, 30.0)
    for i in range(n_cols - 1):
        name = f"f{i:02d}"
        if i % 3 == 0:
            values = rng.choice(["c4.xlarge", "m4.xlarge", "r4.xlarge", "m5.xlarge"], n_rows)
            runtime *= 1.0 + 0.1 * (values == "c4.xlarge")
            schema.append(AttributeSpec(name, Kind.CATEGORICAL))
            columns.append(values.tolist())
        elif i % 3 == 1:
            values = rng.integers(1, 17, n_rows)
            runtime += 5.0 * np.log(values)
            schema.append(AttributeSpec(name, Kind.INTEGER))
            columns.append(values.tolist())
        else:
            values = rng.uniform(100.0, 10000.0, n_rows)
            runtime += values / 100.0
            schema.append(AttributeSpec(name, Kind.CONTINUOUS))
            columns.append(values.tolist())
    runtime *= np.exp(rng.normal(0.0, 0.05, n_rows))
    schema.append(AttributeSpec("runtime", Kind.CONTINUOUS, Role.TARGET))
    columns.append(runtime.tolist())
    return TraceDataset.from_columns(schema, columns, f"corpus-r{n_rows}-c{n_cols}")


def _time_synthesis(data, n_synthetic, privacy):
    start = time.perf_counter_ns()
    summary = describer.describe(data, privacy)
    describe_ms = _ms(start)
    start = time.perf_counter_ns()
    generator.sample(summary, n_synthetic, privacy.seed)
    return describe_ms, _ms(start)


def exp_overhead(row_counts=(100, 1000), column_counts=(5, 10, 20),
                 synth_counts=(1000, 10000), trials: int = 3, base_seed: int = 0, *,
                 privacy: PrivacyParams | None = None) -> EvalReport:
    """Wall-clock cost of describe and generate over a grid of table shapes.

    One discarded warm-up run precedes the timed trials of every
    configuration. Scaling ratios use per-configuration medians.
    """
    privacy = privacy or PrivacyParams()
    rows = []
    for n_rows in row_counts:
        for n_cols in column_counts:
            data = make_corpus(n_rows, n_cols, base_seed)
            for n_syn in synth_counts:
                _time_synthesis(data, n_syn, dataclasses.replace(privacy, seed=base_seed))
                for t in range(trials):
                    seed = base_seed + t
                    d_ms, g_ms = _time_synthesis(data, n_syn,
                                                 dataclasses.replace(privacy, seed=seed))
                    rows.append(ScenarioResult(data.name, "none", n_rows, n_syn,
                                               _eps_label(privacy), seed, float("nan"),
                                               float("nan"), d_ms, g_ms, 0.0))
    config = {
        "experiment": "overhead",
        "row_counts": list(row_counts),
        "column_counts": list(column_counts),
        "synth_counts": list(synth_counts),
        "trials": trials,
        "base_seed": base_seed,
        "trial_seeds": [base_seed + t for t in range(trials)],
        "privacy": privacy.to_dict() | {"seed": "trial_seed"},
        "warmup_runs": 1,
    }
    return EvalReport(rows, config, overhead_ratios(rows))


def _median_times(rows):
    groups: dict[tuple, list[ScenarioResult]] = {}
    for r in rows:
        n_cols = int(r.job.rsplit("-c", 1)[1])
        groups.setdefault((r.n_original, n_cols, r.n_synthetic), []).append(r)
    return {
        key: (statistics.median(m.describe_ms for m in members),
              statistics.median(m.describe_ms + m.generate_ms for m in members))
        for key, members in groups.items()
    }


def overhead_ratios(rows) -> list[dict]:
    """Column-doubling ratios on describe time and 10x-rows ratios on total time."""
    med = _median_times(rows)
    out = []
    for (n_rows, n_cols, n_syn), (describe_t, total_t) in sorted(med.items()):
        doubled = med.get((n_rows, 2 * n_cols, n_syn))
        if doubled is not None:
            out.append({"ratio": "cols", "n_rows": n_rows, "from": n_cols, "to": 2 * n_cols,
                        "n_synthetic": n_syn, "value": doubled[0] / describe_t})
        tenfold = med.get((n_rows, n_cols, 10 * n_syn))
        if tenfold is not None:
            out.append({"ratio": "synth", "n_rows": n_rows, "n_cols": n_cols, "from": n_syn,
                        "to": 10 * n_syn, "value": tenfold[1] / total_t})
    return out
