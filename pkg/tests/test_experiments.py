import csv
import json
import math

import pytest

from perfsynth import experiments
from perfsynth.describer import PrivacyParams
from perfsynth.errors import RangeError
from perfsynth.experiments import (
    FIELDS,
    TIMING_FIELDS,
    EvalReport,
    ScenarioResult,
    aggregate,
    exp_low_data,
    exp_overhead,
    exp_synth_size,
    fit_and_score,
    make_corpus,
    read_report,
)
from perfsynth.models import GbtParams
from perfsynth.trace_io import load_csv, split

from conftest import C, I, K, make_dataset

FAST_GBT = GbtParams(n_trees=15)


def constant_job(n=12):
    return make_dataset({"machine_type": ["m5.xlarge"] * n, "instance_count": [4] * n,
                         "data_size_MB": [800.0] * n, "runtime": [55.5] * n},
                        {"machine_type": K, "instance_count": I, "data_size_MB": C,
                         "runtime": C}, "runtime", name="const")


def non_timing(rows):
    return [tuple(getattr(r, f) for f in FIELDS if f not in TIMING_FIELDS) for r in rows]


def same(a, b):
    return all(x == y or (isinstance(x, float) and math.isnan(x) and math.isnan(y))
               for x, y in zip(a, b))


def test_synth_size_row_counts(bundled):
    rep = exp_synth_size(bundled["sort"], (100, 1000, 10000), trials=3, gbt=FAST_GBT)
    baselines = [r for r in rep.rows if r.n_synthetic == 0]
    synthetic = [r for r in rep.rows if r.n_synthetic > 0]
    assert len(baselines) == 3 * 2
    assert len(synthetic) == 3 * 3 * 2
    assert all(math.isnan(r.mape_synthetic) for r in baselines)
    assert {r.trial_seed for r in rep.rows} == {0, 1, 2}
    assert rep.config["test_fraction"] == 0.2


def test_degenerate_data_gives_zero_error():
    for rep in (exp_synth_size(constant_job(), (50,), trials=1, gbt=FAST_GBT),
                exp_low_data(constant_job(), (3,), 40, trials=1, gbt=FAST_GBT)):
        for r in rep.rows:
            # Ernest goes through a least-squares solve, so zero means zero up to rounding
            tol = 0.0 if r.model_kind == "gbt" else 1e-12
            assert abs(r.mape_original) <= tol
            if r.n_synthetic:
                assert abs(r.mape_synthetic) <= tol


def test_low_data_rows_and_error(bundled):
    data = bundled["grep"]
    rep = exp_low_data(data, (3, 5), 200, trials=2, gbt=FAST_GBT)
    assert len(rep.rows) == 2 * 2 * 2
    assert all(r.n_synthetic == 200 and r.mape_original >= 0 and r.mape_synthetic >= 0
               for r in rep.rows)
    with pytest.raises(RangeError):
        exp_low_data(bundled["sort"], (200,), 100, trials=1)


def test_low_data_full_train_boundary(bundled):
    data = bundled["sort"]
    train, _ = split(data, experiments.LOW_DATA_TEST_FRACTION, 0)
    rep = exp_low_data(data, (len(train),), 100, trials=1, gbt=FAST_GBT)
    direct, _ = fit_and_score("ernest", train, split(data, 0.15, 0)[1], scale_attr="data_size_MB",
                              machines_attr="instance_count", gbt=FAST_GBT, seed=0)
    ernest = next(r for r in rep.rows if r.model_kind == "ernest")
    # the full-size sample is a permutation of the split, so Ernest sees the same system
    assert ernest.mape_original == pytest.approx(direct, rel=1e-9)


def test_aggregate_recomputes_exactly(bundled):
    rep = exp_low_data(bundled["kmeans"], (3, 10), 150, trials=3, gbt=FAST_GBT)
    agg = rep.aggregate
    assert len(agg) == 2 * 2
    for entry in agg:
        members = [r for r in rep.rows if (r.job, r.model_kind, r.n_original, r.n_synthetic,
                                           r.epsilon) == (entry["job"], entry["model_kind"],
                                                          entry["n_original"],
                                                          entry["n_synthetic"], entry["epsilon"])]
        vals = [r.mape_synthetic for r in members]
        mean = math.fsum(vals) / len(vals)
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / len(vals))
        assert entry["trials"] == 3
        assert entry["mape_synthetic_mean"] == mean
        assert entry["mape_synthetic_std"] == std
    # and again from the written CSV
    assert aggregate(rep.rows) == agg


def test_report_file_round_trip(tmp_path, bundled):
    rep = exp_synth_size(bundled["sort"], (100,), trials=1, gbt=FAST_GBT)
    path = tmp_path / "r.csv"
    side = rep.write(path)
    with open(path, newline="") as fh:
        assert tuple(next(csv.reader(fh))) == FIELDS
    again = read_report(path)
    assert same(non_timing(again)[0], non_timing(rep.rows)[0])
    assert len(again) == len(rep.rows)
    doc = json.loads(side.read_text())
    assert doc["config"]["trial_seeds"] == [0]
    assert doc["config"]["schema_sha256"] == experiments.schema_digest(bundled["sort"].schema)
    assert len(doc["aggregate"]) == len(rep.aggregate)


def test_reports_are_reproducible(bundled):
    a = exp_low_data(bundled["linear_regression"], (5, 20), 300, trials=2, gbt=FAST_GBT,
                     base_seed=7)
    b = exp_low_data(bundled["linear_regression"], (5, 20), 300, trials=2, gbt=FAST_GBT,
                     base_seed=7)
    assert all(same(x, y) for x, y in zip(non_timing(a.rows), non_timing(b.rows)))
    c = exp_low_data(bundled["linear_regression"], (5, 20), 300, trials=2, gbt=FAST_GBT,
                     base_seed=8)
    assert non_timing(a.rows) != non_timing(c.rows)


def test_parallel_trials_match_serial(bundled):
    kw = dict(trials=2, gbt=FAST_GBT, base_seed=3)
    a = exp_low_data(bundled["grep"], (5,), 100, jobs=1, **kw)
    b = exp_low_data(bundled["grep"], (5,), 100, jobs=2, **kw)
    assert non_timing(a.rows) == non_timing(b.rows)


@pytest.mark.parametrize("runner", ["synth", "low"])
def test_refit_from_persisted_csv(tmp_path, bundled, runner):
    data = bundled["pagerank"]
    if runner == "synth":
        rep = exp_synth_size(data, (100, 400), trials=1, gbt=FAST_GBT, artifact_dir=tmp_path)
    else:
        rep = exp_low_data(data, (3, 10), 250, trials=2, gbt=FAST_GBT, artifact_dir=tmp_path)
    checked = 0
    for r in rep.rows:
        if r.n_synthetic == 0:
            continue
        stem = f"{r.job}-seed{r.trial_seed}-orig{r.n_original}-syn{r.n_synthetic}"
        synthetic = load_csv(tmp_path / f"{stem}.synthetic.csv", data.schema)
        test = load_csv(tmp_path / f"{stem}.test.csv", data.schema)
        score, _ = fit_and_score(r.model_kind, synthetic, test, scale_attr="data_size_MB",
                                 machines_attr="instance_count", gbt=FAST_GBT, seed=r.trial_seed)
        assert score == r.mape_synthetic
        checked += 1
    assert checked == sum(r.n_synthetic > 0 for r in rep.rows)


def test_epsilon_recorded(bundled):
    rep = exp_low_data(bundled["grep"], (10,), 100, trials=1, privacy=PrivacyParams(1.0),
                       gbt=FAST_GBT)
    assert {r.epsilon for r in rep.rows} == {"1.0"}
    assert rep.config["privacy"]["epsilon"] == 1.0


def test_make_corpus_shape():
    data = make_corpus(50, 7, 1)
    assert len(data) == 50 and len(data.schema) == 7
    assert data.target.name == "runtime" and data.name == "corpus-r50-c7"
    with pytest.raises(RangeError):
        make_corpus(10, 1, 0)


def test_overhead_small_sweep():
    rep = exp_overhead((40,), (3, 6), (100, 1000), trials=2)
    assert len(rep.rows) == 2 * 2 * 2
    assert all(r.model_kind == "none" and r.describe_ms >= 0 and r.generate_ms >= 0
               for r in rep.rows)
    kinds = sorted((r["ratio"], r["from"]) for r in rep.ratios)
    assert kinds == [("cols", 3), ("cols", 3), ("synth", 100), ("synth", 100)]
    assert all(r["value"] > 0 for r in rep.ratios)


def test_mean_abs_gap_ignores_baselines():
    rows = [ScenarioResult("j", "gbt", 10, 0, "off", 0, 0.3, float("nan"), 0, 0, 0),
            ScenarioResult("j", "gbt", 10, 100, "off", 0, 0.3, 0.1, 0, 0, 0),
            ScenarioResult("j", "ernest", 10, 100, "off", 0, 0.2, 0.3, 0, 0, 0)]
    assert EvalReport(rows).mean_abs_gap() == pytest.approx(0.15)
