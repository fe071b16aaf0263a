import json
import math
import subprocess
import sys

import pytest

from perfsynth.cli import main
from perfsynth.trace_io import bundled_schema, bundled_trace_path


@pytest.fixture
def sort_files(tmp_path):
    schema = tmp_path / "sort.json"
    schema.write_text(json.dumps(bundled_schema("sort").to_dict()))
    data = tmp_path / "sort.csv"
    data.write_bytes(bundled_trace_path("sort").read_bytes())
    return data, schema


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def describe_args(data, schema, out, *extra):
    return ("describe", "--input", data, "--schema", schema, "--output", out, *extra)


def test_describe_happy_path(capsys, tmp_path, sort_files):
    data, schema = sort_files
    before = data.read_bytes()
    code, out, _ = run(capsys, *describe_args(data, schema, tmp_path / "s.json",
                                              "--epsilon", "off", "--seed", 42))
    assert code == 0
    lines = dict(line.split("=", 1) for line in out.splitlines())
    assert lines["d"] == "5" and lines["n_rows"] == "36"
    assert lines["epsilon"] == "off" and lines["seed"] == "42" and lines["degree_k"] == "1"
    assert json.loads((tmp_path / "s.json").read_text())["d"] == 5
    assert data.read_bytes() == before


def test_missing_schema_is_usage_error(capsys, tmp_path, sort_files):
    data, _ = sort_files
    with pytest.raises(SystemExit) as info:
        main(["describe", "--input", str(data), "--output", str(tmp_path / "s.json")])
    assert info.value.code == 2
    assert "--schema" in capsys.readouterr().err


@pytest.mark.parametrize("flag, value", [("--epsilon", "-1"), ("--epsilon", "abc"),
                                         ("--bins", "1"), ("--degree", "0")])
def test_bad_describe_flags(capsys, tmp_path, sort_files, flag, value):
    data, schema = sort_files
    with pytest.raises(SystemExit) as info:
        main([str(a) for a in describe_args(data, schema, tmp_path / "s.json", flag, value)])
    assert info.value.code == 2


def test_zero_runtime_names_row(capsys, tmp_path, sort_files):
    data, schema = sort_files
    lines = data.read_text().splitlines()
    cells = lines[3].split(",")
    cells[-1] = "0"
    lines[3] = ",".join(cells)
    data.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, *describe_args(data, schema, tmp_path / "s.json"))
    assert code == 1
    assert "row 3" in err
    assert not (tmp_path / "s.json").exists()


def test_generate_rows_and_determinism(capsys, tmp_path, sort_files):
    data, schema = sort_files
    summary = tmp_path / "s.json"
    assert run(capsys, *describe_args(data, schema, summary))[0] == 0
    outs = []
    for name in ("a.csv", "b.csv"):
        code, out, _ = run(capsys, "generate", "--summary", summary, "--rows", 1000,
                           "--seed", 1, "--output", tmp_path / name)
        assert code == 0 and "rows=1000" in out
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    assert len(outs[0].decode().splitlines()) == 1001
    # the synthetic file feeds straight back into describe
    code, _, _ = run(capsys, *describe_args(tmp_path / "a.csv", schema, tmp_path / "s2.json"))
    assert code == 0


def test_describe_byte_identical(capsys, tmp_path, sort_files):
    data, schema = sort_files
    for name in ("x.json", "y.json"):
        run(capsys, *describe_args(data, schema, tmp_path / name, "--epsilon", "0.5",
                                   "--seed", 3))
    assert (tmp_path / "x.json").read_bytes() == (tmp_path / "y.json").read_bytes()


def test_generate_zero_rows_is_usage_error(capsys, tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["generate", "--summary", str(tmp_path / "s.json"), "--rows", "0",
              "--output", str(tmp_path / "o.csv")])
    assert info.value.code == 2


def test_generate_version_mismatch(capsys, tmp_path, sort_files):
    data, schema = sort_files
    summary = tmp_path / "s.json"
    run(capsys, *describe_args(data, schema, summary))
    doc = json.loads(summary.read_text())
    doc["format_version"] = 7
    summary.write_text(json.dumps(doc))
    code, _, err = run(capsys, "generate", "--summary", summary, "--rows", 5,
                       "--output", tmp_path / "o.csv")
    assert code == 1 and "format_version" in err


def constant_files(tmp_path):
    schema = tmp_path / "c.json"
    schema.write_text(json.dumps({
        "job": "const",
        "attributes": [
            {"name": "machine_type", "kind": "categorical", "role": "feature"},
            {"name": "instance_count", "kind": "numeric-integer", "role": "feature"},
            {"name": "data_size_MB", "kind": "numeric-continuous", "role": "feature"},
            {"name": "runtime", "kind": "numeric-continuous", "role": "target"},
        ],
        "ernest": {"scale": "data_size_MB", "machines": "instance_count"},
    }))
    data = tmp_path / "c.csv"
    rows = [f"m5.xlarge,{m},{s},64.0" for m in (2, 4, 8) for s in (100.0, 200.0)]
    data.write_text("machine_type,instance_count,data_size_MB,runtime\n" + "\n".join(rows) + "\n")
    return data, schema


def test_fit_eval_constant_gbt_prints_zero(capsys, tmp_path):
    data, schema = constant_files(tmp_path)
    code, out, _ = run(capsys, "fit-eval", "--train", data, "--test", data, "--schema", schema,
                       "--model", "gbt", "--output", tmp_path / "m.json")
    assert code == 0 and "mape=0\n" in out


def test_fit_eval_constant_ernest(capsys, tmp_path):
    data, schema = constant_files(tmp_path)
    code, out, _ = run(capsys, "fit-eval", "--train", data, "--test", data, "--schema", schema,
                       "--model", "ernest", "--output", tmp_path / "m.json")
    assert code == 0
    assert float(out.split("mape=")[1]) <= 1e-12


def test_fit_eval_ernest_oracle(capsys, tmp_path):
    _, schema = constant_files(tmp_path)
    lines = []
    for m in (1, 2, 4, 8, 16):
        for s in (100.0, 400.0, 1600.0, 6400.0):
            lines.append(f"m5.xlarge,{m},{s},{10 + 2 * s / m + 5 * math.log(m) + 0.5 * m!r}")
    data = tmp_path / "e.csv"
    data.write_text("machine_type,instance_count,data_size_MB,runtime\n" + "\n".join(lines) + "\n")
    code, out, _ = run(capsys, "fit-eval", "--train", data, "--test", data, "--schema", schema,
                       "--model", "ernest", "--output", tmp_path / "m.json")
    assert code == 0 and float(out.split("mape=")[1]) <= 1e-6
    theta = json.loads((tmp_path / "m.json").read_text())["theta"]
    assert theta == pytest.approx([10, 2, 5, 0.5], rel=1e-6)


def test_fit_eval_schema_mismatch(capsys, tmp_path):
    data, schema = constant_files(tmp_path)
    bad = tmp_path / "bad.csv"
    bad.write_text("machine_type,runtime\nm5.xlarge,3.0\n")
    code, _, err = run(capsys, "fit-eval", "--train", data, "--test", bad, "--schema", schema,
                       "--model", "gbt", "--output", tmp_path / "m.json")
    assert code == 1 and "instance_count" in err


def test_unknown_model_and_kind(capsys, tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["fit-eval", "--train", "a", "--test", "b", "--schema", "c", "--model", "unknown",
              "--output", "o"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["experiment", "--kind", "nope", "--output", str(tmp_path / "r.csv")])
    assert info.value.code == 2


def test_experiment_low_data_small_config(capsys, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"jobs": ["sort", "grep"], "original_counts": [3, 5],
                                  "n_synthetic": 100, "trials": 1, "gbt": {"n_trees": 10}}))
    out_csv = tmp_path / "r.csv"
    code, out, _ = run(capsys, "experiment", "--kind", "low-data", "--config", config,
                       "--output", out_csv)
    assert code == 0
    assert out.splitlines()[-1].startswith("mean_abs_gap=")
    assert len(out_csv.read_text().splitlines()) == 1 + 2 * 2 * 2
    assert (tmp_path / "r.csv.config.json").exists()


def test_experiment_failure_leaves_no_report(capsys, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"jobs": [{"data": "missing.csv", "schema": "missing.json"}],
                                  "trials": 1}))
    out_csv = tmp_path / "r.csv"
    code, _, err = run(capsys, "experiment", "--kind", "synth-size", "--config", config,
                       "--output", out_csv)
    assert code == 1 and "missing" in err
    assert not out_csv.exists()
    assert list(tmp_path.iterdir()) == [config]


def test_experiment_overhead_small(capsys, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"row_counts": [30], "column_counts": [3, 6],
                                  "synth_counts": [50, 500], "trials": 1}))
    code, out, _ = run(capsys, "experiment", "--kind", "overhead", "--config", config,
                       "--output", tmp_path / "o.csv")
    assert code == 0
    assert sum(line.startswith("ratio_") for line in out.splitlines()) == 4


def test_seed_env_default(capsys, tmp_path, sort_files, monkeypatch):
    data, schema = sort_files
    monkeypatch.setenv("PERFSYNTH_SEED", "17")
    _, out, _ = run(capsys, *describe_args(data, schema, tmp_path / "s.json"))
    assert "seed=17" in out


def test_module_entry_point(tmp_path, sort_files):
    data, schema = sort_files
    proc = subprocess.run([sys.executable, "-m", "perfsynth", *map(str, describe_args(
        data, schema, tmp_path / "s.json"))], capture_output=True, text=True)
    assert proc.returncode == 0 and "d=5" in proc.stdout


@pytest.mark.slow
def test_experiment_overhead_default_sweep(capsys, tmp_path):
    out_csv = tmp_path / "o.csv"
    code, out, _ = run(capsys, "experiment", "--kind", "overhead", "--output", out_csv)
    assert code == 0
    from perfsynth.experiments import read_report
    rows = read_report(out_csv)
    assert len(rows) == 2 * 3 * 2 * 3
    small = [r.describe_ms for r in rows if r.job.endswith(("-c5", "-c10"))]
    assert small and max(small) < 10_000


def test_experiment_epsilon_sweep(capsys, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"jobs": ["grep"], "original_counts": [10], "n_synthetic": 100,
                                  "trials": 1, "gbt": {"n_trees": 5},
                                  "privacy": {"epsilon": ["off", 1, 0.1]}}))
    out_csv = tmp_path / "r.csv"
    code, out, _ = run(capsys, "experiment", "--kind", "low-data", "--config", config,
                       "--output", out_csv)
    assert code == 0
    lines = out.splitlines()
    assert sum(line.startswith("mean_abs_gap[epsilon=") for line in lines) == 3
    assert lines[-1].startswith("mean_abs_gap=")
    from perfsynth.experiments import read_report
    assert {r.epsilon for r in read_report(out_csv)} == {"off", "1.0", "0.1"}


def test_experiment_bad_config_value(capsys, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"jobs": ["sort"], "privacy": {"epsilon": "lots"}}))
    code, _, err = run(capsys, "experiment", "--kind", "low-data", "--config", config,
                       "--output", tmp_path / "r.csv")
    assert code == 1 and "error" in err
