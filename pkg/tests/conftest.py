import pytest

from perfsynth.trace_io import (
    BUNDLED_JOBS,
    AttributeSpec,
    Kind,
    Role,
    TraceDataset,
    load_bundled,
)


@pytest.fixture(scope="session")
def bundled():
    return {job: load_bundled(job) for job in BUNDLED_JOBS}


def make_dataset(columns: dict, kinds: dict, target: str, name="toy") -> TraceDataset:
    """Small helper: column dict -> TraceDataset with the given kinds."""
    schema = [AttributeSpec(n, kinds[n], Role.TARGET if n == target else Role.FEATURE)
              for n in columns]
    return TraceDataset.from_columns(schema, list(columns.values()), name)


C, I, K = Kind.CONTINUOUS, Kind.INTEGER, Kind.CATEGORICAL


# -- every boosted model fitted during the run, for the RMSE check ----------

import perfsynth.experiments
import perfsynth.models
import perfsynth.models.gbt

FITTED_RMSE: list[tuple[float, ...]] = []
_fit_gbt = perfsynth.models.gbt.fit_gbt


def _recording_fit_gbt(*args, **kwargs):
    model = _fit_gbt(*args, **kwargs)
    FITTED_RMSE.append(model.train_rmse)
    return model


for _mod in (perfsynth.models.gbt, perfsynth.models, perfsynth.experiments):
    _mod.fit_gbt = _recording_fit_gbt


# -- acceptance report -------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def pytest_collection_modifyitems(items):
    # the RMSE audit must see every model the other tests fitted
    last = [it for it in items if it.get_closest_marker("run_last")]
    items[:] = [it for it in items if it not in last] + last


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
