"""Regenerate the bundled stand-in trace files.

The public C3O trace files could not be fetched when this repository was
built, so src/perfsynth/data/traces/ ships seeded stand-ins instead. They
have the same job set and row counts (36, 150, 140, 140, 270) and
plausible EMR-style execution contexts. Runtimes come from a scale-out
cost model with job-specific work terms and multiplicative log-normal
noise. They are NOT measurements.

To use the real traces, drop them next to a schema file whose attribute
names match their header and point the CLI / experiment config at them.

    python scripts/make_standin_traces.py
"""

import csv
import itertools
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "perfsynth" / "data" / "traces"
SEED = 20240117
NOISE_SIGMA = 0.06

MACHINES = ("c4.2xlarge", "m4.2xlarge", "r4.2xlarge")
# relative per-core speed (time multiplier); memory-heavy jobs get a separate factor
CPU_FACTOR = {"c4.2xlarge": 0.9, "m4.2xlarge": 1.0, "r4.2xlarge": 1.05}
MEM_FACTOR = {"c4.2xlarge": 1.15, "m4.2xlarge": 1.0, "r4.2xlarge": 0.85}


def scaleout(work, machines, overhead, coord, per_machine):
    return overhead + work / machines + coord * math.log(machines) + per_machine * machines


def sort_rows(rng):
    grid = list(itertools.product(MACHINES, (2, 4, 6, 8), (10000.0, 15000.0, 20000.0)))
    for mt, n, size in grid:
        line = int(rng.choice([100, 250, 500]))
        work = size * 0.05 * (1.0 - 0.0002 * (line - 100)) * CPU_FACTOR[mt]
        yield {"machine_type": mt, "instance_count": n, "line_length": line,
               "data_size_MB": size}, scaleout(work, n, 45.0, 12.0, 1.5)


def grep_rows(rng):
    grid = list(itertools.product(MACHINES, (2, 4, 6, 8, 10, 12),
                                  (0.001, 0.01, 0.05, 0.1, 0.2),
                                  (5000.0, 10000.0, 15000.0, 20000.0, 25000.0)))
    for i in sorted(rng.choice(len(grid), 150, replace=False)):
        mt, n, p, size = grid[i]
        work = size * (0.012 + 0.05 * p) * CPU_FACTOR[mt]
        yield {"machine_type": mt, "instance_count": n, "p_occurrence": p,
               "data_size_MB": size}, scaleout(work, n, 30.0, 6.0, 1.0)


def linear_regression_rows(rng):
    grid = list(itertools.product(MACHINES, (2, 4, 6, 8, 10, 12),
                                  (2_000_000, 5_000_000, 10_000_000, 20_000_000),
                                  (10, 30, 50), (10, 25, 50, 100)))
    for i in sorted(rng.choice(len(grid), 140, replace=False)):
        mt, n, obs, feats, iters = grid[i]
        size = obs * feats * 8 / 1e6
        work = size * (0.004 + 0.0012 * iters) * (0.5 * CPU_FACTOR[mt] + 0.5 * MEM_FACTOR[mt])
        yield {"machine_type": mt, "instance_count": n, "observations": obs,
               "features": feats, "iterations": iters,
               "data_size_MB": size}, scaleout(work, n, 40.0, 8.0, 0.8 + 0.01 * iters)


def kmeans_rows(rng):
    grid = list(itertools.product(MACHINES, (2, 4, 6, 8, 10, 12),
                                  (1_000_000, 5_000_000, 10_000_000, 20_000_000),
                                  (10, 25, 50), (3, 5, 10, 25)))
    for i in sorted(rng.choice(len(grid), 140, replace=False)):
        mt, n, obs, feats, k = grid[i]
        size = obs * feats * 8 / 1e6
        work = size * (0.01 + 0.004 * k) * MEM_FACTOR[mt]
        yield {"machine_type": mt, "instance_count": n, "observations": obs,
               "features": feats, "k": k,
               "data_size_MB": size}, scaleout(work, n, 50.0, 10.0, 1.2)


def pagerank_rows(rng):
    grid = list(itertools.product(MACHINES, (2, 4, 6, 8, 10, 12),
                                  (100_000, 500_000, 1_000_000, 2_000_000, 4_000_000),
                                  (10, 20), (0.01, 0.001, 0.0001)))
    for i in sorted(rng.choice(len(grid), 270, replace=False)):
        mt, n, pages, degree, conv = grid[i]
        links = pages * degree
        size = links * 24 / 1e6
        iters = 4.0 * math.log10(1.0 / conv)
        work = links * 2.5e-6 * iters * MEM_FACTOR[mt]
        yield {"machine_type": mt, "instance_count": n, "pages": pages, "links": links,
               "convergence_criterion": conv,
               "data_size_MB": size}, scaleout(work, n, 35.0, 15.0, 2.0)


JOBS = {
    "sort": sort_rows,
    "grep": grep_rows,
    "linear_regression": linear_regression_rows,
    "kmeans": kmeans_rows,
    "pagerank": pagerank_rows,
}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for offset, (job, make) in enumerate(JOBS.items()):
        rng = np.random.default_rng(SEED + offset)
        records = list(make(rng))
        fields = ["experiment_id", *records[0][0].keys(), "runtime"]
        with open(OUT / f"{job}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(fields)
            for i, (ctx, base) in enumerate(records):
                runtime = base * math.exp(rng.normal(0.0, NOISE_SIGMA))
                ctx = {k: (round(v, 4) if isinstance(v, float) else v) for k, v in ctx.items()}
                writer.writerow([f"{job}-{i:04d}", *ctx.values(), f"{runtime:.2f}"])
        print(f"{job}: {len(records)} rows")


if __name__ == "__main__":
    main()
