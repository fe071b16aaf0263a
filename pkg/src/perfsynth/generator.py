"""Sampling synthetic trace rows from a data summary."""

from __future__ import annotations

import math

import numpy as np

from .describer import FORMAT_VERSION, AttributeDescriptor, DataSummary, bin_with, check_summary
from .errors import FormatError, RangeError
from .trace_io import Kind, Role, TraceDataset


def _draw_bins(rng: np.random.Generator, table: np.ndarray, configs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(table, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(len(configs))
    out = np.empty(len(configs), dtype=np.int64)
    for c in np.unique(configs):
        mask = configs == c
        out[mask] = np.searchsorted(cdf[c], u[mask], side="right")
    return np.minimum(out, table.shape[1] - 1)


def _integer_range(desc: AttributeDescriptor, b: int) -> tuple[int, int]:
    """Integers that bin ``b`` owns once its edges are rounded inward."""
    lo, hi = desc.edges[b], desc.edges[b + 1]
    last = b == desc.n_bins - 1
    first_int = math.ceil(lo)
    # the upper edge belongs to the next bin except for the last one
    last_int = math.floor(hi) if last else math.ceil(hi) - 1
    if first_int > last_int:
        # bin narrower than one integer step: use the nearest integer inside the overall range
        mid = round((lo + hi) / 2)
        mid = min(max(mid, math.ceil(desc.edges[0])), math.floor(desc.edges[-1]))
        return mid, mid
    return first_int, last_int


def _values_for(desc: AttributeDescriptor, bins: np.ndarray, rng: np.random.Generator) -> list:
    kind = desc.spec.kind
    if kind is Kind.CATEGORICAL:
        return [desc.alphabet[b] for b in bins]
    u = rng.random(len(bins))
    if desc.degenerate:
        # single observed value: reproduce it rather than smearing over [v, v+1)
        v = desc.edges[0]
        return [int(v)] * len(bins) if kind is Kind.INTEGER else [float(v)] * len(bins)
    if kind is Kind.INTEGER:
        ranges = np.array([_integer_range(desc, b) for b in range(desc.n_bins)])
        lo, hi = ranges[bins, 0], ranges[bins, 1]
        vals = lo + np.floor(u * (hi - lo + 1)).astype(np.int64)
        return np.minimum(vals, hi).tolist()
    edges = np.asarray(desc.edges)
    lo, hi = edges[bins], edges[bins + 1]
    vals = lo + u * (hi - lo)
    # lo + u*(hi-lo) can round up onto hi; keep half-open bins half-open
    vals = np.where(vals >= hi, np.nextafter(hi, lo), vals)
    vals = np.where(bins == desc.n_bins - 1, np.minimum(vals, edges[-1]), vals)
    return vals.tolist()


def sample(summary: DataSummary, n: int, seed: int) -> TraceDataset:
    """Ancestral sampling of ``n`` rows in network order.

    Numeric values are drawn uniformly inside their bin (integers over the
    integers the bin owns); runtimes are kept strictly positive.
    """
    if summary.format_version != FORMAT_VERSION:
        raise FormatError(f"summary format_version {summary.format_version} is not supported")
    check_summary(summary)
    if n < 1:
        raise RangeError(f"number of synthetic rows must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    descs = summary.descriptors
    net = summary.network
    bins = [None] * summary.d
    for a in net.order:
        ps = net.parents[a]
        if ps:
            configs = np.ravel_multi_index(tuple(bins[p] for p in ps),
                                           tuple(descs[p].n_bins for p in ps))
        else:
            configs = np.zeros(n, dtype=np.int64)
        bins[a] = _draw_bins(rng, net.cpts[a], configs)

    columns = []
    for a, desc in enumerate(descs):
        values = _values_for(desc, bins[a], rng)
        if desc.spec.role is Role.TARGET and min(values) <= 0:
            floor = _positive_floor(desc)
            values = [v if v > 0 else floor for v in values]
        columns.append(values)
    # every cell is typed and in range by construction, so skip per-cell validation
    return TraceDataset(summary.schema, tuple(zip(*columns)), summary.dataset_name,
                        _checked=True)


def _positive_floor(desc: AttributeDescriptor):
    positive = [e for e in desc.edges if e > 0]
    if desc.spec.kind is Kind.INTEGER:
        return max(1, math.ceil(min(positive))) if positive else 1
    return min(positive) if positive else np.nextafter(0.0, 1.0)


def empirical_marginal(data: TraceDataset, descriptor: AttributeDescriptor) -> np.ndarray:
    idx = bin_with(data.column(descriptor.spec.name).tolist(), descriptor)
    return np.bincount(idx, minlength=descriptor.n_bins) / len(idx)


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())
