"""Privacy-preserving data summaries of trace tables.

The summary is a Bayesian network over discretised attributes: every numeric
column is cut into equal-width bins, a greedy search picks for each attribute
the parent set that carries the most mutual information, and the conditional
tables are released with Laplace noise. Nothing row-level survives except bin
edges and category labels.

Budget handling follows the usual PrivBayes recipe: half of epsilon goes to the
structure search (noisy max over candidate scores), half to the tables.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FormatError, SchemaError, ShapeError, ValidationError
from .trace_io import AttributeSpec, Kind, TraceDataset, atomic_write_text

FORMAT_VERSION = 1
DEFAULT_BINS = 20
DEFAULT_DEGREE = 1

# tolerance used when checking that a stored vector is a distribution
PROB_ATOL = 1e-9


@dataclass(frozen=True)
class PrivacyParams:
    """Noise settings. ``epsilon=None`` switches noise off entirely."""

    epsilon: float | None = None
    degree_k: int = DEFAULT_DEGREE
    bins: int = DEFAULT_BINS
    seed: int = 0
    # set once degree_k has been clamped against a concrete attribute count,
    # which may legitimately drive it to 0 for single-column data
    applied: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if self.epsilon is not None and not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValidationError(f"epsilon must be positive or off, got {self.epsilon!r}")
        if int(self.degree_k) < (0 if self.applied else 1):
            raise ValidationError(f"degree_k must be >= 1, got {self.degree_k}")
        if int(self.bins) < 2:
            raise ValidationError(f"bins must be >= 2, got {self.bins}")

    @property
    def active(self) -> bool:
        return self.epsilon is not None

    @property
    def epsilon_structure(self) -> float | None:
        return None if self.epsilon is None else self.epsilon / 2

    @property
    def epsilon_distribution(self) -> float | None:
        return None if self.epsilon is None else self.epsilon / 2

    def clamped(self, d: int) -> "PrivacyParams":
        k = min(int(self.degree_k), max(d - 1, 0))
        return replace(self, degree_k=k, bins=int(self.bins), seed=int(self.seed), applied=True)

    def to_dict(self) -> dict:
        return {
            "epsilon": "off" if self.epsilon is None else float(self.epsilon),
            "degree_k": int(self.degree_k),
            "bins": int(self.bins),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PrivacyParams":
        return cls(parse_epsilon(doc.get("epsilon", "off")), int(doc["degree_k"]),
                   int(doc["bins"]), int(doc["seed"]), applied=True)


def parse_epsilon(value) -> float | None:
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip().lower() in ("off", "none", ""):
            return None
        value = float(value)
    return float(value)


@dataclass(frozen=True)
class AttributeDescriptor:
    spec: AttributeSpec
    edges: tuple[float, ...] | None  # numeric kinds
    alphabet: tuple[str, ...] | None  # categorical
    marginal: tuple[float, ...]

    @property
    def n_bins(self) -> int:
        return len(self.marginal)

    @property
    def degenerate(self) -> bool:
        """Numeric column that held a single distinct value."""
        return self.edges is not None and len(self.edges) == 2

    def to_dict(self) -> dict:
        out = self.spec.to_dict()
        if self.edges is not None:
            out["edges"] = [float(e) for e in self.edges]
        else:
            out["alphabet"] = list(self.alphabet)
        out["marginal"] = [float(p) for p in self.marginal]
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "AttributeDescriptor":
        spec = AttributeSpec(doc["name"], doc["kind"], doc["role"])
        edges = tuple(float(e) for e in doc["edges"]) if "edges" in doc else None
        alphabet = tuple(doc["alphabet"]) if "alphabet" in doc else None
        if (edges is None) == (alphabet is None):
            raise FormatError(f"attribute {spec.name!r} needs exactly one of edges/alphabet")
        return cls(spec, edges, alphabet, tuple(float(p) for p in doc["marginal"]))


@dataclass(frozen=True)
class NetworkStructure:
    order: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]  # indexed by attribute, not by position in order


@dataclass(frozen=True)
class BayesNetwork:
    """Structure plus one conditional table per attribute.

    ``cpts[i]`` has shape ``(n_parent_configs, n_bins_i)``; parent
    configurations are enumerated in C order over ``parents[i]`` (the last
    listed parent varies fastest). Roots have a single row.
    """

    order: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]
    cpts: tuple[np.ndarray, ...] = field(compare=False)

    @property
    def structure(self) -> NetworkStructure:
        return NetworkStructure(self.order, self.parents)


@dataclass(frozen=True)
class DataSummary:
    dataset_name: str
    n_rows: int
    descriptors: tuple[AttributeDescriptor, ...]
    network: BayesNetwork
    privacy: PrivacyParams
    format_version: int = FORMAT_VERSION

    @property
    def d(self) -> int:
        return len(self.descriptors)

    @property
    def schema(self) -> tuple[AttributeSpec, ...]:
        return tuple(a.spec for a in self.descriptors)

    def to_dict(self) -> dict:
        cpts = []
        for i, table in enumerate(self.network.cpts):
            rows = [[float(p) for p in row] for row in table]
            cpts.append(rows[0] if not self.network.parents[i] else rows)
        return {
            "format_version": self.format_version,
            "dataset_name": self.dataset_name,
            "n_rows": int(self.n_rows),
            "d": self.d,
            "privacy": self.privacy.to_dict(),
            "attributes": [a.to_dict() for a in self.descriptors],
            "network": {
                "order": [int(i) for i in self.network.order],
                "parents": [[int(p) for p in ps] for ps in self.network.parents],
                "cpts": cpts,
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "DataSummary":
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise FormatError(f"summary format_version {version!r} is not supported "
                              f"(expected {FORMAT_VERSION})")
        try:
            descriptors = tuple(AttributeDescriptor.from_dict(a) for a in doc["attributes"])
            net = doc["network"]
            parents = tuple(tuple(int(p) for p in ps) for ps in net["parents"])
            cpts = []
            for i, table in enumerate(net["cpts"]):
                arr = np.asarray(table, dtype=float)
                cpts.append(arr.reshape(1, -1) if arr.ndim == 1 else arr)
            network = BayesNetwork(tuple(int(i) for i in net["order"]), parents, tuple(cpts))
            summary = cls(doc["dataset_name"], int(doc["n_rows"]), descriptors, network,
                          PrivacyParams.from_dict(doc["privacy"]), version)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed summary: {exc}") from None
        if int(doc.get("d", summary.d)) != summary.d:
            raise FormatError("summary attribute count does not match 'd'")
        check_summary(summary)
        return summary


def check_summary(summary: DataSummary) -> None:
    """Raise FormatError unless every structural invariant of a summary holds."""
    d = summary.d
    net = summary.network
    if sorted(net.order) != list(range(d)) or len(net.parents) != d or len(net.cpts) != d:
        raise FormatError("network does not cover every attribute exactly once")
    position = {a: i for i, a in enumerate(net.order)}
    for i, desc in enumerate(summary.descriptors):
        if any(position[p] >= position[i] for p in net.parents[i]):
            raise FormatError(f"attribute {i} has a parent placed after it")
        _check_prob(desc.marginal, f"marginal of {desc.spec.name!r}")
        n_cfg = int(np.prod([summary.descriptors[p].n_bins for p in net.parents[i]]))
        if net.cpts[i].shape != (n_cfg, desc.n_bins):
            raise FormatError(f"table of {desc.spec.name!r} has shape {net.cpts[i].shape}, "
                              f"expected {(n_cfg, desc.n_bins)}")
        for row in net.cpts[i]:
            _check_prob(row, f"table row of {desc.spec.name!r}")


def _check_prob(vec, what):
    vec = np.asarray(vec, dtype=float)
    if np.any(vec < 0) or abs(vec.sum() - 1.0) > PROB_ATOL:
        raise FormatError(f"{what} is not a probability vector")


def load_summary(path) -> DataSummary:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a summary file ({exc})") from None
    return DataSummary.from_dict(doc)


def save_summary(summary: DataSummary, path) -> None:
    atomic_write_text(path, summary.dumps())


# -- discretisation ---------------------------------------------------------

def bin_attribute(values, spec: AttributeSpec, bins: int):
    """Discretise one column.

    Returns ``(edges_or_alphabet, indices)``. Numeric columns get ``bins``
    equal-width bins over ``[min, max]`` (the maximum falls in the last bin); a
    column with one distinct value ``v`` gets the single bin ``[v, v + 1]``.
    Categorical columns map each value to its rank in the sorted alphabet.
    """
    if len(values) == 0:
        raise ShapeError(f"cannot bin empty column {spec.name!r}")
    if spec.kind is Kind.CATEGORICAL:
        alphabet = tuple(sorted(set(values)))
        lookup = {c: i for i, c in enumerate(alphabet)}
        return alphabet, np.fromiter((lookup[v] for v in values), dtype=np.int64,
                                     count=len(values))
    x = np.asarray(values, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return (lo, lo + 1.0), np.zeros(len(x), dtype=np.int64)
    edges = np.linspace(lo, hi, bins + 1)
    return tuple(float(e) for e in edges), _bin_index(x, edges)


def _bin_index(x, edges):
    idx = np.searchsorted(np.asarray(edges), x, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2).astype(np.int64)


def bin_with(values, descriptor: AttributeDescriptor) -> np.ndarray:
    """Bin a column against existing edges; out-of-range values land in the boundary bins."""
    if descriptor.alphabet is not None:
        lookup = {c: i for i, c in enumerate(descriptor.alphabet)}
        try:
            return np.fromiter((lookup[v] for v in values), dtype=np.int64, count=len(values))
        except KeyError as exc:
            raise ValidationError(f"category {exc.args[0]!r} not in alphabet of "
                                  f"{descriptor.spec.name!r}") from None
    return _bin_index(np.asarray(values, dtype=float), descriptor.edges)


# -- mutual information ------------------------------------------------------

def mutual_information(xi, yi) -> float:
    """Plug-in mutual information (nats) between two integer-coded columns."""
    x = np.asarray(xi, dtype=np.int64)
    y = np.asarray(yi, dtype=np.int64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"index columns must be 1-d and equal length, got {x.shape} and {y.shape}")
    if len(x) == 0:
        raise ShapeError("mutual information of empty columns")
    _, xc = np.unique(x, return_inverse=True)
    _, yc = np.unique(y, return_inverse=True)
    nx, ny = xc.max() + 1, yc.max() + 1
    if nx == 1 or ny == 1:
        return 0.0
    n = len(x)
    joint = np.bincount(xc * ny + yc, minlength=nx * ny).reshape(nx, ny) / n
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(px, py)[nz])))
    hx = -float(np.sum(px * np.log(px)))
    hy = -float(np.sum(py * np.log(py)))
    return min(max(mi, 0.0), hx, hy)


def mi_sensitivity(n: int) -> float:
    """Bound on how much one row can move the plug-in MI of n rows."""
    if n <= 1:
        return 0.0
    return math.log(n) / n + (n - 1) / n * math.log(n / (n - 1))


def structure_noise_scale(n: int, d: int, epsilon_structure: float) -> float:
    return 2.0 * (d - 1) * mi_sensitivity(n) / epsilon_structure


def distribution_noise_scale(n: int, d: int, k: int, epsilon_distribution: float) -> float:
    return 4.0 * (d - k) / (n * epsilon_distribution)


def laplace_noise(rng: np.random.Generator, scale: float, size):
    if scale <= 0:
        return np.zeros(size)
    return rng.laplace(0.0, scale, size)


def _joint_codes(binned: np.ndarray, attrs, cards) -> np.ndarray:
    if not attrs:
        return np.zeros(binned.shape[0], dtype=np.int64)
    return np.ravel_multi_index(tuple(binned[:, a] for a in attrs),
                                tuple(cards[a] for a in attrs))


# -- structure ---------------------------------------------------------------

def greedy_bayes(binned: np.ndarray, cards, privacy: PrivacyParams,
                 rng: np.random.Generator | None = None) -> NetworkStructure:
    """Greedy parent selection by (noisy) mutual information.

    ``binned`` is an ``(n, d)`` array of bin indices, ``cards`` the bin count
    per attribute. The root is the attribute with the largest summed pairwise
    MI; then, repeatedly, the (attribute, parent set) pair with the largest
    score is placed. Parent sets have size ``min(k, placed)``. Ties go to the
    earlier attribute and the lexicographically smaller parent tuple.
    """
    binned = np.asarray(binned, dtype=np.int64)
    if binned.ndim != 2 or binned.shape[1] == 0:
        raise SchemaError("greedy_bayes needs at least one attribute")
    n, d = binned.shape
    params = privacy.clamped(d)
    k = params.degree_k
    if rng is None:
        rng = np.random.default_rng(params.seed)
    scale = structure_noise_scale(n, d, params.epsilon_structure) if params.active else 0.0

    pair = np.zeros((d, d))
    for i, j in itertools.combinations(range(d), 2):
        pair[i, j] = pair[j, i] = mutual_information(binned[:, i], binned[:, j])
    root_scores = pair.sum(axis=1)
    if params.active:
        root_scores = root_scores + laplace_noise(rng, scale, d)
    root = int(np.argmax(root_scores))

    order = [root]
    parents: list[tuple[int, ...]] = [()] * d
    remaining = [a for a in range(d) if a != root]
    while remaining:
        size = min(k, len(order))
        placed = sorted(order)
        candidates = [(a, ps) for a in remaining for ps in itertools.combinations(placed, size)]
        scores = np.array([
            mutual_information(binned[:, a], _joint_codes(binned, ps, cards))
            for a, ps in candidates
        ])
        if params.active:
            scores = scores + laplace_noise(rng, scale, len(scores))
        a, ps = candidates[int(np.argmax(scores))]
        order.append(a)
        parents[a] = ps
        remaining.remove(a)
    return NetworkStructure(tuple(order), tuple(parents))


# -- conditional tables ------------------------------------------------------

def noisy_distributions(binned: np.ndarray, cards, structure: NetworkStructure,
                        privacy: PrivacyParams, rng: np.random.Generator | None = None):
    """Fit one (noisy) conditional table per attribute.

    Returns ``(network, marginals)`` where ``marginals[i]`` is attribute i's
    distribution obtained by summing its released joint table over parents.
    """
    binned = np.asarray(binned, dtype=np.int64)
    n, d = binned.shape
    params = privacy.clamped(d)
    if rng is None:
        rng = np.random.default_rng(params.seed)
    scale = (distribution_noise_scale(n, d, params.degree_k, params.epsilon_distribution)
             if params.active else 0.0)

    cpts: list[np.ndarray] = [None] * d
    marginals: list[np.ndarray] = [None] * d
    for a in structure.order:
        ps = structure.parents[a]
        n_cfg = int(np.prod([cards[p] for p in ps])) if ps else 1
        codes = _joint_codes(binned, ps, cards) * cards[a] + binned[:, a]
        joint = np.bincount(codes, minlength=n_cfg * cards[a]).astype(float) / n
        if params.active:
            joint = np.clip(joint + laplace_noise(rng, scale, joint.shape), 0.0, None)
            total = joint.sum()
            joint = joint / total if total > 0 else np.full(joint.shape, 1.0 / joint.size)
        joint = joint.reshape(n_cfg, cards[a])
        marginal = _normalise(joint.sum(axis=0))
        table = np.empty_like(joint)
        for c in range(n_cfg):
            mass = joint[c].sum()
            table[c] = _normalise(joint[c]) if mass > 0 else marginal
        cpts[a] = table
        marginals[a] = marginal
    return BayesNetwork(structure.order, structure.parents, tuple(cpts)), marginals


def _normalise(vec: np.ndarray) -> np.ndarray:
    total = vec.sum()
    if total <= 0:
        return np.full(vec.shape, 1.0 / vec.size)
    out = vec / total
    # push the rounding residue into the largest cell so sums stay within 1e-9
    out[np.argmax(out)] += 1.0 - out.sum()
    return out


def discretise(data: TraceDataset, bins: int):
    """Bin every column. Returns (edges-or-alphabet per column, (n, d) index array)."""
    domains, columns = [], []
    for spec in data.schema:
        values = data.column(spec.name)
        domain, idx = bin_attribute(values.tolist() if not spec.kind.numeric else values,
                                    spec, bins)
        domains.append(domain)
        columns.append(idx)
    return domains, np.column_stack(columns)


def describe(data: TraceDataset, privacy: PrivacyParams | None = None) -> DataSummary:
    """Build a shareable summary of ``data``."""
    privacy = privacy or PrivacyParams()
    d = len(data.schema)
    if d == 0:
        raise SchemaError("cannot describe a dataset without attributes")
    applied = privacy.clamped(d)
    rng = np.random.default_rng(applied.seed)
    domains, binned = discretise(data, applied.bins)
    cards = [len(dom) - 1 if spec.kind.numeric else len(dom)
             for dom, spec in zip(domains, data.schema)]
    structure = greedy_bayes(binned, cards, applied, rng)
    network, marginals = noisy_distributions(binned, cards, structure, applied, rng)
    descriptors = []
    for spec, dom, marg in zip(data.schema, domains, marginals):
        numeric = spec.kind.numeric
        descriptors.append(AttributeDescriptor(
            spec,
            tuple(dom) if numeric else None,
            None if numeric else tuple(dom),
            tuple(float(p) for p in marg),
        ))
    return DataSummary(data.name, len(data), tuple(descriptors), network, applied)

