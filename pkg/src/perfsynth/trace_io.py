"""Loading, validating, sampling and splitting runtime-trace tables.

A trace table is a CSV file with one job execution per line. Which columns
matter, and how they are typed, is declared in a schema file rather than
inferred::

    {
      "job": "sort",
      "attributes": [
        {"name": "machine_type", "kind": "categorical", "role": "feature"},
        {"name": "instance_count", "kind": "numeric-integer", "role": "feature"},
        {"name": "runtime", "kind": "numeric-continuous", "role": "target"}
      ],
      "ernest": {"scale": "data_size_MB", "machines": "instance_count"}
    }

The ``ernest`` block is optional and only names the columns the Ernest model
consumes.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    ParseError,
    RangeError,
    SchemaError,
    ValidationError,
)

BUNDLED_JOBS = ("sort", "grep", "linear_regression", "kmeans", "pagerank")


class Kind(str, enum.Enum):
    CONTINUOUS = "numeric-continuous"
    INTEGER = "numeric-integer"
    CATEGORICAL = "categorical"

    @property
    def numeric(self) -> bool:
        return self is not Kind.CATEGORICAL


class Role(str, enum.Enum):
    FEATURE = "feature"
    TARGET = "target"


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: Kind
    role: Role = Role.FEATURE

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise SchemaError("attribute name must be a non-empty string")
        try:
            object.__setattr__(self, "kind", Kind(self.kind))
            object.__setattr__(self, "role", Role(self.role))
        except ValueError as exc:
            raise SchemaError(f"attribute {self.name!r}: {exc}") from None

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind.value, "role": self.role.value}


def validate_schema(schema: Sequence[AttributeSpec]) -> tuple[AttributeSpec, ...]:
    schema = tuple(schema)
    names = [a.name for a in schema]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise SchemaError(f"duplicate attribute names: {dup}")
    targets = [a for a in schema if a.role is Role.TARGET]
    if len(targets) != 1:
        raise SchemaError(f"schema needs exactly one target attribute, found {len(targets)}")
    if not targets[0].kind.numeric:
        raise SchemaError(f"target {targets[0].name!r} must be numeric")
    return schema


@dataclass(frozen=True)
class JobSchema:
    """Attribute list plus the column names the Ernest model reads."""

    attributes: tuple[AttributeSpec, ...]
    job: str = ""
    scale_attribute: str | None = None
    machines_attribute: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "attributes", validate_schema(self.attributes))
        names = {a.name for a in self.attributes}
        for attr in (self.scale_attribute, self.machines_attribute):
            if attr is not None and attr not in names:
                raise SchemaError(f"ernest attribute {attr!r} not in schema")

    def __iter__(self):
        return iter(self.attributes)

    def __len__(self):
        return len(self.attributes)

    def to_dict(self) -> dict:
        out = {"job": self.job, "attributes": [a.to_dict() for a in self.attributes]}
        if self.scale_attribute or self.machines_attribute:
            out["ernest"] = {"scale": self.scale_attribute, "machines": self.machines_attribute}
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def parse_schema(doc) -> JobSchema:
    if isinstance(doc, list):
        doc = {"attributes": doc}
    try:
        attrs = tuple(
            AttributeSpec(a["name"], a["kind"], a.get("role", "feature"))
            for a in doc["attributes"]
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed schema document: missing key {exc}") from None
    ernest = doc.get("ernest") or {}
    return JobSchema(attrs, doc.get("job", ""), ernest.get("scale"), ernest.get("machines"))


def load_schema(path) -> JobSchema:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return parse_schema(doc)


@dataclass(frozen=True)
class TraceDataset:
    """Immutable table of job executions aligned to a schema."""

    schema: tuple[AttributeSpec, ...]
    rows: tuple[tuple, ...]
    name: str = ""
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "schema", validate_schema(self.schema))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if not self._checked:
            _validate_rows(self.schema, self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.schema]

    @property
    def target(self) -> AttributeSpec:
        return next(a for a in self.schema if a.role is Role.TARGET)

    @property
    def features(self) -> list[AttributeSpec]:
        return [a for a in self.schema if a.role is Role.FEATURE]

    def index(self, name: str) -> int:
        for i, a in enumerate(self.schema):
            if a.name == name:
                return i
        raise SchemaError(f"attribute {name!r} not in schema of {self.name or 'dataset'}")

    def column(self, name: str) -> np.ndarray:
        return self._columns[self.index(name)]

    def target_values(self) -> np.ndarray:
        return self.column(self.target.name)

    @cached_property
    def _columns(self) -> list[np.ndarray]:
        cols = list(zip(*self.rows)) if self.rows else [() for _ in self.schema]
        out = []
        for spec, col in zip(self.schema, cols):
            dtype = float if spec.kind.numeric else object
            out.append(np.asarray(col, dtype=dtype))
        return out

    def with_rows(self, rows: Iterable[tuple]) -> "TraceDataset":
        # rows drawn from an already validated dataset need no re-check
        return TraceDataset(self.schema, tuple(rows), self.name, _checked=True)

    @classmethod
    def from_columns(cls, schema, columns: Sequence[Sequence], name: str = "") -> "TraceDataset":
        return cls(tuple(schema), tuple(zip(*columns)), name)


def _validate_rows(schema, rows):
    if not rows:
        raise EmptyInputError("dataset has no rows")
    width = len(schema)
    for r, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ValidationError(f"row {r}: expected {width} values, got {len(row)}", row=r)
        for spec, value in zip(schema, row):
            if spec.kind is Kind.CATEGORICAL:
                ok = isinstance(value, str)
            elif spec.kind is Kind.INTEGER:
                ok = isinstance(value, (int, np.integer)) and not isinstance(value, bool)
            else:
                ok = isinstance(value, (float, int, np.floating, np.integer)) and math.isfinite(value)
            if not ok:
                raise ValidationError(
                    f"row {r}: value {value!r} is not valid for {spec.kind.value} "
                    f"attribute {spec.name!r}", row=r)
            if spec.role is Role.TARGET and not value > 0:
                raise ValidationError(
                    f"row {r}: target {spec.name!r} must be strictly positive, got {value!r}",
                    row=r)


def _parse_cell(text: str, spec: AttributeSpec, row: int):
    if text == "":
        raise ParseError(f"row {row}: missing value for {spec.name!r}", row=row)
    if spec.kind is Kind.CATEGORICAL:
        return text
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"row {row}: {text!r} in numeric column {spec.name!r} is not a number",
                         row=row) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}: non-finite value {text!r} in {spec.name!r}", row=row)
    if spec.kind is Kind.INTEGER:
        try:
            return int(text)
        except ValueError:
            if value != int(value):
                raise ParseError(f"row {row}: {text!r} in integer column {spec.name!r}",
                                 row=row) from None
            return int(value)
    return value


def load_csv(path, schema, name: str | None = None) -> TraceDataset:
    """Read a trace CSV, keeping only (and reordering to) the schema columns."""
    attrs = validate_schema(schema.attributes if isinstance(schema, JobSchema) else schema)
    path = Path(path)
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        positions = []
        for spec in attrs:
            if spec.name not in header:
                raise SchemaError(f"{path}: column {spec.name!r} missing from header")
            positions.append(header.index(spec.name))
        rows = []
        for r, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(f"{path}: row {r} has {len(record)} fields, "
                                 f"header has {len(header)}", row=r)
            rows.append(tuple(_parse_cell(record[p].strip(), spec, r)
                              for p, spec in zip(positions, attrs)))
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    if name is None:
        name = getattr(schema, "job", "") or path.stem
    try:
        return TraceDataset(attrs, tuple(rows), name)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}", row=exc.row) from None


def _format_cell(value, spec: AttributeSpec) -> str:
    if spec.kind is Kind.CATEGORICAL:
        return value
    if spec.kind is Kind.INTEGER:
        return str(int(value))
    return repr(float(value))


def dumps_csv(data: TraceDataset) -> str:
    lines = [",".join(_quote(n) for n in data.names)]
    for row in data.rows:
        lines.append(",".join(
            _quote(_format_cell(v, s)) if s.kind is Kind.CATEGORICAL else _format_cell(v, s)
            for v, s in zip(row, data.schema)))
    return "\n".join(lines) + "\n"


def _quote(text: str) -> str:
    if any(ch in text for ch in ',"\n\r') or text != text.strip():
        return '"' + text.replace('"', '""') + '"'
    return text


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(data: TraceDataset, path) -> None:
    atomic_write_text(path, dumps_csv(data))


def sample_rows(data: TraceDataset, n: int, seed: int) -> TraceDataset:
    """Draw ``n`` distinct rows uniformly without replacement."""
    if not 1 <= n <= len(data):
        raise RangeError(f"cannot sample {n} rows from {len(data)}")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(data), size=n, replace=False)
    return data.with_rows(data.rows[i] for i in picked)


def split(data: TraceDataset, test_fraction: float, seed: int) -> tuple[TraceDataset, TraceDataset]:
    if len(data) < 2:
        raise RangeError(f"cannot split {len(data)} row(s) into train and test")
    if not 0.0 < test_fraction < 1.0:
        raise RangeError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(data)
    n_test = min(max(math.floor(test_fraction * n + 0.5), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test = data.with_rows(data.rows[i] for i in perm[:n_test])
    train = data.with_rows(data.rows[i] for i in perm[n_test:])
    return train, test


def bundled_schema(job: str) -> JobSchema:
    ref = resources.files("perfsynth") / "data" / "schemas" / f"{job}.json"
    if not ref.is_file():
        raise SchemaError(f"no bundled schema for job {job!r}; known: {', '.join(BUNDLED_JOBS)}")
    return parse_schema(json.loads(ref.read_text(encoding="utf-8")))


def bundled_trace_path(job: str) -> Path:
    return Path(str(resources.files("perfsynth") / "data" / "traces" / f"{job}.csv"))


def load_bundled(job: str) -> TraceDataset:
    schema = bundled_schema(job)
    return load_csv(bundled_trace_path(job), schema, name=job)
