"""Ernest-style parametric scale-out model.

runtime = t0 + t1 * scale / machines + t2 * ln(machines) + t3 * machines,
with all coefficients constrained non-negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, SchemaError
from ..trace_io import TraceDataset
from .nnls import nnls

FEATURE_MAP = "ernest-v1"


def ernest_features(machines, scale) -> np.ndarray:
    if machines < 1:
        raise DomainError(f"machine count must be >= 1, got {machines}")
    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale}")
    return np.array([1.0, scale / machines, math.log(machines), float(machines)])


def ernest_design(machines, scale) -> np.ndarray:
    m = np.asarray(machines, dtype=float)
    s = np.asarray(scale, dtype=float)
    if np.any(m < 1):
        raise DomainError("machine count must be >= 1")
    if np.any(~(s > 0)):
        raise DomainError("scale must be positive")
    return np.column_stack([np.ones_like(m), s / m, np.log(m), m])


@dataclass(frozen=True)
class ErnestModel:
    theta: tuple[float, float, float, float]
    scale_attribute: str
    machines_attribute: str
    feature_map: str = FEATURE_MAP

    kind = "ernest"

    def predict_raw(self, machines, scale) -> np.ndarray:
        return ernest_design(machines, scale) @ np.asarray(self.theta)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "feature_map": self.feature_map,
            "scale_attribute": self.scale_attribute,
            "machines_attribute": self.machines_attribute,
            "theta": [float(t) for t in self.theta],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ErnestModel":
        return cls(tuple(float(t) for t in doc["theta"]), doc["scale_attribute"],
                   doc["machines_attribute"], doc.get("feature_map", FEATURE_MAP))


def fit_ernest(train: TraceDataset, scale_attr: str, machines_attr: str) -> ErnestModel:
    names = train.names
    for attr in (scale_attr, machines_attr):
        if attr not in names:
            raise SchemaError(f"Ernest attribute {attr!r} not in training schema")
    A = ernest_design(train.column(machines_attr), train.column(scale_attr))
    theta = nnls(A, train.target_values())
    return ErnestModel(tuple(float(t) for t in theta), scale_attr, machines_attr)
