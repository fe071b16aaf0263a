"""Runtime prediction models and the MAPE metric."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import DomainError, FormatError, SchemaError, ShapeError
from ..trace_io import TraceDataset, atomic_write_text
from .ernest import ErnestModel, ernest_design, ernest_features, fit_ernest
from .gbt import GbtModel, GbtParams, fit_gbt
from .nnls import kkt_residual, nnls

__all__ = [
    "ErnestModel", "GbtModel", "GbtParams", "Prediction", "ernest_design", "ernest_features",
    "fit_ernest", "fit_gbt", "kkt_residual", "load_model", "mape", "nnls", "predict",
    "predict_dataset", "save_model",
]

MODEL_FORMAT_VERSION = 1
MIN_RUNTIME = 1e-6


@dataclass(frozen=True)
class Prediction:
    predicted_runtime: float


def _predict_columns(model, columns: Mapping[str, object]) -> np.ndarray:
    if isinstance(model, ErnestModel):
        for attr in (model.machines_attribute, model.scale_attribute):
            if attr not in columns:
                raise SchemaError(f"input lacks Ernest attribute {attr!r}")
        raw = model.predict_raw(columns[model.machines_attribute], columns[model.scale_attribute])
    elif isinstance(model, GbtModel):
        raw = model.predict_raw(model.encode(columns))
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return np.maximum(np.atleast_1d(raw), MIN_RUNTIME)


def predict(model, row: Mapping[str, object]) -> Prediction:
    """Predict one runtime from a mapping of feature name to value."""
    columns = {k: [v] for k, v in row.items()}
    return Prediction(float(_predict_columns(model, columns)[0]))


def predict_dataset(model, data: TraceDataset) -> np.ndarray:
    columns = {a.name: data.column(a.name) for a in data.features}
    return _predict_columns(model, columns)


def mape(predicted, actual) -> float:
    """Mean of |predicted - actual| / actual."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1 or p.size == 0:
        raise ShapeError(f"mape needs equal non-empty 1-d inputs, got {p.shape} and {a.shape}")
    if np.any(~(a > 0)):
        raise DomainError("actual runtimes must be strictly positive")
    return float(np.mean(np.abs(p - a) / a))


def model_to_dict(model) -> dict:
    return {"format_version": MODEL_FORMAT_VERSION, **model.to_dict()}


def model_from_dict(doc: dict):
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatError(f"model format_version {doc.get('format_version')!r} not supported")
    kind = doc.get("kind")
    if kind == "ernest":
        return ErnestModel.from_dict(doc)
    if kind == "gbt":
        return GbtModel.from_dict(doc)
    raise FormatError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return model_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a model file ({exc})") from None
