"""Preprocessing and fidelity metrics."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import AllColumnsConstant, ConstantVector, DimensionMismatch, EmptyInput, TooFewPoints

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalingRecord:
    """Min-max scaling of the retained feature columns plus response standardization.

    ``kept`` indexes the raw columns that survived normalization; constant
    columns are listed in ``dropped``.
    """

    col_min: np.ndarray
    col_max: np.ndarray
    kept: Tuple[int, ...]
    dropped: Tuple[int, ...] = ()
    response_center: float = 0.0
    response_scale: float = 1.0

    def transform(self, X_raw, warn: bool = True) -> np.ndarray:
        X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
        Xk = X_raw[:, list(self.kept)]
        Z = (Xk - self.col_min) / (self.col_max - self.col_min)
        if warn and (np.any(Z < 0) or np.any(Z > 1)):
            # extrapolation is kept, not clamped
            warnings.warn("inputs fall outside the training range; predictions extrapolate", stacklevel=2)
        return Z

    def inverse(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * (self.col_max - self.col_min) + self.col_min

    def scale_response(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.response_center) / self.response_scale

    def unscale_response(self, z):
        return np.asarray(z, dtype=float) * self.response_scale + self.response_center

    def to_dict(self) -> dict:
        return {
            "col_min": self.col_min.tolist(),
            "col_max": self.col_max.tolist(),
            "kept": list(self.kept),
            "dropped": list(self.dropped),
            "response_center": self.response_center,
            "response_scale": self.response_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingRecord":
        return cls(np.asarray(d["col_min"], dtype=float), np.asarray(d["col_max"], dtype=float),
                   tuple(d["kept"]), tuple(d["dropped"]), float(d["response_center"]),
                   float(d["response_scale"]))


def normalize(X_raw) -> Tuple[np.ndarray, ScalingRecord]:
    """Map every non-constant column onto [0, 1].

    Constant columns carry no information for the kernel and are dropped
    with a warning.
    """
    X_raw = np.asarray(X_raw, dtype=float)
    if X_raw.ndim == 1:
        X_raw = X_raw[:, None]
    if X_raw.shape[0] < 2:
        raise TooFewPoints("normalization needs at least two rows")
    lo = X_raw.min(axis=0)
    hi = X_raw.max(axis=0)
    kept = tuple(int(j) for j in np.flatnonzero(hi > lo))
    dropped = tuple(int(j) for j in np.flatnonzero(~(hi > lo)))
    if not kept:
        raise AllColumnsConstant("every feature column is constant")
    if dropped:
        warnings.warn(f"dropping constant columns {list(dropped)}", stacklevel=2)
    rec = ScalingRecord(lo[list(kept)], hi[list(kept)], kept, dropped)
    return rec.transform(X_raw, warn=False), rec


def denormalize(Z, rec: ScalingRecord) -> np.ndarray:
    return rec.inverse(Z)


def standardize_response(y, rec: ScalingRecord) -> Tuple[np.ndarray, ScalingRecord]:
    """Center and scale `y` to mean 0, sd 1 and store the map in `rec`."""
    y = np.asarray(y, dtype=float)
    center = float(np.mean(y))
    scale = float(np.std(y))
    if not scale > 0:
        scale = 1.0
    rec = ScalingRecord(rec.col_min, rec.col_max, rec.kept, rec.dropped, center, scale)
    return rec.scale_response(y), rec


def _pair(a, b) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise DimensionMismatch(f"lengths differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise EmptyInput("empty input")
    return a, b


def rmse(a, b) -> float:
    a, b = _pair(a, b)
    d = np.abs(a - b)
    top = float(d.max())
    if top == 0 or not math.isfinite(top):
        return top
    # scaled so tiny or huge differences neither underflow nor overflow when squared
    return top * math.sqrt(float(np.mean((d / top) ** 2)))


def pearson_r(a, b) -> float:
    a, b = _pair(a, b)
    if a.size < 2:
        raise TooFewPoints("correlation needs at least two points")
    da = a - a.mean()
    db = b - b.mean()
    na = math.sqrt(float(da @ da))
    nb = math.sqrt(float(db @ db))
    if na == 0 or nb == 0:
        raise ConstantVector("correlation is undefined for a constant vector")
    return float(np.clip((da @ db) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class Fidelity:
    rmse: float
    r: float
    units: str = "response units"

    def cell(self, digits: int = 3) -> str:
        """Table cell ``RMSE(r)``, e.g. ``0.042(0.95)``."""
        return f"{_sig(self.rmse, digits)}({self.r:.2f})"


def _sig(v: float, digits: int) -> str:
    if v == 0:
        return "0"
    return f"{v:.{digits}g}" if abs(v) >= 1e-3 else f"{v:.1g}"


def fidelity_report(model, X_eval, y_blackbox) -> Fidelity:
    """RMSE and Pearson r of surrogate predictions against black-box outputs.

    `model` is either a :class:`~krigmeta.surrogate.Surrogate` (raw feature
    units, response reported in original units) or a bare
    :class:`~krigmeta.kriging.KrigingModel` with already-normalized rows.
    """
    if hasattr(model, "predict"):
        pred = model.predict(X_eval)
        units = "original response units"
    else:
        from .kriging import predict_mean

        pred = predict_mean(model, np.atleast_2d(np.asarray(X_eval, dtype=float)))
        units = "model response units"
    return Fidelity(rmse(pred, y_blackbox), pearson_r(pred, y_blackbox), units)
