"""A fitted Kriging model bundled with its data scaling, plus the model file format.

Model files are JSON documents preceded by a single ``#`` comment line
carrying the manifest hash. Floats are written by ``repr`` (shortest
round-trip decimal), so reloading reproduces the fit exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import kriging
from .errors import DimensionMismatch, KrigmetaError
from .kernel import KernelParams
from .kriging import FitConfig, KrigingModel
from .metrics import ScalingRecord, normalize, standardize_response

SCHEMA = "krigmeta.model/1"


class ModelFileError(KrigmetaError, ValueError):
    pass


@dataclass(frozen=True)
class Surrogate:
    model: KrigingModel
    scaling: ScalingRecord
    feature_names: List[str]
    target: str = "y"

    @property
    def used_features(self) -> List[str]:
        return [self.feature_names[j] for j in self.scaling.kept]

    def _rows(self, X_raw) -> np.ndarray:
        X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
        if X_raw.shape[1] != len(self.feature_names):
            raise DimensionMismatch(f"expected {len(self.feature_names)} feature columns, got {X_raw.shape[1]}")
        return self.scaling.transform(X_raw)

    def predict(self, X_raw) -> np.ndarray:
        z = kriging.predict_mean(self.model, self._rows(X_raw))
        return self.scaling.unscale_response(z)

    def predict_sd(self, X_raw) -> np.ndarray:
        s2 = kriging.predict_variance(self.model, self._rows(X_raw))
        return np.sqrt(s2) * self.scaling.response_scale

    def expected_improvement(self, X_raw, y_best: float) -> np.ndarray:
        rows = self._rows(X_raw)
        best = float(self.scaling.scale_response(y_best))
        return kriging.expected_improvement(self.model, rows, best) * self.scaling.response_scale


def fit_surrogate(X_raw, y_raw, feature_names: Optional[Sequence[str]] = None,
                  config: Optional[FitConfig] = None, target: str = "y") -> Surrogate:
    """Normalize features to [0, 1], standardize the response and fit."""
    X_raw = np.asarray(X_raw, dtype=float)
    if X_raw.ndim == 1:
        X_raw = X_raw[:, None]
    names = list(feature_names) if feature_names is not None else [f"x{j + 1}" for j in range(X_raw.shape[1])]
    if len(names) != X_raw.shape[1]:
        raise DimensionMismatch("one name per feature column is required")
    Z, rec = normalize(X_raw)
    ys, rec = standardize_response(y_raw, rec)
    model = kriging.fit(Z, ys, config)
    return Surrogate(model, rec, names, target)


def to_document(s: Surrogate) -> dict:
    m = s.model
    return {
        "schema": SCHEMA,
        "target": s.target,
        "feature_names": list(s.feature_names),
        "scaling": s.scaling.to_dict(),
        "theta": m.params.theta.tolist(),
        "p": m.params.p.tolist(),
        "theta_bounds": list(m.theta_bounds),
        "nugget": m.nugget,
        "mu_hat": m.mu_hat,
        "sigma2_hat": m.sigma2_hat,
        "log_likelihood": m.log_likelihood,
        "X": m.X.tolist(),
        "y": m.y.tolist(),
    }


def from_document(doc: dict) -> Surrogate:
    if doc.get("schema") != SCHEMA:
        raise ModelFileError(f"unsupported model schema {doc.get('schema')!r}")
    try:
        params = KernelParams(doc["theta"], doc["p"])
        nugget = float(doc["nugget"])
        model = kriging.model_at(np.asarray(doc["X"], dtype=float), np.asarray(doc["y"], dtype=float),
                                 params, nugget=nugget, nugget_max=nugget,
                                 theta_bounds=tuple(doc["theta_bounds"]))
        rec = ScalingRecord.from_dict(doc["scaling"])
    except (KeyError, TypeError) as exc:
        raise ModelFileError(f"malformed model document: {exc}") from exc
    return Surrogate(model, rec, list(doc["feature_names"]), doc.get("target", "y"))


def dumps(s: Surrogate, header: str = "") -> str:
    body = json.dumps(to_document(s), indent=1, sort_keys=True)
    prefix = f"# {header}\n" if header else ""
    return prefix + body + "\n"


def loads(text: str) -> Surrogate:
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    try:
        doc = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file is not valid JSON: {exc}") from exc
    return from_document(doc)


def save(s: Surrogate, path, header: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(s, header))


def load(path) -> Surrogate:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
