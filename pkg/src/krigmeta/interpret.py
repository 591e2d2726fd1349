"""Feature importance from fitted activities and sample grouping from Psi.

Larger ``theta_j`` means the response decorrelates faster along feature
``j``, so features are ranked by their fitted activity. The correlation
matrix of the training samples at the fitted parameters is reordered by
hierarchical clustering to expose groups of samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.cluster.hierarchy import leaves_list, linkage
from scipy.spatial.distance import squareform

from . import kernel as kern
from .errors import DimensionMismatch
from .kernel import CorrelationMatrix
from .kriging import KrigingModel

INACTIVE_FACTOR = 10.0


@dataclass(frozen=True)
class ImportanceEntry:
    index: int
    name: str
    theta: float
    score: float
    inactive: bool


@dataclass(frozen=True)
class ImportanceReport:
    entries: Tuple[ImportanceEntry, ...]
    theta_bounds: Tuple[float, float]

    @property
    def order(self) -> List[int]:
        return [e.index for e in self.entries]

    @property
    def names(self) -> List[str]:
        return [e.name for e in self.entries]


def log_score(theta, bounds: Tuple[float, float]):
    """Position of ``log10(theta)`` within the log10 bounds, in [0, 1]."""
    lo, hi = math.log10(bounds[0]), math.log10(bounds[1])
    return np.clip((np.log10(theta) - lo) / (hi - lo), 0.0, 1.0)


def rank_thetas(theta, names: Sequence[str], bounds: Tuple[float, float]) -> ImportanceReport:
    theta = np.asarray(theta, dtype=float)
    if len(names) != theta.size:
        raise DimensionMismatch(f"{len(names)} names for {theta.size} features")
    # stable sort on -theta keeps input order among ties
    order = np.argsort(-theta, kind="stable")
    scores = log_score(theta, bounds)
    entries = tuple(
        ImportanceEntry(int(j), str(names[j]), float(theta[j]), float(scores[j]),
                        bool(theta[j] <= INACTIVE_FACTOR * bounds[0]))
        for j in order
    )
    return ImportanceReport(entries, tuple(bounds))


def feature_importance(model: KrigingModel, names: Optional[Sequence[str]] = None) -> ImportanceReport:
    if names is None:
        names = [f"x{j + 1}" for j in range(model.k)]
    return rank_thetas(model.params.theta, names, model.theta_bounds)


@dataclass(frozen=True)
class GroupExplanation:
    psi: CorrelationMatrix
    order: np.ndarray
    labels: Optional[List[str]] = None

    def ordered(self) -> np.ndarray:
        o = self.order
        return self.psi.psi[np.ix_(o, o)]


def cluster_order(psi) -> np.ndarray:
    """Dendrogram leaf order of average-linkage clustering on ``1 - psi``."""
    P = psi.psi if isinstance(psi, CorrelationMatrix) else np.asarray(psi, dtype=float)
    n = P.shape[0]
    if n <= 2:
        return np.arange(n)
    D = 1.0 - P
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    D = np.maximum(D, 0.0)
    Z = linkage(squareform(D, checks=False), method="average")
    return leaves_list(Z).astype(int)


def group_explanation(model: KrigingModel, labels: Optional[Sequence[str]] = None) -> GroupExplanation:
    """Correlation matrix of the training samples and its cluster ordering."""
    psi = kern.build_matrix(model.X, model.params, model.nugget)
    return GroupExplanation(psi, cluster_order(psi), list(labels) if labels is not None else None)


def block_contrast(G: GroupExplanation, groups) -> Tuple[float, float]:
    """Mean off-diagonal correlation within and between the given sample groups."""
    groups = np.asarray(groups)
    P = G.psi.psi
    same = groups[:, None] == groups[None, :]
    off = ~np.eye(P.shape[0], dtype=bool)
    return float(P[same & off].mean()), float(P[~same].mean())


def heatmap_csv(G: GroupExplanation, header: str = "") -> str:
    """Cluster-ordered matrix as CSV: permutation row first, then psi rows."""
    lines = [f"# {header}"] if header else []
    lines.append(",".join(str(int(i)) for i in G.order))
    for row in G.ordered():
        lines.append(",".join(f"{v:.9g}" for v in row))
    return "\n".join(lines) + "\n"


def read_heatmap_csv(text: str) -> Tuple[np.ndarray, np.ndarray]:
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    order = np.array([int(v) for v in rows[0].split(",")])
    M = np.array([[float(v) for v in ln.split(",")] for ln in rows[1:]])
    return order, M


def heatmap_pgm(G: GroupExplanation, header: str = "") -> str:
    """Plain (P2) portable graymap of the ordered matrix, pixel = round(255 * psi)."""
    M = G.ordered()
    n = M.shape[0]
    pix = np.rint(255.0 * np.clip(M, 0.0, 1.0)).astype(int)
    lines = ["P2"]
    if header:
        lines.append(f"# {header}")
    lines += [f"{n} {n}", "255"]
    lines += [" ".join(str(v) for v in row) for row in pix]
    return "\n".join(lines) + "\n"
