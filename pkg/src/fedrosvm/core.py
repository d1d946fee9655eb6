"""Shared primitives: samples, models, norms, losses, and evaluation metrics.

Everything downstream (worst-case construction, federation, baselines) is built
on the small vocabulary defined here: a labeled sample (x, y) with y in {-1,+1},
a linear model w, a transportation cost over feature space plus a label-flip
price kappa, and the hinge loss max{0, 1 - y<w,x>}.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NormKind",
    "LabeledSample",
    "DatasetView",
    "GlobalModel",
    "TransportCostSpec",
    "Metrics",
    "hinge_loss",
    "hinge_losses",
    "transport_cost",
    "feature_norm",
    "dual_norm",
    "evaluate",
]


class NormKind(enum.Enum):
    """Feature-space norm used in the transportation cost."""

    L1 = "l1"
    LINF = "linf"


@dataclass(frozen=True)
class LabeledSample:
    """One observation: feature vector ``x`` and label ``y`` in {-1, +1}."""

    x: np.ndarray
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.x.ndim != 1:
            raise ValueError("sample features must be a 1-d vector")
        if self.y not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.y!r}")


@dataclass
class DatasetView:
    """An ordered collection of labeled samples backed by dense arrays.

    Parameters
    ----------
    X : (N, P) array
        Feature rows.
    y : (N,) array
        Labels in {-1, +1}.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-d (N, P)")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y length must match number of rows in X")
        bad = ~np.isin(self.y, (-1, 1))
        if bad.any():
            raise ValueError(f"labels must be -1/+1, offending value {self.y[bad][0]!r}")
        self.y = self.y.astype(int)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def sample(self, i: int) -> LabeledSample:
        return LabeledSample(self.X[i], int(self.y[i]))

    def subset(self, idx) -> "DatasetView":
        idx = np.asarray(idx)
        return DatasetView(self.X[idx].copy(), self.y[idx].copy())


@dataclass
class GlobalModel:
    """Linear classifier; predicts sign(<w, x>) with ties going to +1."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.ndim != 1:
            raise ValueError("w must be a 1-d vector")

    def predict(self, X: np.ndarray) -> np.ndarray:
        scores = np.asarray(X, dtype=float) @ self.w
        return np.where(scores >= 0.0, 1, -1)


@dataclass(frozen=True)
class TransportCostSpec:
    """Ground cost: ||x - x'|| under ``norm`` plus ``kappa`` per label flip."""

    norm: NormKind = NormKind.L1
    kappa: float = 1.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")


@dataclass
class Metrics:
    """Binary classification metrics with +1 as the positive class.

    ``confusion`` is [[TP, FN], [FP, TN]]. ``mccr`` is the macro-averaged
    per-class accuracy (classes absent from the data are left out of the
    average). ``f1`` is 0 when the denominator 2TP + FP + FN vanishes.
    """

    f1: float
    mccr: float
    confusion: np.ndarray
    n: int = 0

    def __post_init__(self):
        self.confusion = np.asarray(self.confusion, dtype=int)


def hinge_loss(w: np.ndarray, sample: LabeledSample) -> float:
    """Hinge loss max{0, 1 - y<w, x>} of a linear model at one sample."""
    w = np.asarray(w, dtype=float)
    if w.shape != sample.x.shape:
        raise ValueError(f"dimension mismatch: w has shape {w.shape}, x has {sample.x.shape}")
    return float(max(0.0, 1.0 - sample.y * float(w @ sample.x)))


def hinge_losses(w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized hinge losses over rows of X."""
    margins = y * (np.asarray(X, dtype=float) @ np.asarray(w, dtype=float))
    return np.maximum(0.0, 1.0 - margins)


def feature_norm(v: np.ndarray, norm: NormKind) -> float:
    """||v|| under the transportation cost's feature norm."""
    v = np.asarray(v, dtype=float)
    if norm is NormKind.L1:
        return float(np.abs(v).sum())
    return float(np.abs(v).max()) if v.size else 0.0


def dual_norm(v: np.ndarray, norm: NormKind) -> float:
    """Dual of ``norm`` evaluated at v: L1 -> max|v_i|, LInf -> sum|v_i|."""
    v = np.asarray(v, dtype=float)
    if norm is NormKind.L1:
        return float(np.abs(v).max()) if v.size else 0.0
    return float(np.abs(v).sum())


def transport_cost(a: LabeledSample, b: LabeledSample, spec: TransportCostSpec) -> float:
    """Ground transportation cost between two labeled samples."""
    if a.x.shape != b.x.shape:
        raise ValueError("dimension mismatch between samples")
    flip = spec.kappa if a.y != b.y else 0.0
    return feature_norm(a.x - b.x, spec.norm) + flip


def evaluate(model: GlobalModel, data: DatasetView) -> Metrics:
    """Confusion counts, F1 for the +1 class, and macro-averaged accuracy."""
    pred = model.predict(data.X)
    y = data.y
    tp = int(np.sum((y == 1) & (pred == 1)))
    fn = int(np.sum((y == 1) & (pred == -1)))
    fp = int(np.sum((y == -1) & (pred == 1)))
    tn = int(np.sum((y == -1) & (pred == -1)))

    denom = 2 * tp + fp + fn
    f1 = 2.0 * tp / denom if denom > 0 else 0.0

    rates = []
    if tp + fn > 0:
        rates.append(tp / (tp + fn))
    if tn + fp > 0:
        rates.append(tn / (tn + fp))
    mccr = float(np.mean(rates)) if rates else 0.0

    return Metrics(f1=f1, mccr=mccr, confusion=[[tp, fn], [fp, tn]], n=data.n)
