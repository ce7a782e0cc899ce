"""Label-space similarity functions.

A similarity ``s(y, y') in [0, 1]`` between binary label vectors decides how
much a sample contributes when fairness is estimated with respect to an
advantaged label ``y_adv``.  Three kinds are supported:

* ``constant`` -- every pair scores 1; weighting by it recovers demographic
  parity.
* ``indicator`` -- 1 iff the vectors are equal; recovers equalized
  opportunity.
* ``jaccard_exp`` -- ``exp(gamma * (Jaccard(y, y') - 1))``; interpolates
  between the two as ``gamma`` runs from 0 to infinity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONSTANT = "constant"
INDICATOR = "indicator"
JACCARD_EXP = "jaccard_exp"

_KINDS = (CONSTANT, INDICATOR, JACCARD_EXP)


@dataclass(frozen=True)
class SimilaritySpec:
    """Which similarity to use; ``gamma`` only matters for ``jaccard_exp``."""

    kind: str
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown similarity kind {self.kind!r}; expected one of {_KINDS}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be a finite nonnegative real, got {self.gamma!r}")

    @classmethod
    def constant(cls) -> "SimilaritySpec":
        return cls(CONSTANT)

    @classmethod
    def indicator(cls) -> "SimilaritySpec":
        return cls(INDICATOR)

    @classmethod
    def jaccard_exp(cls, gamma: float) -> "SimilaritySpec":
        return cls(JACCARD_EXP, float(gamma))


def _as_label(y, name: str = "label") -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must have at least one target")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} entries must all be 0 or 1")
    return arr.astype(np.int64)


def _check_same_length(y: np.ndarray, y2: np.ndarray):
    if y.shape != y2.shape:
        raise ValueError(f"label vectors have different lengths: {y.shape[0]} vs {y2.shape[0]}")


def jaccard(y, y2) -> float:
    """Jaccard score of the index sets of present targets.

    Two all-zero vectors denote the same "no targets" outcome and score 1.0;
    an all-zero vector against a nonempty one scores 0.0.
    """
    y = _as_label(y)
    y2 = _as_label(y2, "second label")
    _check_same_length(y, y2)
    union = int(np.sum(y | y2))
    if union == 0:
        return 1.0
    return float(np.sum(y & y2)) / union


def sim(spec: SimilaritySpec, y, y2) -> float:
    """Similarity of two label vectors under ``spec``."""
    y = _as_label(y)
    y2 = _as_label(y2, "second label")
    _check_same_length(y, y2)
    if spec.kind == CONSTANT:
        return 1.0
    if spec.kind == INDICATOR:
        return 1.0 if np.array_equal(y, y2) else 0.0
    return float(np.exp(spec.gamma * (jaccard(y, y2) - 1.0)))


def weights_for(spec: SimilaritySpec, labels, y_adv) -> np.ndarray:
    """Per-sample weights ``s(labels[i], y_adv)`` as a float array.

    Vectorized counterpart of :func:`sim`; large ``gamma`` may underflow
    individual weights to exactly 0, which downstream estimators treat via
    their zero-denominator rule.
    """
    Y = np.asarray(labels)
    if Y.ndim != 2:
        raise ValueError(f"labels must be a 2-D (n_samples, n_targets) array, got shape {Y.shape}")
    if not np.isin(Y, (0, 1)).all():
        raise ValueError("label entries must all be 0 or 1")
    Y = Y.astype(np.int64)
    adv = _as_label(y_adv, "y_adv")
    if Y.shape[1] != adv.shape[0]:
        raise ValueError(f"labels have {Y.shape[1]} targets but y_adv has {adv.shape[0]}")
    if spec.kind == CONSTANT:
        return np.ones(Y.shape[0])
    if spec.kind == INDICATOR:
        return (Y == adv).all(axis=1).astype(float)
    inter = Y @ adv
    union = Y.sum(axis=1) + adv.sum() - inter
    jac = np.divide(inter, union, out=np.ones(Y.shape[0]), where=union > 0)
    return np.exp(spec.gamma * (jac - 1.0))
