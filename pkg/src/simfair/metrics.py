"""Multi-label F1 metrics: micro-, macro-, and example-averaged.

Vacuous 0/0 terms (no positives in truth or prediction for a label/sample)
count as 1.0: predicting nothing where nothing exists is correct, and rare
labels should not be penalized for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class F1Report:
    micro: float
    macro: float
    example: float


def _check_pair(Y, Y_hat):
    Y = np.asarray(Y)
    Y_hat = np.asarray(Y_hat)
    if Y.ndim != 2 or Y_hat.ndim != 2:
        raise ValueError("label matrices must be 2-D (n_samples, n_targets)")
    if Y.shape != Y_hat.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {Y_hat.shape}")
    for name, M in (("Y", Y), ("Y_hat", Y_hat)):
        if not np.isin(M, (0, 1)).all():
            raise ValueError(f"{name} entries must all be 0 or 1")
    return Y.astype(np.int64), Y_hat.astype(np.int64)


def micro_f1(Y, Y_hat) -> float:
    Y, Y_hat = _check_pair(Y, Y_hat)
    denom = Y.sum() + Y_hat.sum()
    if denom == 0:
        return 1.0
    return float(2.0 * (Y * Y_hat).sum() / denom)


def macro_f1(Y, Y_hat) -> float:
    Y, Y_hat = _check_pair(Y, Y_hat)
    tp = (Y * Y_hat).sum(axis=0)
    denom = Y.sum(axis=0) + Y_hat.sum(axis=0)
    per_label = np.where(denom > 0, 2.0 * tp / np.where(denom > 0, denom, 1), 1.0)
    return float(per_label.mean())


def example_f1(Y, Y_hat) -> float:
    Y, Y_hat = _check_pair(Y, Y_hat)
    tp = (Y * Y_hat).sum(axis=1)
    denom = Y.sum(axis=1) + Y_hat.sum(axis=1)
    per_sample = np.where(denom > 0, 2.0 * tp / np.where(denom > 0, denom, 1), 1.0)
    return float(per_sample.mean())


def f1_report(Y, Y_hat) -> F1Report:
    return F1Report(micro=micro_f1(Y, Y_hat), macro=macro_f1(Y, Y_hat), example=example_f1(Y, Y_hat))
