"""Finite-sample group-fairness violation estimators and their gradients.

Everything here operates on predicted probability rows (one per sample), a
sensitive attribute in ``{1..K}``, and a similarity weight per sample.  The
weighted mean of a group estimates the group-conditional expected prediction;
a violation aggregates L2 distances between those means:

* K = 2: the single pairwise distance ``||mean_1 - mean_2||``.
* K > 2: the sum over groups of ``||overall_mean - mean_k||``, where the
  overall mean is weighted the same way.

Whenever a required denominator (a group's weight mass, or the total mass) is
zero the violation is *undefined*.  Undefined is reported as ``None`` -- never
NaN -- because this is exactly the failure mode that makes equalized
opportunity unusable on rare label groups, and callers need to branch on it
(training skips the penalty for such batches).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .similarity import SimilaritySpec, weights_for

FORM_PAIRWISE = "pairwise"
FORM_GROUP_SUM = "group-sum"


@dataclass
class ViolationReport:
    """One violation measurement together with the means that produced it.

    ``violation`` is ``None`` when undefined.  ``per_group_means`` has one
    entry per group ``k = 1..K`` (``None`` where that group's weight mass was
    zero); ``reference_mean`` is the weighted overall mean.  ``form`` records
    which aggregation was used, since the K=2 pairwise value is not the K=2
    instance of the group-sum formula.
    """

    notion: str
    gamma: float | None
    y_adv: np.ndarray | None
    per_group_means: list
    reference_mean: np.ndarray | None
    violation: float | None
    form: str

    def defined(self) -> bool:
        return self.violation is not None

    def to_record(self) -> dict:
        """Flat key/value view for CSV and JSON result files."""

        def vec(v):
            return "" if v is None else ";".join(repr(float(x)) for x in v)

        rec = {
            "notion": self.notion,
            "gamma": "" if self.gamma is None else repr(float(self.gamma)),
            "y_adv": "" if self.y_adv is None else "".join(str(int(b)) for b in self.y_adv),
            "violation": "undefined" if self.violation is None else repr(float(self.violation)),
            "form": self.form,
            "reference_mean": vec(self.reference_mean),
        }
        for k, mean in enumerate(self.per_group_means, start=1):
            rec[f"group{k}_mean"] = vec(mean)
        return rec


def _check_aligned(probs: np.ndarray, *others):
    if probs.ndim != 2:
        raise ValueError(f"probs must be a 2-D (n_samples, n_targets) array, got shape {probs.shape}")
    for name, arr, ndim in others:
        if arr.ndim != ndim:
            raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
        if arr.shape[0] != probs.shape[0]:
            raise ValueError(
                f"{name} has {arr.shape[0]} rows but probs has {probs.shape[0]}"
            )


def weighted_overall_mean(probs, weights):
    """Weighted mean prediction ``sum_i w_i p_i / sum_i w_i``.

    Returns a length-L vector, or ``None`` when the weight mass is zero.
    """
    P = np.asarray(probs, dtype=float)
    w = np.asarray(weights, dtype=float)
    _check_aligned(P, ("weights", w, 1))
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total == 0.0:
        return None
    return (w[:, None] * P).sum(axis=0) / total


def weighted_group_mean(probs, sensitive, k, weights):
    """Weighted mean prediction restricted to samples with ``sensitive == k``.

    ``None`` when the restricted weight mass is zero (empty group or all
    weights in the group vanish).
    """
    P = np.asarray(probs, dtype=float)
    a = np.asarray(sensitive)
    w = np.asarray(weights, dtype=float)
    _check_aligned(P, ("sensitive", a, 1), ("weights", w, 1))
    mask = a == k
    if not mask.any():
        return None
    return weighted_overall_mean(P[mask], w[mask])


def _violation_parts(P, a, w, n_groups):
    """Group means, reference mean, form, and the violation value (or None)."""
    group_means = [weighted_group_mean(P, a, k, w) for k in range(1, n_groups + 1)]
    reference = weighted_overall_mean(P, w)
    if n_groups == 2:
        form = FORM_PAIRWISE
        g1, g2 = group_means
        value = None if g1 is None or g2 is None else float(np.linalg.norm(g1 - g2))
    else:
        form = FORM_GROUP_SUM
        if reference is None or any(g is None for g in group_means):
            value = None
        else:
            value = float(sum(np.linalg.norm(reference - g) for g in group_means))
    return group_means, reference, form, value


def simfair_violation(probs, sensitive, labels, y_adv, spec: SimilaritySpec, n_groups: int) -> ViolationReport:
    """Violation of similarity-induced fairness for the given spec and ``y_adv``."""
    if n_groups < 2:
        raise ValueError(f"n_groups must be at least 2, got {n_groups}")
    P = np.asarray(probs, dtype=float)
    a = np.asarray(sensitive)
    _check_aligned(P, ("sensitive", a, 1), ("labels", np.asarray(labels), 2))
    w = weights_for(spec, labels, y_adv)
    group_means, reference, form, value = _violation_parts(P, a, w, n_groups)
    gamma = spec.gamma if spec.kind == "jaccard_exp" else None
    return ViolationReport(
        notion="SimFair",
        gamma=gamma,
        y_adv=np.asarray(y_adv, dtype=np.int64),
        per_group_means=group_means,
        reference_mean=reference,
        violation=value,
        form=form,
    )


def dp_violation(probs, sensitive, n_groups: int) -> ViolationReport:
    """Demographic-parity violation: constant weights, no advantaged label."""
    if n_groups < 2:
        raise ValueError(f"n_groups must be at least 2, got {n_groups}")
    P = np.asarray(probs, dtype=float)
    a = np.asarray(sensitive)
    _check_aligned(P, ("sensitive", a, 1))
    w = np.ones(P.shape[0])
    group_means, reference, form, value = _violation_parts(P, a, w, n_groups)
    return ViolationReport(
        notion="DP",
        gamma=None,
        y_adv=None,
        per_group_means=group_means,
        reference_mean=reference,
        violation=value,
        form=form,
    )


def eop_violation(probs, sensitive, labels, y_adv, n_groups: int) -> ViolationReport:
    """Equalized-opportunity violation: indicator weights on ``y == y_adv``."""
    report = simfair_violation(probs, sensitive, labels, y_adv, SimilaritySpec.indicator(), n_groups)
    return replace(report, notion="EOp")


def violation_gradient(probs, sensitive, labels, y_adv, spec: SimilaritySpec, n_groups: int):
    """Gradient of the scalar violation with respect to each predicted row.

    Returns an ``(n_samples, n_targets)`` array.  ``None`` when the violation
    is undefined (the caller skips the penalty); raises if the violation is
    exactly zero, where the L2 norm has no gradient and the penalty is already
    at its minimum.  Zero-distance terms inside the K>2 sum contribute the
    zero subgradient.
    """
    if n_groups < 2:
        raise ValueError(f"n_groups must be at least 2, got {n_groups}")
    P = np.asarray(probs, dtype=float)
    a = np.asarray(sensitive)
    _check_aligned(P, ("sensitive", a, 1), ("labels", np.asarray(labels), 2))
    w = weights_for(spec, labels, y_adv)
    group_means, reference, form, value = _violation_parts(P, a, w, n_groups)
    if value is None:
        return None
    if value == 0.0:
        raise ValueError("violation is zero; the gradient is undefined at the norm's minimum")

    n, L = P.shape
    group_mass = np.array([w[a == k].sum() for k in range(1, n_groups + 1)])
    grad = np.zeros((n, L))

    if form == FORM_PAIRWISE:
        diff = group_means[0] - group_means[1]
        unit = diff / np.linalg.norm(diff)
        sign = np.where(a == 1, 1.0, -1.0)
        grad = (sign * w / group_mass[a - 1])[:, None] * unit[None, :]
        return grad

    total_mass = w.sum()
    units = []
    for g in group_means:
        d = reference - g
        norm = np.linalg.norm(d)
        units.append(np.zeros(L) if norm == 0.0 else d / norm)
    unit_sum = np.sum(units, axis=0)
    unit_by_sample = np.stack([units[k - 1] for k in a])
    grad = w[:, None] * (unit_sum[None, :] / total_mass - unit_by_sample / group_mass[a - 1][:, None])
    return grad
