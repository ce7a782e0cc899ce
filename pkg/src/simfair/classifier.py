"""Fairness-regularized multi-label classifier with an sklearn-style API.

Training minimizes, per minibatch,

    mean summed binary cross-entropy  +  penalty_weight * fairness violation

where the violation is estimated on the minibatch with the similarity weights
of the configured spec.  A minibatch whose violation is undefined (a group's
weight mass vanished) contributes no penalty for that step; training stays
total either way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .fairness import dp_violation, eop_violation, simfair_violation, violation_gradient
from .metrics import f1_report
from .network import Backbone, backward, bce_grad, bce_loss, init_backbone, threshold
from .optim import AdamState, adam_step, clip_grad_norm
from .similarity import CONSTANT, SimilaritySpec


def _check_labels(Y, n_samples=None):
    Y = check_array(Y, dtype=np.int64, ensure_2d=True)
    if not np.isin(Y, (0, 1)).all():
        raise ValueError("Y entries must all be 0 or 1")
    if n_samples is not None and Y.shape[0] != n_samples:
        raise ValueError(f"Y has {Y.shape[0]} rows, expected {n_samples}")
    return Y


def _check_sensitive(sensitive, n_samples):
    a = np.asarray(sensitive)
    if a.ndim != 1 or a.shape[0] != n_samples:
        raise ValueError(f"sensitive must be a length-{n_samples} vector")
    a = a.astype(np.int64)
    if a.min() < 1:
        raise ValueError("sensitive attribute values must lie in {1..K}")
    return a


class FairMultiLabelClassifier(BaseEstimator):
    """Multi-label MLP trained with an optional group-fairness penalty.

    Parameters
    ----------
    spec : SimilaritySpec or None
        Similarity weighting of the fairness penalty.  ``constant()`` gives a
        demographic-parity regularizer, ``indicator()`` equalized
        opportunity, ``jaccard_exp(gamma)`` the interpolation between them.
        ``None`` disables the penalty.
    penalty_weight : float
        Coefficient of the fairness penalty (0 disables it).
    y_adv : sequence of 0/1 or None
        Advantaged label vector the penalty conditions on.  Required for
        indicator and jaccard_exp specs; ignored by a constant spec.
    hidden_dims : tuple of int
        Hidden layer widths; tanh activations.
    epochs, batch_size, learning_rate, max_grad_norm : training loop knobs.
        Gradients are clipped to ``max_grad_norm`` (global L2) before Adam.
    random_state : int
        Seeds both the parameter initialization and the per-epoch shuffles;
        the shuffle stream is ``default_rng([1, random_state])`` so it is
        independent of the init stream ``default_rng(random_state)``.

    Attributes
    ----------
    backbone_ : Backbone
    loss_curve_ : list of per-epoch average combined loss
    penalty_skips_ : count of minibatches whose violation was undefined
    n_features_in_, n_outputs_, n_groups_ : inferred dataset shape
    """

    def __init__(
        self,
        spec=None,
        penalty_weight=0.0,
        y_adv=None,
        hidden_dims=(64,),
        epochs=20,
        batch_size=128,
        learning_rate=1e-3,
        max_grad_norm=5.0,
        random_state=0,
    ):
        self.spec = spec
        self.penalty_weight = penalty_weight
        self.y_adv = y_adv
        self.hidden_dims = hidden_dims
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.max_grad_norm = max_grad_norm
        self.random_state = random_state

    def _validate_config(self):
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be nonnegative")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_grad_norm <= 0:
            raise ValueError("max_grad_norm must be positive")
        if self.spec is not None and not isinstance(self.spec, SimilaritySpec):
            raise ValueError("spec must be a SimilaritySpec or None")

    def fit(self, X, Y, sensitive=None):
        """Train on features X, binary label matrix Y, and group ids 1..K."""
        self._validate_config()
        if np.asarray(X).shape[0] == 0:
            raise ValueError("training set is empty")
        X = check_array(X, dtype=float, ensure_2d=True)
        Y = _check_labels(Y, X.shape[0])
        n, n_features = X.shape
        n_labels = Y.shape[1]

        penalty_on = self.spec is not None and self.penalty_weight > 0
        a = None
        if sensitive is not None:
            a = _check_sensitive(sensitive, n)
            self.n_groups_ = int(a.max())
        else:
            self.n_groups_ = None
        if penalty_on:
            if a is None:
                raise ValueError("a fairness penalty needs the sensitive attribute")
            if self.n_groups_ < 2:
                raise ValueError("the fairness penalty needs at least two groups")

        y_adv_eff = None
        if penalty_on:
            if self.y_adv is not None:
                y_adv_eff = np.asarray(self.y_adv, dtype=np.int64)
                if y_adv_eff.shape != (n_labels,):
                    raise ValueError(f"y_adv must have length {n_labels}, got shape {y_adv_eff.shape}")
            elif self.spec.kind == CONSTANT:
                # constant weights never look at y_adv
                y_adv_eff = np.zeros(n_labels, dtype=np.int64)
            else:
                raise ValueError(f"a {self.spec.kind} spec needs an advantaged label y_adv")

        dims = (n_features, *tuple(int(h) for h in self.hidden_dims), n_labels)
        backbone = init_backbone(dims, self.random_state)
        params = backbone.parameters()
        adam = AdamState(params)
        shuffle_rng = np.random.default_rng([1, self.random_state])

        self.loss_curve_ = []
        self.penalty_skips_ = 0
        for _ in range(self.epochs):
            perm = shuffle_rng.permutation(n)
            running = 0.0
            for start in range(0, n, self.batch_size):
                idx = perm[start:start + self.batch_size]
                Xb, Yb = X[idx], Y[idx]
                nb = len(idx)
                P = backbone.forward(Xb)
                batch_loss = float(bce_loss(P, Yb).mean())
                upstream = bce_grad(P, Yb) / nb
                if penalty_on:
                    ab = a[idx]
                    rep = simfair_violation(P, ab, Yb, y_adv_eff, self.spec, self.n_groups_)
                    if rep.violation is None:
                        self.penalty_skips_ += 1
                    else:
                        batch_loss += self.penalty_weight * rep.violation
                        if rep.violation > 0.0:
                            g = violation_gradient(P, ab, Yb, y_adv_eff, self.spec, self.n_groups_)
                            upstream = upstream + self.penalty_weight * g
                grads = backward(backbone, Xb, upstream)
                grads = clip_grad_norm(grads, self.max_grad_norm)
                adam_step(adam, params, grads, self.learning_rate)
                running += batch_loss * nb
            self.loss_curve_.append(running / n)

        self.backbone_ = backbone
        self.n_features_in_ = n_features
        self.n_outputs_ = n_labels
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "backbone_")
        X = check_array(X, dtype=float, ensure_2d=True)
        return self.backbone_.forward(X)

    def predict(self, X) -> np.ndarray:
        return threshold(self.predict_proba(X))


def evaluate(backbone: Backbone, X, sensitive, Y, y_adv, gamma_list, n_groups: int) -> dict:
    """Test-side metrics: F1 triple plus DP, EOp, and SimFair(gamma) violations.

    Violations are computed on the predicted probabilities, F1 on the
    thresholded predictions.  Undefined violations come back as
    ``"undefined"`` inside their records.
    """
    P = backbone.forward(np.asarray(X, dtype=float))
    preds = threshold(P)
    a = _check_sensitive(sensitive, P.shape[0])
    Y = _check_labels(Y, P.shape[0])
    f1 = f1_report(Y, preds)
    reports = [dp_violation(P, a, n_groups)]
    if y_adv is not None:
        y_adv = np.asarray(y_adv, dtype=np.int64)
        reports.append(eop_violation(P, a, Y, y_adv, n_groups))
        for gamma in gamma_list:
            reports.append(
                simfair_violation(P, a, Y, y_adv, SimilaritySpec.jaccard_exp(gamma), n_groups)
            )
    return {
        "f1": {"micro": f1.micro, "macro": f1.macro, "example": f1.example},
        "violations": [r.to_record() for r in reports],
    }


@dataclass
class TrainReport:
    """One training run's record: config echo, losses, and test metrics."""

    config: dict
    seed: int
    epoch_losses: list = field(default_factory=list)
    f1: dict | None = None
    violations: list | None = None
    penalty_skips: int = 0

    def to_json(self) -> str:
        payload = {
            "schema": "simfair/v1",
            "config": self.config,
            "seed": self.seed,
            "epoch_losses": self.epoch_losses,
            "f1": self.f1,
            "violations": self.violations,
            "penalty_skips": self.penalty_skips,
        }
        return json.dumps(payload, sort_keys=True, indent=2)
