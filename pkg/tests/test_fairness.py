import math

import numpy as np
import pytest

from conftest import TOY6_A, TOY6_PROBS, TOY6_Y, fd_gradient, rel_err
from simfair.fairness import (
    dp_violation,
    eop_violation,
    simfair_violation,
    violation_gradient,
    weighted_group_mean,
    weighted_overall_mean,
)
from simfair.similarity import SimilaritySpec, sim

Y_ADV = np.array([1, 0])


# --- independent brute-force oracle (plain Python, no shared code) ----------

def bf_mean(rows, weights):
    total = 0.0
    acc = [0.0] * len(rows[0])
    for row, w in zip(rows, weights):
        total += w
        for j, v in enumerate(row):
            acc[j] += w * v
    if total == 0.0:
        return None
    return [v / total for v in acc]


def bf_group_mean(rows, groups, k, weights):
    sel = [(r, w) for r, g, w in zip(rows, groups, weights) if g == k]
    if not sel:
        return None
    return bf_mean([r for r, _ in sel], [w for _, w in sel])


def bf_violation(rows, groups, weights, n_groups):
    means = [bf_group_mean(rows, groups, k, weights) for k in range(1, n_groups + 1)]
    if n_groups == 2:
        if means[0] is None or means[1] is None:
            return None
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(means[0], means[1])))
    overall = bf_mean(rows, weights)
    if overall is None or any(m is None for m in means):
        return None
    total = 0.0
    for m in means:
        total += math.sqrt(sum((x - y) ** 2 for x, y in zip(overall, m)))
    return total


def bf_weights(labels, y_adv, spec):
    return [sim(spec, row, y_adv) for row in labels]


# --- weighted means ----------------------------------------------------------

def test_overall_mean_examples():
    got = weighted_overall_mean([[0.9, 0.1], [0.8, 0.2], [0.7, 0.3]], [1, 1, 1])
    np.testing.assert_allclose(got, [0.8, 0.2], atol=1e-15)

    assert weighted_overall_mean([[0.9, 0.1], [0.8, 0.2]], [0.0, 0.0]) is None

    got = weighted_overall_mean([[0.6, 0.4], [0.4, 0.6]], [1.0, 0.0])
    np.testing.assert_allclose(got, [0.6, 0.4], atol=1e-15)


def test_overall_mean_errors():
    with pytest.raises(ValueError):
        weighted_overall_mean([[0.5, 0.5]], [1.0, 1.0])
    with pytest.raises(ValueError):
        weighted_overall_mean([[0.5, 0.5]], [-1.0])


def test_group_mean_toy6():
    ones = np.ones(6)
    got = weighted_group_mean(TOY6_PROBS, TOY6_A, 1, ones)
    np.testing.assert_allclose(got, [0.8, 0.2], atol=1e-15)

    ind = (TOY6_Y == Y_ADV).all(axis=1).astype(float)
    got = weighted_group_mean(TOY6_PROBS, TOY6_A, 2, ind)
    np.testing.assert_allclose(got, [0.6, 0.4], atol=1e-15)

    ind_01 = (TOY6_Y == np.array([0, 1])).all(axis=1).astype(float)
    assert weighted_group_mean(TOY6_PROBS, TOY6_A, 1, ind_01) is None


def test_means_match_bruteforce_on_random_data():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(1, 51))
        L = int(rng.integers(1, 5))
        probs = rng.random((n, L))
        weights = rng.random(n) * (rng.random(n) > 0.2)
        groups = rng.integers(1, 4, size=n)
        got = weighted_overall_mean(probs, weights)
        exp = bf_mean(probs.tolist(), weights.tolist())
        if exp is None:
            assert got is None
        else:
            np.testing.assert_allclose(got, exp, atol=1e-12)
        for k in (1, 2, 3):
            got = weighted_group_mean(probs, groups, k, weights)
            exp = bf_group_mean(probs.tolist(), groups.tolist(), k, weights.tolist())
            if exp is None:
                assert got is None
            else:
                np.testing.assert_allclose(got, exp, atol=1e-12)


# --- violations --------------------------------------------------------------

def test_toy6_violations():
    dp = dp_violation(TOY6_PROBS, TOY6_A, 2)
    assert dp.violation == pytest.approx(0.3 * math.sqrt(2), abs=1e-12)
    assert dp.form == "pairwise"

    eop = eop_violation(TOY6_PROBS, TOY6_A, TOY6_Y, Y_ADV, 2)
    assert eop.violation == pytest.approx(0.25 * math.sqrt(2), abs=1e-12)

    sf = simfair_violation(TOY6_PROBS, TOY6_A, TOY6_Y, Y_ADV, SimilaritySpec.jaccard_exp(1.0), 2)
    # frozen from the brute-force oracle; weights (1,1,e^-0.5) / (1,e^-1,e^-0.5)
    assert sf.violation == pytest.approx(0.40033536674498826, abs=1e-12)
    oracle = bf_violation(TOY6_PROBS.tolist(), TOY6_A.tolist(),
                          bf_weights(TOY6_Y, Y_ADV, SimilaritySpec.jaccard_exp(1.0)), 2)
    assert sf.violation == pytest.approx(oracle, abs=1e-12)


def test_identical_probs_zero_violation():
    probs = np.tile([0.3, 0.7], (6, 1))
    assert dp_violation(probs, TOY6_A, 2).violation == 0.0
    assert eop_violation(probs, TOY6_A, TOY6_Y, Y_ADV, 2).violation == 0.0


def test_dp_undefined_on_empty_group():
    probs = np.array([[0.5, 0.5], [0.4, 0.6]])
    rep = dp_violation(probs, np.array([1, 2]), 3)
    assert rep.violation is None
    assert rep.per_group_means[2] is None


def test_eop_undefined_when_group_lacks_label():
    rep = eop_violation(TOY6_PROBS, TOY6_A, TOY6_Y, [0, 1], 2)
    assert rep.violation is None


def test_report_record_serialization():
    rep = eop_violation(TOY6_PROBS, TOY6_A, TOY6_Y, [0, 1], 2)
    rec = rep.to_record()
    assert rec["violation"] == "undefined"
    assert rec["y_adv"] == "01"
    assert rec["notion"] == "EOp"

    rec = dp_violation(TOY6_PROBS, TOY6_A, 2).to_record()
    assert rec["y_adv"] == ""
    assert float(rec["violation"]) == pytest.approx(0.3 * math.sqrt(2), abs=1e-12)
    assert rec["group1_mean"].count(";") == 1


def _random_dataset(rng):
    n = int(rng.integers(4, 51))
    L = int(rng.integers(1, 5))
    K = int(rng.integers(2, 4))
    probs = rng.random((n, L))
    labels = rng.integers(0, 2, size=(n, L))
    groups = rng.integers(1, K + 1, size=n)
    return probs, groups, labels, K


def test_exactness_constant_is_dp_indicator_is_eop():
    rng = np.random.default_rng(11)
    for _ in range(60):
        probs, groups, labels, K = _random_dataset(rng)
        y_adv = labels[int(rng.integers(0, len(labels)))]
        via_const = simfair_violation(probs, groups, labels, y_adv, SimilaritySpec.constant(), K)
        dp = dp_violation(probs, groups, K)
        assert via_const.violation == dp.violation  # bitwise, None included
        via_ind = simfair_violation(probs, groups, labels, y_adv, SimilaritySpec.indicator(), K)
        eop = eop_violation(probs, groups, labels, y_adv, K)
        assert via_ind.violation == eop.violation


def test_violations_match_bruteforce():
    rng = np.random.default_rng(13)
    for _ in range(40):
        probs, groups, labels, K = _random_dataset(rng)
        y_adv = rng.integers(0, 2, size=labels.shape[1])
        for spec in (SimilaritySpec.constant(), SimilaritySpec.indicator(), SimilaritySpec.jaccard_exp(2.0)):
            got = simfair_violation(probs, groups, labels, y_adv, spec, K).violation
            exp = bf_violation(probs.tolist(), groups.tolist(), bf_weights(labels, y_adv, spec), K)
            if exp is None:
                assert got is None
            else:
                assert got == pytest.approx(exp, abs=1e-12)


def test_limit_laws():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n, L, K = 40, 3, 2
        probs = rng.random((n, L))
        labels = rng.integers(0, 2, size=(n, L))
        groups = np.concatenate([[1, 2], rng.integers(1, K + 1, size=n - 2)])
        y_adv = labels[0].copy()
        labels[0], labels[1] = y_adv, y_adv  # EOp defined in both groups
        dp = dp_violation(probs, groups, K).violation
        eop = eop_violation(probs, groups, labels, y_adv, K).violation
        near_dp = simfair_violation(probs, groups, labels, y_adv, SimilaritySpec.jaccard_exp(1e-6), K).violation
        assert abs(near_dp - dp) <= 1e-4
        # gamma large enough that non-advantaged weights underflow below 1e-12
        near_eop = simfair_violation(probs, groups, labels, y_adv, SimilaritySpec.jaccard_exp(120.0), K).violation
        assert abs(near_eop - eop) <= 1e-4


def test_nonnegative_and_permutation_invariant():
    rng = np.random.default_rng(19)
    for _ in range(20):
        probs, groups, labels, K = _random_dataset(rng)
        y_adv = rng.integers(0, 2, size=labels.shape[1])
        spec = SimilaritySpec.jaccard_exp(1.5)
        rep = simfair_violation(probs, groups, labels, y_adv, spec, K)
        if rep.violation is not None:
            assert rep.violation >= 0.0
        perm = rng.permutation(len(probs))
        rep2 = simfair_violation(probs[perm], groups[perm], labels[perm], y_adv, spec, K)
        if rep.violation is None:
            assert rep2.violation is None
        else:
            assert rep2.violation == pytest.approx(rep.violation, abs=1e-12)


# --- gradients ---------------------------------------------------------------

def test_gradient_toy6_constant_sample1():
    g = violation_gradient(TOY6_PROBS, TOY6_A, TOY6_Y, Y_ADV, SimilaritySpec.constant(), 2)
    expected = (1.0 / 3.0) * np.array([0.3, -0.3]) / (0.3 * math.sqrt(2))
    np.testing.assert_allclose(g[0], expected, atol=1e-12)


def test_gradient_zero_violation_rejected():
    probs = np.tile([0.4, 0.6], (4, 1))
    with pytest.raises(ValueError, match="zero"):
        violation_gradient(probs, np.array([1, 1, 2, 2]), np.tile(Y_ADV, (4, 1)), Y_ADV,
                           SimilaritySpec.constant(), 2)


def test_gradient_undefined_returns_none():
    g = violation_gradient(TOY6_PROBS, TOY6_A, TOY6_Y, [0, 1], SimilaritySpec.indicator(), 2)
    assert g is None


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(23)
    specs = [SimilaritySpec.constant(), SimilaritySpec.indicator(), SimilaritySpec.jaccard_exp(2.0)]
    checked = 0
    while checked < 100:
        n = int(rng.integers(4, 13))
        L = int(rng.integers(1, 4))
        K = int(rng.integers(2, 4))
        probs = rng.uniform(0.05, 0.95, size=(n, L))
        labels = rng.integers(0, 2, size=(n, L))
        groups = np.concatenate([np.arange(1, K + 1), rng.integers(1, K + 1, size=n - K)])
        y_adv = labels[int(rng.integers(0, n))]
        spec = specs[checked % 3]
        rep = simfair_violation(probs, groups, labels, y_adv, spec, K)
        if rep.violation is None or rep.violation < 1e-3:
            continue
        analytic = violation_gradient(probs, groups, labels, y_adv, spec, K)

        def f(p):
            return simfair_violation(p, groups, labels, y_adv, spec, K).violation

        numeric = fd_gradient(f, probs.copy(), h=1e-6)
        assert rel_err(analytic, numeric) <= 1e-4
        checked += 1
