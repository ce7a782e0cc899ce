import math

import numpy as np
import pytest

from conftest import fd_gradient, rel_err
from simfair.network import (
    Backbone,
    backward,
    bce_grad,
    bce_loss,
    init_backbone,
    load_backbone,
    save_backbone,
    threshold,
)


def test_init_deterministic_and_counts():
    b1 = init_backbone((4, 8, 3), seed=42)
    b2 = init_backbone((4, 8, 3), seed=42)
    for W1, W2 in zip(b1.parameters(), b2.parameters()):
        np.testing.assert_array_equal(W1, W2)
    assert b1.num_params() == 4 * 8 + 8 + 8 * 3 + 3 == 67
    b3 = init_backbone((4, 8, 3), seed=43)
    assert any(not np.array_equal(p, q) for p, q in zip(b1.parameters(), b3.parameters()))


def test_init_scale_and_validation():
    b = init_backbone((100, 10), seed=0)
    assert np.abs(b.weights[0]).max() <= 1.0 / math.sqrt(100)
    with pytest.raises(ValueError):
        init_backbone((), seed=0)
    with pytest.raises(ValueError):
        init_backbone((5,), seed=0)
    with pytest.raises(ValueError):
        init_backbone((4, 0, 2), seed=0)


def test_forward_zero_params_gives_half():
    b = Backbone((3, 2), [np.zeros((3, 2))], [np.zeros(2)])
    out = b.forward(np.array([[1.0, -2.0, 3.0], [0.0, 0.0, 0.0]]))
    np.testing.assert_array_equal(out, 0.5 * np.ones((2, 2)))


def test_forward_single_linear_unit():
    b = Backbone((1, 1), [np.ones((1, 1))], [np.zeros(1)])
    assert b.forward(np.array([0.0])) == pytest.approx(0.5)


def test_forward_range_under_extreme_params():
    b = Backbone((2, 2), [np.full((2, 2), 1e4)], [np.full(2, -1e4)])
    out = b.forward(np.array([[1e3, 1e3], [-1e3, -1e3]]))
    assert ((out > 0.0) & (out < 1.0)).all()


def test_forward_dimension_error():
    b = init_backbone((3, 2), seed=0)
    with pytest.raises(ValueError):
        b.forward(np.zeros((4, 4)))


def test_threshold_boundary():
    np.testing.assert_array_equal(threshold([0.5, 0.49]), [1, 0])
    np.testing.assert_array_equal(threshold(np.zeros(4)), np.zeros(4, dtype=int))
    np.testing.assert_array_equal(threshold([1.0, 0.7, 0.2]), [1, 1, 0])


def test_bce_examples():
    assert bce_loss([0.5, 0.5], [1, 0]) == pytest.approx(2 * math.log(2), abs=1e-12)
    # perfect fit after clamping is only a clamp-sized residue away from zero
    assert bce_loss([1.0, 0.0], [1, 0]) <= 2 * 1.1e-7
    assert bce_loss([1e-7, 1.0], [1, 1]) == pytest.approx(-math.log(1e-7), rel=1e-6)
    with pytest.raises(ValueError):
        bce_loss([0.5, 0.5], [1, 0, 1])


def test_bce_batched_shape():
    batch = bce_loss(np.full((3, 2), 0.5), np.array([[1, 0], [0, 0], [1, 1]]))
    assert batch.shape == (3,)
    np.testing.assert_allclose(batch, 2 * math.log(2), atol=1e-12)


def test_bce_grad_matches_fd():
    rng = np.random.default_rng(5)
    p = rng.uniform(0.05, 0.95, size=(4, 3))
    y = rng.integers(0, 2, size=(4, 3))
    analytic = bce_grad(p, y)
    numeric = fd_gradient(lambda q: float(bce_loss(q, y).sum()), p.copy(), h=1e-7)
    assert rel_err(analytic, numeric) <= 1e-6


def test_backward_zero_upstream():
    b = init_backbone((3, 4, 2), seed=1)
    X = np.random.default_rng(0).standard_normal((5, 3))
    grads = backward(b, X, np.zeros((5, 2)))
    for g in grads:
        np.testing.assert_array_equal(g, np.zeros_like(g))


def test_backward_linear_closed_form():
    # single sigmoid layer with BCE: parameter gradient is x^T (p - y)
    W = np.array([[0.3], [-0.2]])
    b = Backbone((2, 1), [W], [np.zeros(1)])
    X = np.array([[1.0, 2.0], [0.5, -1.0]])
    y = np.array([[1.0], [0.0]])
    p = b.forward(X)
    grads = backward(b, X, bce_grad(p, y))
    np.testing.assert_allclose(grads[0], X.T @ (p - y), atol=1e-12)
    np.testing.assert_allclose(grads[1], (p - y).sum(axis=0), atol=1e-12)


def test_backward_matches_fd_on_random_nets():
    rng = np.random.default_rng(9)
    for _ in range(5):
        dims = (int(rng.integers(2, 5)), int(rng.integers(3, 6)), int(rng.integers(1, 4)))
        net = init_backbone(dims, seed=int(rng.integers(0, 100)))
        for p in net.parameters():
            p += 0.3 * rng.standard_normal(p.shape)
        X = rng.standard_normal((6, dims[0]))
        y = rng.integers(0, 2, size=(6, dims[-1]))

        analytic = backward(net, X, bce_grad(net.forward(X), y) / 6.0)
        params = net.parameters()
        flat = np.concatenate([p.ravel() for p in params])

        def loss_at(vec):
            off = 0
            for p in params:
                p[...] = vec[off:off + p.size].reshape(p.shape)
                off += p.size
            return float(bce_loss(net.forward(X), y).mean())

        numeric = fd_gradient(loss_at, flat.copy(), h=1e-5)
        loss_at(flat)  # restore
        flat_analytic = np.concatenate([g.ravel() for g in analytic])
        assert rel_err(flat_analytic, numeric) <= 1e-4


def test_save_load_round_trip(tmp_path):
    net = init_backbone((3, 5, 2), seed=7)
    path = tmp_path / "model.txt"
    save_backbone(net, path)
    loaded = load_backbone(path)
    assert loaded.layer_dims == net.layer_dims
    for p, q in zip(net.parameters(), loaded.parameters()):
        np.testing.assert_array_equal(p, q)
    # byte-stable across repeated saves
    path2 = tmp_path / "model2.txt"
    save_backbone(net, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_load_rejects_unknown_version(tmp_path):
    net = init_backbone((2, 2), seed=0)
    path = tmp_path / "model.txt"
    save_backbone(net, path)
    text = path.read_text().replace("v1", "v9", 1)
    path.write_text(text)
    with pytest.raises(ValueError, match="version"):
        load_backbone(path)
    (tmp_path / "junk.txt").write_text("not a model\n")
    with pytest.raises(ValueError):
        load_backbone(tmp_path / "junk.txt")
