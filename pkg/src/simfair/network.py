"""Sigmoid-output feedforward backbone.

Hidden layers use tanh, the output layer sigmoid, so predictions are joint
probability rows in (0, 1).  Gradients are analytic (plain chain rule); there
is no autodiff, which keeps the combined classification + fairness gradient
checkable against finite differences.
"""

from __future__ import annotations

import numpy as np

# clamp applied inside the cross-entropy so logs stay finite
PROB_CLAMP = 1e-7
# forward outputs are clipped this far away from {0, 1}
_OUTPUT_EPS = 1e-12

FORMAT_TAG = "simfair-backbone"
FORMAT_VERSION = 1


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Backbone:
    """An MLP with fixed layer sizes ``(n_features, hidden..., n_targets)``."""

    def __init__(self, layer_dims, weights, biases):
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self.weights = [np.asarray(W, dtype=float) for W in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("parameter count does not match layer_dims")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_dims[i], self.layer_dims[i + 1])
            if W.shape != expect or b.shape != (expect[1],):
                raise ValueError(f"layer {i} parameters have shape {W.shape}/{b.shape}, expected {expect}")

    @property
    def n_features(self) -> int:
        return self.layer_dims[0]

    @property
    def n_targets(self) -> int:
        return self.layer_dims[-1]

    def num_params(self) -> int:
        return sum((din + 1) * dout for din, dout in zip(self.layer_dims[:-1], self.layer_dims[1:]))

    def parameters(self) -> list:
        """Flat parameter list [W0, b0, W1, b1, ...]; arrays are the live ones."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def _activations(self, X):
        """Layer inputs [X, h1, ..., h_{d}] followed by the output probs."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected input of shape (n, {self.n_features}), got {X.shape}")
        acts = [X]
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ W + b)
            acts.append(h)
        p = sigmoid(h @ self.weights[-1] + self.biases[-1])
        np.clip(p, _OUTPUT_EPS, 1.0 - _OUTPUT_EPS, out=p)
        return acts, p

    def forward(self, X) -> np.ndarray:
        """Predicted probability rows for a batch; accepts a single row too."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        _, p = self._activations(X)
        return p[0] if single else p


def init_backbone(layer_dims, seed) -> Backbone:
    """Fresh backbone with weights ~ U(-1, 1)/sqrt(fan_in) and zero biases.

    Deterministic for a fixed seed (PCG64 stream).
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError("layer_dims needs at least an input and an output size")
    if any(d <= 0 for d in dims):
        raise ValueError(f"layer sizes must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Backbone(dims, weights, biases)


def threshold(probs) -> np.ndarray:
    """Elementwise decision ``1(p >= 0.5)``; the 0.5 boundary maps to 1."""
    p = np.asarray(probs, dtype=float)
    return (p >= 0.5).astype(np.int64)


def bce_loss(probs, labels):
    """Binary cross-entropy summed over targets, probabilities clamped first.

    For a single (probs, labels) pair returns a float; for batches the
    per-sample sums as an array.
    """
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: probs {p.shape} vs labels {y.shape}")
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    terms = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    total = terms.sum(axis=-1)
    return float(total) if p.ndim == 1 else total


def bce_grad(probs, labels) -> np.ndarray:
    """d(bce_loss)/d(probs), zero where the clamp is active."""
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: probs {p.shape} vs labels {y.shape}")
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    g = (pc - y) / (pc * (1.0 - pc))
    active = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    return np.where(active, g, 0.0)


def backward(backbone: Backbone, X, upstream) -> list:
    """Parameter gradients of a batch loss given dL/d(probs) per sample.

    ``upstream`` must already carry any batch averaging and penalty scaling.
    Returns the gradient list aligned with ``backbone.parameters()``.
    """
    X = np.asarray(X, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    acts, p = backbone._activations(X)
    if upstream.shape != p.shape:
        raise ValueError(f"upstream gradient has shape {upstream.shape}, expected {p.shape}")
    n_layers = len(backbone.weights)
    grads_W = [None] * n_layers
    grads_b = [None] * n_layers
    delta = upstream * p * (1.0 - p)
    for li in reversed(range(n_layers)):
        grads_W[li] = acts[li].T @ delta
        grads_b[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ backbone.weights[li].T) * (1.0 - acts[li] ** 2)
    out = []
    for gW, gb in zip(grads_W, grads_b):
        out.extend((gW, gb))
    return out


def save_backbone(backbone: Backbone, path):
    """Versioned plain-text dump with full round-trip float precision."""
    lines = [f"{FORMAT_TAG} v{FORMAT_VERSION}", "dims " + " ".join(str(d) for d in backbone.layer_dims)]
    for i, (W, b) in enumerate(zip(backbone.weights, backbone.biases)):
        lines.append(f"layer {i}")
        for row in W:
            lines.append("w " + " ".join(repr(float(v)) for v in row))
        lines.append("b " + " ".join(repr(float(v)) for v in b))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_backbone(path) -> Backbone:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith(FORMAT_TAG):
        raise ValueError(f"not a {FORMAT_TAG} file: {path}")
    version = lines[0][len(FORMAT_TAG):].strip()
    if version != f"v{FORMAT_VERSION}":
        raise ValueError(f"unsupported model format version {version!r} (expected v{FORMAT_VERSION})")
    if len(lines) < 2 or not lines[1].startswith("dims "):
        raise ValueError("missing dims line")
    dims = tuple(int(t) for t in lines[1].split()[1:])
    weights, biases = [], []
    idx = 2
    for li, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        if idx >= len(lines) or lines[idx] != f"layer {li}":
            raise ValueError(f"malformed model file: expected 'layer {li}' at line {idx + 1}")
        idx += 1
        rows = []
        for _ in range(fan_in):
            if idx >= len(lines) or not lines[idx].startswith("w "):
                raise ValueError(f"malformed model file: expected weight row at line {idx + 1}")
            rows.append([float(t) for t in lines[idx].split()[1:]])
            idx += 1
        if idx >= len(lines) or not lines[idx].startswith("b "):
            raise ValueError(f"malformed model file: expected bias row at line {idx + 1}")
        bias = [float(t) for t in lines[idx].split()[1:]]
        idx += 1
        W = np.array(rows, dtype=float)
        b = np.array(bias, dtype=float)
        if W.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise ValueError(f"layer {li} block has wrong shape in {path}")
        weights.append(W)
        biases.append(b)
    return Backbone(dims, weights, biases)
