import numpy as np
from hypothesis import settings

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("ci")

# Six-sample fixture used across the estimator tests:
# (predicted probs, sensitive group, true label) per row.
TOY6_PROBS = np.array([
    [0.9, 0.1],
    [0.8, 0.2],
    [0.6, 0.4],
    [0.4, 0.6],
    [0.7, 0.3],
    [0.5, 0.5],
])
TOY6_A = np.array([1, 1, 2, 2, 1, 2])
TOY6_Y = np.array([
    [1, 0],
    [1, 0],
    [1, 0],
    [0, 1],
    [1, 1],
    [1, 1],
])


def fd_gradient(f, x, h=1e-6):
    """Central finite differences of a scalar function at array x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        ix = it.multi_index
        orig = x[ix]
        x[ix] = orig + h
        fp = f(x)
        x[ix] = orig - h
        fm = f(x)
        x[ix] = orig
        g[ix] = (fp - fm) / (2.0 * h)
    return g


def rel_err(got, expected):
    got = np.asarray(got, dtype=float)
    expected = np.asarray(expected, dtype=float)
    denom = max(float(np.linalg.norm(expected)), 1e-12)
    return float(np.linalg.norm(got - expected)) / denom
