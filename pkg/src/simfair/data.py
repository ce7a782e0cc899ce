"""Dataset ingestion, splitting, label-group utilities, and synthetic data.

CSV ingestion is driven by a plain-text manifest with ``key = value`` lines::

    # comments and blank lines are ignored
    csv = relative/or/absolute/path.csv
    feature = colname                 # numeric used as-is, else one-hot encoded
    sensitive = colname
    sensitive_map = <rule> -> <k>     # rule: literal value | lo..hi range | else
    target = colname                  # cells must already be 0/1
    target = colname == value         # 1 iff the cell equals value
    target = colname onehot           # one binary target per distinct value

``sensitive_map`` rules are tried in file order; ``else`` matches anything,
numeric ranges are inclusive.  The CSV dialect is fixed: UTF-8, comma
delimiter, first row header, ``.`` decimal point, no quoted embedded
delimiters.  Cells that are empty or ``?`` count as missing and drop the row.

Feature standardization happens at :func:`split` time, with statistics from
the training rows applied to both splits.
"""

from __future__ import annotations

import csv as _csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import sigmoid

MISSING_MARKERS = ("", "?")


class LoadError(ValueError):
    """A CSV or manifest could not be turned into a valid dataset."""


@dataclass
class Dataset:
    """Aligned feature/sensitive/label columns; immutable by convention."""

    X: np.ndarray
    a: np.ndarray
    Y: np.ndarray
    n_groups: int
    feature_names: tuple
    sensitive_name: str
    target_names: tuple

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.a = np.asarray(self.a, dtype=np.int64)
        self.Y = np.asarray(self.Y, dtype=np.int64)
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.a.ndim != 1 or self.Y.ndim != 2:
            raise ValueError("X and Y must be 2-D, a must be 1-D")
        if self.a.shape[0] != n or self.Y.shape[0] != n:
            raise ValueError("X, a, and Y must have the same number of rows")
        if self.n_groups < 2:
            raise ValueError("a dataset needs at least two demographic groups")
        if n and (self.a.min() < 1 or self.a.max() > self.n_groups):
            raise ValueError(f"sensitive values must lie in 1..{self.n_groups}")
        if not np.isin(self.Y, (0, 1)).all():
            raise ValueError("Y entries must all be 0 or 1")
        self.feature_names = tuple(self.feature_names)
        self.target_names = tuple(self.target_names)
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names does not match X")
        if len(self.target_names) != self.Y.shape[1]:
            raise ValueError("target_names does not match Y")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_labels(self) -> int:
        return self.Y.shape[1]

    def take(self, idx) -> "Dataset":
        return Dataset(
            X=self.X[idx],
            a=self.a[idx],
            Y=self.Y[idx],
            n_groups=self.n_groups,
            feature_names=self.feature_names,
            sensitive_name=self.sensitive_name,
            target_names=self.target_names,
        )


# --- manifests -------------------------------------------------------------

@dataclass
class Manifest:
    csv_path: Path
    features: list
    sensitive: str
    sensitive_rules: list  # (kind, payload, k): ("literal", str, k) | ("range", (lo, hi), k) | ("else", None, k)
    targets: list          # (column, mode, payload): mode in {"binary", "equals", "onehot"}


def parse_manifest(path) -> Manifest:
    path = Path(path)
    csv_path = None
    features, targets, rules = [], [], []
    sensitive = None
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise LoadError(f"cannot read manifest {path}: {exc}") from exc
    for ln_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise LoadError(f"{path}:{ln_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "csv":
            csv_path = (path.parent / value) if not Path(value).is_absolute() else Path(value)
        elif key == "feature":
            features.append(value)
        elif key == "sensitive":
            sensitive = value
        elif key == "sensitive_map":
            if "->" not in value:
                raise LoadError(f"{path}:{ln_no}: sensitive_map needs '<rule> -> <k>'")
            rule, _, k_str = value.rpartition("->")
            rule = rule.strip()
            try:
                k = int(k_str.strip())
            except ValueError as exc:
                raise LoadError(f"{path}:{ln_no}: group index {k_str.strip()!r} is not an integer") from exc
            if k < 1:
                raise LoadError(f"{path}:{ln_no}: group indices start at 1")
            if rule == "else":
                rules.append(("else", None, k))
            elif ".." in rule:
                lo_s, _, hi_s = rule.partition("..")
                try:
                    rules.append(("range", (float(lo_s), float(hi_s)), k))
                except ValueError as exc:
                    raise LoadError(f"{path}:{ln_no}: bad numeric range {rule!r}") from exc
            else:
                rules.append(("literal", rule, k))
        elif key == "target":
            if value.endswith(" onehot"):
                targets.append((value[: -len(" onehot")].strip(), "onehot", None))
            elif "==" in value:
                col, _, lit = value.partition("==")
                targets.append((col.strip(), "equals", lit.strip()))
            else:
                targets.append((value, "binary", None))
        else:
            raise LoadError(f"{path}:{ln_no}: unknown manifest key {key!r}")
    if csv_path is None:
        raise LoadError(f"{path}: manifest is missing a 'csv =' line")
    if sensitive is None:
        raise LoadError(f"{path}: manifest is missing a 'sensitive =' line")
    if not rules:
        raise LoadError(f"{path}: manifest needs at least one sensitive_map rule")
    if not features:
        raise LoadError(f"{path}: manifest declares no features")
    if not targets:
        raise LoadError(f"{path}: manifest declares no targets")
    return Manifest(csv_path=csv_path, features=features, sensitive=sensitive,
                    sensitive_rules=rules, targets=targets)


def _map_sensitive(cell: str, rules, where: str) -> int:
    for kind, payload, k in rules:
        if kind == "literal" and cell == payload:
            return k
        if kind == "range":
            try:
                v = float(cell)
            except ValueError:
                continue
            lo, hi = payload
            if lo <= v <= hi:
                return k
        if kind == "else":
            return k
    raise LoadError(f"unmapped sensitive value {cell!r} ({where})")


def _is_numeric_column(values) -> bool:
    for v in values:
        try:
            float(v)
        except ValueError:
            return False
    return True


def load(manifest) -> Dataset:
    """Materialize the dataset a manifest describes."""
    if not isinstance(manifest, Manifest):
        manifest = parse_manifest(manifest)
    try:
        with open(manifest.csv_path, "r", encoding="utf-8", newline="") as fh:
            reader = _csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise LoadError(f"cannot read CSV {manifest.csv_path}: {exc}") from exc
    if not rows:
        raise LoadError(f"{manifest.csv_path}: CSV is empty")
    header = rows[0]
    col_idx = {name: i for i, name in enumerate(header)}
    used_cols = list(manifest.features) + [manifest.sensitive] + [c for c, _, _ in manifest.targets]
    for col in used_cols:
        if col not in col_idx:
            raise LoadError(f"{manifest.csv_path}: column {col!r} not found in CSV header")

    kept = []
    for row in rows[1:]:
        if len(row) != len(header):
            raise LoadError(f"{manifest.csv_path}: row with {len(row)} cells, header has {len(header)}")
        if any(row[col_idx[c]].strip() in MISSING_MARKERS for c in used_cols):
            continue
        kept.append(row)
    if not kept:
        raise LoadError(f"{manifest.csv_path}: no usable rows after dropping missing values")

    def column(name):
        i = col_idx[name]
        return [row[i].strip() for row in kept]

    # features: numeric pass through, categorical expand to one-hot
    feat_cols, feat_names = [], []
    for col in manifest.features:
        values = column(col)
        if _is_numeric_column(values):
            feat_cols.append(np.array([float(v) for v in values]))
            feat_names.append(col)
        else:
            for val in sorted(set(values)):
                feat_cols.append(np.array([1.0 if v == val else 0.0 for v in values]))
                feat_names.append(f"{col}={val}")
    X = np.column_stack(feat_cols)

    a = np.array(
        [_map_sensitive(v, manifest.sensitive_rules, f"column {manifest.sensitive!r}") for v in column(manifest.sensitive)],
        dtype=np.int64,
    )
    n_groups = max(k for _, _, k in manifest.sensitive_rules)
    if n_groups < 2:
        raise LoadError("sensitive_map must define at least two groups")

    target_cols, target_names = [], []
    for col, mode, payload in manifest.targets:
        values = column(col)
        if mode == "binary":
            out = []
            for v in values:
                if v not in ("0", "1"):
                    raise LoadError(f"target column {col!r} has non-binary value {v!r}; add a binarization rule")
                out.append(int(v))
            target_cols.append(np.array(out, dtype=np.int64))
            target_names.append(col)
        elif mode == "equals":
            target_cols.append(np.array([1 if v == payload else 0 for v in values], dtype=np.int64))
            target_names.append(f"{col}=={payload}")
        else:  # onehot
            for val in sorted(set(values)):
                target_cols.append(np.array([1 if v == val else 0 for v in values], dtype=np.int64))
                target_names.append(f"{col}={val}")
    Y = np.column_stack(target_cols)

    return Dataset(X=X, a=a, Y=Y, n_groups=n_groups, feature_names=tuple(feat_names),
                   sensitive_name=manifest.sensitive, target_names=tuple(target_names))


# --- splitting and label-group helpers --------------------------------------

def split(dataset: Dataset, train_fraction: float, seed) -> tuple:
    """Seeded shuffle-split into (train, test); floor(N * fraction) train rows.

    Feature columns of both halves are standardized with the training split's
    mean and standard deviation (constant columns are left centered).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be strictly between 0 and 1, got {train_fraction}")
    n = dataset.n_samples
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(math.floor(n * train_fraction))
    train = dataset.take(perm[:n_train])
    test = dataset.take(perm[n_train:])
    mu = train.X.mean(axis=0) if n_train else np.zeros(dataset.n_features)
    sd = train.X.std(axis=0) if n_train else np.ones(dataset.n_features)
    sd = np.where(sd == 0.0, 1.0, sd)
    train.X = (train.X - mu) / sd
    test.X = (test.X - mu) / sd
    return train, test


def rank_label_groups(dataset: Dataset) -> list:
    """Distinct label vectors with counts, most frequent first.

    Ties break on the lexicographically smaller bitstring so "the k-th
    largest group" is reproducible.
    """
    counts = {}
    for row in dataset.Y:
        key = tuple(int(b) for b in row)
        counts[key] = counts.get(key, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], "".join(map(str, kv[0]))))
    return [(np.array(key, dtype=np.int64), cnt) for key, cnt in ordered]


def subsample_advantaged(dataset: Dataset, y_adv, keep_fraction: float, seed) -> Dataset:
    """Keep ceil(keep_fraction * n_adv) of the samples labeled ``y_adv``.

    Non-advantaged rows are untouched and row order is preserved.  When
    ``y_adv`` does not occur, warns and returns the dataset unchanged.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    y_adv = np.asarray(y_adv, dtype=np.int64)
    adv_idx = np.flatnonzero((dataset.Y == y_adv).all(axis=1))
    if adv_idx.size == 0:
        warnings.warn("advantaged label not present in the dataset; subsample is a no-op")
        return dataset
    n_keep = int(math.ceil(keep_fraction * adv_idx.size))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(adv_idx, size=n_keep, replace=False)
    drop = np.setdiff1d(adv_idx, chosen)
    mask = np.ones(dataset.n_samples, dtype=bool)
    mask[drop] = False
    return dataset.take(np.flatnonzero(mask))


# --- synthetic long-tailed biased generator ---------------------------------

# Fixed construction constants.  The head label (the frequent one) carries a
# strong feature signal, tail labels a weak one partially correlated with the
# head, mirroring tabular fairness data where one outcome is predictable and
# the auxiliary targets are noisy and co-occur with it.  Group feature means
# sit at +/- (GROUP_SEP / 2) along a direction orthogonal to every label
# weight, so at bias = 0 the labels carry no group information at all.
W_HEAD = 2.5
W_TAIL = 0.8
LABEL_CORR = 0.7
GROUP_SEP = 2.0
BASE_FREQ = 0.6


@dataclass(frozen=True)
class SynthSpec:
    """Knobs of the synthetic benchmark generator.

    ``decay`` sets the long tail (target marginal of label l is
    ``BASE_FREQ * l ** -decay``); ``bias`` scales how strongly label logits
    depend on the group.
    """

    n_samples: int
    n_features: int
    n_labels: int
    n_groups: int
    proportions: tuple
    decay: float
    bias: float
    seed: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.n_labels < 1:
            raise ValueError("n_labels must be positive")
        if self.n_features <= self.n_labels:
            raise ValueError("n_features must exceed n_labels (the group direction is orthogonalized against every label weight)")
        if self.n_groups < 2:
            raise ValueError("n_groups must be at least 2")
        object.__setattr__(self, "proportions", tuple(float(p) for p in self.proportions))
        if len(self.proportions) != self.n_groups:
            raise ValueError("proportions must have one entry per group")
        if any(p <= 0 for p in self.proportions) or abs(sum(self.proportions) - 1.0) > 1e-9:
            raise ValueError("proportions must be positive and sum to 1")
        if self.decay <= 0:
            raise ValueError("decay must be positive")
        if self.bias < 0:
            raise ValueError("bias must be nonnegative")


def benchmark_spec(seed=1, n_samples=20_000, bias=1.0) -> SynthSpec:
    """The canonical desk-scale benchmark used by the acceptance suite."""
    return SynthSpec(
        n_samples=n_samples, n_features=12, n_labels=6, n_groups=2,
        proportions=(0.5, 0.5), decay=1.5, bias=bias, seed=seed,
    )


_HERM_NODES, _HERM_WEIGHTS = np.polynomial.hermite_e.hermegauss(61)
_HERM_WEIGHTS = _HERM_WEIGHTS / math.sqrt(2.0 * math.pi)


def _mean_sigmoid(b: float, scale: float) -> float:
    """E[sigmoid(b + scale * Z)] for standard normal Z, by quadrature."""
    return float(np.sum(_HERM_WEIGHTS * sigmoid(b + scale * _HERM_NODES)))


def _solve_offset(freq: float, scale: float) -> float:
    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _mean_sigmoid(mid, scale) < freq:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gen_synthetic(spec: SynthSpec) -> Dataset:
    """Deterministic biased long-tailed multi-label data.

    Labels follow ``y_l ~ Bernoulli(sigmoid(w_l . x + b_l + bias * c_l * g_a))``
    where ``g_a`` runs linearly from +1 (group 1) to -1 (group K) and the bias
    pattern ``c`` loads on the head label (``c_1 = 1``, tails 0).  Offsets
    ``b_l`` are calibrated so marginals follow ``BASE_FREQ * l ** -decay``.
    Group feature means are shifted along a direction orthogonal to every
    ``w_l``, so at ``bias = 0`` the labels carry no group information while
    the features still do.
    """
    rng = np.random.default_rng(spec.seed)
    K, L, M, N = spec.n_groups, spec.n_labels, spec.n_features, spec.n_samples

    a = rng.choice(np.arange(1, K + 1), size=N, p=np.asarray(spec.proportions))

    # head label gets a strong weight row; tail rows mix the head direction
    # (co-occurrence) with an orthogonal direction of their own
    raw = rng.standard_normal((L, M))
    raw = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    head_dir = raw[0]
    W = np.empty_like(raw)
    W[0] = W_HEAD * head_dir
    for l in range(1, L):
        perp = raw[l] - (raw[l] @ head_dir) * head_dir
        perp = perp / np.linalg.norm(perp)
        W[l] = W_TAIL * (LABEL_CORR * head_dir + math.sqrt(1.0 - LABEL_CORR**2) * perp)

    u = rng.standard_normal(M)
    q, _ = np.linalg.qr(W.T)  # orthonormal basis of the label-weight span
    u = u - q @ (q.T @ u)
    norm_u = np.linalg.norm(u)
    if norm_u < 1e-10:
        raise ValueError("could not build a group direction orthogonal to the label weights")
    u = u / norm_u

    group_polarity = (K + 1.0 - 2.0 * np.arange(1, K + 1)) / (K - 1.0)
    mu = group_polarity[a - 1][:, None] * (GROUP_SEP / 2.0) * u[None, :]
    X = rng.standard_normal((N, M)) + mu

    freqs = BASE_FREQ * np.arange(1, L + 1) ** (-spec.decay)
    scales = np.concatenate(([W_HEAD], np.full(L - 1, W_TAIL)))
    b = np.array([_solve_offset(f, s) for f, s in zip(freqs, scales)])

    bias_pattern = np.concatenate(([1.0], np.zeros(L - 1)))
    logits = X @ W.T + b + spec.bias * group_polarity[a - 1][:, None] * bias_pattern[None, :]
    probs = sigmoid(logits)
    Y = (rng.random((N, L)) < probs).astype(np.int64)

    return Dataset(
        X=X, a=a, Y=Y, n_groups=K,
        feature_names=tuple(f"x{i}" for i in range(1, M + 1)),
        sensitive_name="a",
        target_names=tuple(f"y{j}" for j in range(1, L + 1)),
    )


# --- export (round-trippable through load) ----------------------------------

def export_dataset(dataset: Dataset, prefix) -> tuple:
    """Write ``<prefix>.csv`` and ``<prefix>.manifest``; returns both paths.

    Floats are written with full round-trip precision, so loading the
    manifest reproduces the dataset exactly.
    """
    prefix = Path(prefix)
    csv_path = prefix.with_suffix(".csv")
    manifest_path = prefix.with_suffix(".manifest")
    prefix.parent.mkdir(parents=True, exist_ok=True)

    header = list(dataset.feature_names) + [dataset.sensitive_name] + list(dataset.target_names)
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(dataset.n_samples):
            cells = [repr(float(v)) for v in dataset.X[i]]
            cells.append(str(int(dataset.a[i])))
            cells.extend(str(int(v)) for v in dataset.Y[i])
            fh.write(",".join(cells) + "\n")

    lines = [f"csv = {csv_path.name}"]
    lines += [f"feature = {name}" for name in dataset.feature_names]
    lines.append(f"sensitive = {dataset.sensitive_name}")
    lines += [f"sensitive_map = {k} -> {k}" for k in range(1, dataset.n_groups + 1)]
    lines += [f"target = {name}" for name in dataset.target_names]
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return csv_path, manifest_path
