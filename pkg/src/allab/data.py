"""Tabular dataset ingestion, normalization, imbalancing and splitting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    pass


@dataclass
class RawDataset:
    """Feature matrix with integer class labels, before normalization."""

    features: np.ndarray  # M x K
    labels: np.ndarray  # M ints in [0, C)
    feature_names: list[str] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DataError("features must be a nonempty M x K matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must align with feature rows")
        if not np.all(np.isfinite(self.features)):
            raise DataError("non-finite feature values")
        if self.labels.min() < 0:
            raise DataError("negative class label")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass
class Dataset:
    """Normalized dataset: features in [-1, 1] per column, with class weights."""

    features: np.ndarray
    labels: np.ndarray
    class_weights: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_weights = np.asarray(self.class_weights, dtype=np.float64)
        self.features.setflags(write=False)
        self.labels.setflags(write=False)
        self.class_weights.setflags(write=False)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_weights)

    def subset(self, indices, reweight: bool = True) -> "Dataset":
        """Row subset; recomputes class weights from the subset's own counts."""
        idx = np.asarray(indices, dtype=np.int64)
        labels = self.labels[idx]
        if reweight:
            weights = class_weights_for_labels(labels, self.n_classes)
        else:
            weights = self.class_weights
        return Dataset(self.features[idx], labels, weights)

    def sample_weights(self) -> np.ndarray:
        """Per-row weights from the class weights."""
        return self.class_weights[self.labels]


@dataclass
class SplitSpec:
    n_test: int = 200
    n_reward: int = 100
    n_init_annot: int = 100
    data_seed: int = 0

    def __post_init__(self):
        if min(self.n_test, self.n_reward, self.n_init_annot) < 1:
            raise DataError("split sizes must be positive")


@dataclass
class ALState:
    """Annotated / pool index partition over a backing Dataset.

    Pool labels are hidden from acquisition strategies: they only see
    ``pool_features``. The true labels are exposed via ``true_pool_labels``
    for oracle scoring and post-acquisition annotation only.
    """

    dataset: Dataset
    annotated: np.ndarray
    pool: np.ndarray

    def __post_init__(self):
        self.annotated = np.asarray(self.annotated, dtype=np.int64)
        self.pool = np.sort(np.asarray(self.pool, dtype=np.int64))
        if len(np.intersect1d(self.annotated, self.pool)) > 0:
            raise DataError("annotated and pool overlap")

    @property
    def annotated_features(self) -> np.ndarray:
        return self.dataset.features[self.annotated]

    @property
    def annotated_labels(self) -> np.ndarray:
        return self.dataset.labels[self.annotated]

    @property
    def pool_features(self) -> np.ndarray:
        return self.dataset.features[self.pool]

    def true_pool_labels(self) -> np.ndarray:
        """Hidden labels of the pool; for oracle/simulation use only."""
        return self.dataset.labels[self.pool]

    def annotate(self, pool_position: int) -> "ALState":
        """Move the pool point at the given pool-list position to annotated."""
        if not 0 <= pool_position < len(self.pool):
            raise DataError(f"pool position {pool_position} out of range")
        idx = self.pool[pool_position]
        return ALState(
            self.dataset,
            np.append(self.annotated, idx),
            np.delete(self.pool, pool_position),
        )


def load_table(path, fmt: str, n_features: int | None = None) -> RawDataset:
    """Load a CSV (label-first column) or sparse libsvm text file.

    CSV categorical columns are one-hot expanded in first-appearance order;
    labels are remapped to contiguous ids in first-appearance order.
    """
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "libsvm":
        return _load_libsvm(path, n_features)
    raise DataError(f"unknown format {fmt!r}")


def _remap_labels(raw_labels: list[str]) -> np.ndarray:
    mapping: dict[str, int] = {}
    out = np.empty(len(raw_labels), dtype=np.int64)
    for i, lab in enumerate(raw_labels):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def _load_csv(path) -> RawDataset:
    rows: list[list[str]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rows.append([tok.strip() for tok in line.split(",")])
    if not rows:
        raise DataError(f"{path}: empty file")
    # Optional header: first row is a header iff no cell past column 0 parses
    # as a number and a later row exists whose cells do.
    start = 0
    if len(rows) > 1 and not any(_is_number(c) for c in rows[0][1:]):
        if any(_is_number(c) for c in rows[1][1:]):
            start = 1
    body = rows[start:]
    width = len(body[0])
    for off, r in enumerate(body):
        if len(r) != width:
            raise DataError(f"{path}: line {start + off + 1}: expected {width} columns, got {len(r)}")
    labels = _remap_labels([r[0] for r in body])
    numeric = [all(_is_number(r[j]) for r in body) for j in range(1, width)]
    columns: list[np.ndarray] = []
    names: list[str] = []
    for j in range(1, width):
        col = [r[j] for r in body]
        if numeric[j - 1]:
            columns.append(np.array([float(v) for v in col]))
            names.append(f"col{j}")
        else:
            cats: dict[str, int] = {}
            for v in col:
                if v not in cats:
                    cats[v] = len(cats)
            onehot = np.zeros((len(col), len(cats)))
            for i, v in enumerate(col):
                onehot[i, cats[v]] = 1.0
            for cat in cats:
                names.append(f"col{j}={cat}")
            columns.append(onehot)
    features = np.column_stack(columns) if columns else np.zeros((len(body), 0))
    return RawDataset(features, labels, names)


def _load_libsvm(path, n_features: int | None) -> RawDataset:
    raw_labels: list[str] = []
    entries: list[list[tuple[int, float]]] = []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            toks = line.split()
            raw_labels.append(toks[0])
            row = []
            for tok in toks[1:]:
                try:
                    idx_s, val_s = tok.split(":")
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError as exc:
                    raise DataError(f"{path}: line {lineno}: bad entry {tok!r}") from exc
                if idx < 1:
                    raise DataError(f"{path}: line {lineno}: index {idx} < 1")
                row.append((idx, val))
                max_idx = max(max_idx, idx)
            entries.append(row)
    if not entries:
        raise DataError(f"{path}: empty file")
    k = n_features if n_features is not None else max_idx
    if max_idx > k:
        raise DataError(f"{path}: feature index {max_idx} exceeds declared width {k}")
    features = np.zeros((len(entries), k))
    for i, row in enumerate(entries):
        for idx, val in row:
            features[i, idx - 1] = val
    return RawDataset(features, _remap_labels(raw_labels))


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def normalize_features(raw: RawDataset) -> Dataset:
    """Map each feature column affinely onto [-1, 1]; constant columns to 0."""
    if len(raw.labels) < 2:
        raise DataError("need at least 2 rows to normalize")
    x = raw.features
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = 2.0 * (x - lo) / safe - 1.0
    scaled[:, span == 0] = 0.0
    return Dataset(scaled, raw.labels, np.ones(raw.n_classes))


def class_weights_for_labels(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """w_c = M / (C * N_c), so that sum_c w_c * N_c = M."""
    counts = np.bincount(labels, minlength=n_classes)
    if np.any(counts == 0):
        missing = int(np.argmin(counts))
        raise DataError(f"class {missing} absent; cannot compute weights")
    m = len(labels)
    return m / (n_classes * counts.astype(np.float64))


def class_weights(ds: Dataset) -> np.ndarray:
    return class_weights_for_labels(ds.labels, ds.n_classes)


def make_imbalanced(ds: Dataset, factor: float, rare_classes, seed: int) -> Dataset:
    """Undersample each rare class to floor(N_c / factor) points."""
    if factor < 1:
        raise DataError("factor must be >= 1")
    rare = set(int(c) for c in rare_classes)
    present = set(np.unique(ds.labels).tolist())
    if not rare <= present:
        raise DataError("rare_classes must be present in the dataset")
    rng = np.random.default_rng(seed)
    keep = np.ones(len(ds), dtype=bool)
    for c in sorted(rare):
        idx = np.flatnonzero(ds.labels == c)
        n_keep = int(len(idx) // factor)
        if n_keep == 0:
            raise DataError(f"class {c} would drop to 0 points under factor {factor}")
        kept = rng.choice(idx, size=n_keep, replace=False)
        keep[idx] = False
        keep[kept] = True
    labels = ds.labels[keep]
    return Dataset(
        ds.features[keep], labels, class_weights_for_labels(labels, ds.n_classes)
    )


def stratified_counts(labels: np.ndarray, n_classes: int, n_draw: int) -> np.ndarray:
    """Per-class draw counts matching the label ratios, largest-remainder rounding."""
    counts = np.bincount(labels, minlength=n_classes)
    exact = n_draw * counts / counts.sum()
    base = np.floor(exact).astype(np.int64)
    rem = exact - base
    short = n_draw - base.sum()
    # assign the leftover draws to the largest remainders (ties: lowest class)
    order = np.lexsort((np.arange(n_classes), -rem))
    for c in order[:short]:
        base[c] += 1
    base = np.minimum(base, counts)
    # if the cap bit, fill from whatever classes have room
    while base.sum() < n_draw:
        room = np.flatnonzero(base < counts)
        base[room[0]] += 1
    return base


def split_dataset(ds: Dataset, spec: SplitSpec) -> tuple[ALState, Dataset, Dataset]:
    """Split into (initial AL state, test set, reward set).

    Draw order is test, reward, initial-annotated, all seeded by data_seed.
    The initial annotated set is stratified to the dataset's class ratios.
    """
    m = len(ds)
    needed = spec.n_test + spec.n_reward + spec.n_init_annot
    if needed >= m:
        raise DataError(f"split needs {needed} points but dataset has {m}")
    rng = np.random.default_rng(spec.data_seed)
    remaining = np.arange(m)
    test_idx = rng.choice(remaining, size=spec.n_test, replace=False)
    remaining = np.setdiff1d(remaining, test_idx)
    reward_idx = rng.choice(remaining, size=spec.n_reward, replace=False)
    remaining = np.setdiff1d(remaining, reward_idx)
    per_class = stratified_counts(ds.labels[remaining], ds.n_classes, spec.n_init_annot)
    annot_parts = []
    for c in range(ds.n_classes):
        cls_idx = remaining[ds.labels[remaining] == c]
        annot_parts.append(rng.choice(cls_idx, size=per_class[c], replace=False))
    annot_idx = np.sort(np.concatenate(annot_parts))
    pool_idx = np.setdiff1d(remaining, annot_idx)
    state = ALState(ds, annot_idx, pool_idx)
    return state, ds.subset(np.sort(test_idx)), ds.subset(np.sort(reward_idx))


def generate_gaussian_mixture(n_per_class, means, stdev: float, seed: int) -> Dataset:
    """Isotropic Gaussian blobs, one per class, normalized to [-1, 1]."""
    means = np.asarray(means, dtype=np.float64)
    if means.ndim != 2 or means.shape[0] < 2:
        raise DataError("means must be C x K with C >= 2")
    if stdev <= 0:
        raise DataError("stdev must be positive")
    n_per_class = np.asarray(n_per_class, dtype=np.int64)
    if len(n_per_class) != means.shape[0]:
        raise DataError("n_per_class must align with means")
    rng = np.random.default_rng(seed)
    blocks = []
    labels = []
    for c, n in enumerate(n_per_class):
        blocks.append(means[c] + stdev * rng.standard_normal((n, means.shape[1])))
        labels.append(np.full(n, c, dtype=np.int64))
    raw = RawDataset(np.vstack(blocks), np.concatenate(labels))
    return normalize_features(raw)
