"""Dataset ingestion, splitting, normalization, and synthetic generation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    AlignmentError,
    ConfigurationError,
    DimensionError,
    LabelError,
    ParseError,
    StratificationError,
)

TRAIN, VALIDATION, TEST = "train", "validation", "test"
SPLIT_NAMES = (TRAIN, VALIDATION, TEST)


@dataclass(frozen=True)
class LabeledSample:
    """One subject: per-view feature vectors, class index, one-hot label."""

    sample_id: str
    features: dict
    label: int
    onehot: np.ndarray


@dataclass(frozen=True)
class MultiViewDataset:
    """Aligned per-view feature matrices with labels and split tags."""

    views: dict  # view id -> (n, dim) float array
    labels: np.ndarray
    sample_ids: tuple
    class_count: int
    split: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.sample_ids)
        for vid, mat in self.views.items():
            if mat.shape[0] != n:
                raise DimensionError(f"view {vid!r} has {mat.shape[0]} rows, expected {n}")
        if len(self.labels) != n:
            raise DimensionError("label vector length must match sample count")
        if np.any(self.labels < 0) or np.any(self.labels >= self.class_count):
            raise LabelError(f"labels must lie in [0, {self.class_count})")

    @property
    def view_ids(self):
        return tuple(self.views)

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    def indices(self, split_name: str) -> np.ndarray:
        if self.split is None:
            raise ConfigurationError("dataset has no split assignment yet")
        return np.flatnonzero(self.split == split_name)

    def onehot_labels(self, idx=None) -> np.ndarray:
        labels = self.labels if idx is None else self.labels[idx]
        out = np.zeros((len(labels), self.class_count))
        out[np.arange(len(labels)), labels] = 1.0
        return out

    def samples(self, split_name: str):
        """Iterate LabeledSample records for one split."""
        for i in self.indices(split_name):
            onehot = np.zeros(self.class_count)
            onehot[self.labels[i]] = 1.0
            yield LabeledSample(
                sample_id=self.sample_ids[i],
                features={v: self.views[v][i] for v in self.views},
                label=int(self.labels[i]),
                onehot=onehot,
            )


def _read_matrix(path, id_column_policy):
    frame = pd.read_csv(path)
    if id_column_policy == "first-column":
        ids = frame.iloc[:, 0].astype(str).tolist()
        body = frame.iloc[:, 1:]
    elif id_column_policy == "row-order":
        ids = None
        body = frame
    else:
        raise ConfigurationError(f"unknown id_column_policy {id_column_policy!r}")
    numeric = body.apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(numeric.to_numpy(dtype=np.float64, na_value=np.nan))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise ParseError(
            f"{path}: non-numeric or non-finite cell at row {row}, "
            f"column {numeric.columns[col]!r}"
        )
    return ids, numeric.to_numpy(dtype=np.float64)


def load_dataset(view_paths, label_path, id_column_policy="first-column") -> MultiViewDataset:
    """Load per-view CSVs aligned by sample id against a label CSV.

    view_paths maps view id -> path. The label file must have columns
    sample_id,label; its row order is canonical. Every sample must be
    present in every view (no missing-view rows).
    """
    labels_frame = pd.read_csv(label_path)
    if "sample_id" not in labels_frame.columns or "label" not in labels_frame.columns:
        raise ParseError(f"{label_path}: expected columns sample_id,label")
    label_ids = labels_frame["sample_id"].astype(str).tolist()
    try:
        labels = labels_frame["label"].astype(np.int64).to_numpy()
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{label_path}: labels must be integers") from exc
    if len(set(label_ids)) != len(label_ids):
        raise AlignmentError(f"{label_path}: duplicate sample ids")

    views = {}
    for vid, path in view_paths.items():
        ids, matrix = _read_matrix(path, id_column_policy)
        if ids is None:
            if matrix.shape[0] != len(label_ids):
                raise AlignmentError(
                    f"view {vid!r}: {matrix.shape[0]} rows vs {len(label_ids)} labels"
                )
            views[vid] = matrix
            continue
        missing = sorted(set(label_ids) - set(ids))
        extra = sorted(set(ids) - set(label_ids))
        if missing or extra:
            raise AlignmentError(
                f"view {vid!r}: ids missing from view {missing[:5]}, "
                f"ids without labels {extra[:5]}"
            )
        order = {sid: i for i, sid in enumerate(ids)}
        views[vid] = matrix[[order[sid] for sid in label_ids]]

    if np.any(labels < 0):
        raise LabelError("labels must be non-negative class indices")
    class_count = int(labels.max()) + 1
    if class_count < 2:
        raise LabelError("need at least two classes")
    return MultiViewDataset(
        views=views,
        labels=labels,
        sample_ids=tuple(label_ids),
        class_count=class_count,
    )


def _apportion(n: int, fractions) -> list:
    """Largest-remainder rounding of n * fractions to integer counts."""
    raw = np.asarray(fractions) * n
    counts = np.floor(raw).astype(int)
    for _ in range(n - counts.sum()):
        counts[int(np.argmax(raw - counts))] += 1
    return counts.tolist()


def split_dataset(
    ds: MultiViewDataset,
    fractions=(0.6, 0.2, 0.2),
    seed: int = 0,
    index_files=None,
) -> MultiViewDataset:
    """Assign train/validation/test tags, stratified by label.

    index_files, when given, maps split name -> path of a file listing one
    sample id per line and overrides the random split entirely.
    """
    split = np.empty(ds.n_samples, dtype=object)
    if index_files is not None:
        position = {sid: i for i, sid in enumerate(ds.sample_ids)}
        seen = set()
        for name in SPLIT_NAMES:
            ids = Path(index_files[name]).read_text().split()
            for sid in ids:
                if sid not in position:
                    raise AlignmentError(f"split {name!r}: unknown sample id {sid!r}")
                if sid in seen:
                    raise AlignmentError(f"sample id {sid!r} assigned to two splits")
                seen.add(sid)
                split[position[sid]] = name
        if len(seen) != ds.n_samples:
            raise AlignmentError("index files do not cover every sample")
        return replace(ds, split=split.astype(str))

    if abs(sum(fractions) - 1.0) > 1e-9 or len(fractions) != 3:
        raise ConfigurationError("fractions must be three values summing to 1")
    rng = np.random.default_rng(seed)
    for cls in range(ds.class_count):
        idx = np.flatnonzero(ds.labels == cls)
        rng.shuffle(idx)
        counts = _apportion(len(idx), fractions)
        if min(counts) < 1:
            raise StratificationError(
                f"class {cls} would be absent from a split ({counts})"
            )
        start = 0
        for name, cnt in zip(SPLIT_NAMES, counts):
            split[idx[start:start + cnt]] = name
            start += cnt
    return replace(ds, split=split.astype(str))


def normalize(ds: MultiViewDataset, std_floor: float = 1e-12) -> MultiViewDataset:
    """Z-score every feature using statistics from the training split only.

    Columns with (near-)zero training std are centered but not scaled.
    """
    train_idx = ds.indices(TRAIN)
    views = {}
    for vid, mat in ds.views.items():
        mean = mat[train_idx].mean(axis=0)
        std = mat[train_idx].std(axis=0)
        scale = np.where(std < std_floor, 1.0, std)
        views[vid] = (mat - mean) / scale
    return replace(ds, views=views)


@dataclass(frozen=True)
class SyntheticConfig:
    """Gaussian multi-view generator settings.

    separations[v] is the norm of each class mean in view v; 0 makes the
    view pure noise.
    """

    n_samples: int
    class_count: int
    feature_dims: tuple
    separations: tuple
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 2 or self.n_samples < self.class_count:
            raise ConfigurationError("need K >= 2 and at least one sample per class")
        if len(self.feature_dims) != len(self.separations):
            raise ConfigurationError("feature_dims and separations must align")
        if min(self.feature_dims) < 1 or min(self.separations) < 0 or self.noise <= 0:
            raise ConfigurationError("dims >= 1, separations >= 0, noise > 0 required")


def generate_synthetic(cfg: SyntheticConfig) -> MultiViewDataset:
    """Isotropic Gaussian blobs per class and view; deterministic per seed."""
    rng = np.random.default_rng(cfg.seed)
    labels = rng.permutation(np.arange(cfg.n_samples) % cfg.class_count)
    views = {}
    for v, (dim, sep) in enumerate(zip(cfg.feature_dims, cfg.separations)):
        directions = rng.standard_normal((cfg.class_count, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        means = directions * sep
        views[f"view{v}"] = means[labels] + cfg.noise * rng.standard_normal(
            (cfg.n_samples, dim)
        )
    return MultiViewDataset(
        views=views,
        labels=labels,
        sample_ids=tuple(f"s{i:05d}" for i in range(cfg.n_samples)),
        class_count=cfg.class_count,
    )


def write_dataset_csv(ds: MultiViewDataset, outdir) -> dict:
    """Write one CSV per view plus labels.csv; returns written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for vid, mat in ds.views.items():
        frame = pd.DataFrame(mat, columns=[f"f{j}" for j in range(mat.shape[1])])
        frame.insert(0, "sample_id", ds.sample_ids)
        path = outdir / f"{vid}.csv"
        frame.to_csv(path, index=False)
        paths[vid] = path
    labels_path = outdir / "labels.csv"
    pd.DataFrame({"sample_id": ds.sample_ids, "label": ds.labels}).to_csv(
        labels_path, index=False
    )
    paths["labels"] = labels_path
    return paths
