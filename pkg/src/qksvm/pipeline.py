"""Experiment orchestration: ingestion, scaling, cross-validation, search, shot sweeps.

Features are min-max scaled into an angle interval ([0, pi] by default) before
encoding.  By default the scaler is fitted on the whole dataset once; the
``scaling="fold"`` mode refits it on each training fold instead and recomputes
encodings per fold, trading speed for strict train/test separation.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateDataError,
    IngestionError,
    UsageError,
)
from .kernels import (
    KernelSpec,
    cross_kernel,
    gram_from_representations,
    point_representations,
)
from .svm import TrainConfig, predict_many, train_smo

logger = logging.getLogger(__name__)

IOT_FEATURE_COLUMNS = ("illuminance", "blinds", "lamps", "rh", "co2", "temp")

_AUTO_POSITIVE = {"1", "1.0", "true", "yes", "occupied", "on"}


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] == 0:
            raise UsageError(f"features must be a non-empty matrix, got {features.shape}")
        if not np.all(np.isfinite(features)):
            raise UsageError("features contain non-finite values")
        if labels.shape != (features.shape[0],):
            raise UsageError("labels must align with feature rows")
        if not np.all(np.isin(labels, (-1, 1))):
            raise UsageError("labels must be -1 or +1")
        if len(set(labels.tolist())) < 2:
            raise DegenerateDataError("dataset contains a single class")
        if len(self.column_names) != features.shape[1]:
            raise UsageError("column_names must match the feature count")
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n_points(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def _map_labels(raw: pd.Series, positive_label) -> np.ndarray:
    values = raw.astype(str).str.strip().str.lower()
    if positive_label is not None:
        positive = values == str(positive_label).strip().lower()
    else:
        positive = values.isin(_AUTO_POSITIVE)
    return np.where(positive, 1, -1)


def load_dataset(
    path,
    column_map: dict[str, str] | None = None,
    label_column: str = "occupancy",
    positive_label=None,
) -> Dataset:
    """Read a CSV into a Dataset, dropping rows with missing or non-numeric values.

    ``column_map`` maps feature names to CSV column names and fixes the feature
    order; it defaults to the six IoT sensor columns mapped to themselves.
    ``positive_label`` names the CSV label value of the positive class; when
    omitted, common truthy spellings (1, true, yes, occupied, on) count as
    positive and everything else as negative.
    """
    if column_map is None:
        column_map = {name: name for name in IOT_FEATURE_COLUMNS}
    try:
        table = pd.read_csv(path)
    except FileNotFoundError:
        raise IngestionError(f"dataset file not found: {path}") from None
    except Exception as exc:  # malformed CSV
        raise IngestionError(f"could not parse {path}: {exc}") from exc
    for name, csv_column in column_map.items():
        if csv_column not in table.columns:
            raise IngestionError(f"column {csv_column!r} (feature {name!r}) not in {path}")
    if label_column not in table.columns:
        raise IngestionError(f"label column {label_column!r} not in {path}")

    feature_frame = table[[column_map[name] for name in column_map]].apply(
        pd.to_numeric, errors="coerce"
    )
    label_missing = table[label_column].isna()
    keep = ~(feature_frame.isna().any(axis=1) | label_missing)
    dropped = int((~keep).sum())
    if dropped:
        logger.warning("dropped %d rows with missing values from %s", dropped, path)
    if not keep.any():
        raise IngestionError(f"no usable rows in {path}")
    features = feature_frame[keep].to_numpy(dtype=np.float64)
    labels = _map_labels(table[label_column][keep], positive_label)
    return Dataset(features, labels, tuple(column_map))


@dataclass(frozen=True)
class ScalerParams:
    mins: np.ndarray
    maxs: np.ndarray
    lo: float
    hi: float


def fit_scaler(features, interval: tuple[float, float] = (0.0, math.pi)) -> ScalerParams:
    """Per-column min-max over the given rows (a Dataset or a feature matrix)."""
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise UsageError(f"interval must satisfy lo < hi, got ({lo}, {hi})")
    rows = features.features if isinstance(features, Dataset) else np.asarray(features, float)
    return ScalerParams(rows.min(axis=0), rows.max(axis=0), lo, hi)


def apply_scaler(params: ScalerParams, features) -> np.ndarray:
    """Affine map onto [lo, hi], clamping out-of-range values; constant columns hit the midpoint."""
    rows = np.asarray(features, dtype=np.float64)
    span = params.maxs - params.mins
    safe_span = np.where(span > 0, span, 1.0)
    unit = (rows - params.mins) / safe_span
    unit = np.where(span > 0, unit, 0.5)
    scaled = params.lo + unit * (params.hi - params.lo)
    return np.clip(scaled, params.lo, params.hi)


def _round_robin(folds: list[list[int]], ordered: np.ndarray, k: int, offset: int) -> int:
    for index in ordered:
        folds[offset % k].append(int(index))
        offset += 1
    return offset


def stratified_folds(labels, k: int, seed: int) -> list[np.ndarray]:
    """Seeded per-class shuffle, then round-robin assignment across folds.

    Fold sizes differ by at most one and each class spreads as evenly as the
    counts allow.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for value in np.unique(labels):
        members = np.flatnonzero(labels == value)
        if len(members) < k:
            raise ConfigurationError(
                f"class {value} has {len(members)} members, fewer than k={k}"
            )
        offset = _round_robin(folds, rng.permutation(members), k, offset)
    return [np.sort(np.array(fold, dtype=np.int64)) for fold in folds]


def shuffled_folds(labels, k: int, seed: int) -> list[np.ndarray]:
    """Unstratified alternative: one global shuffle, then round-robin."""
    labels = np.asarray(labels)
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    if len(labels) < k:
        raise ConfigurationError(f"{len(labels)} points cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    _round_robin(folds, rng.permutation(len(labels)), k, 0)
    return [np.sort(np.array(fold, dtype=np.int64)) for fold in folds]


def accuracy(y_true, y_pred) -> float:
    """Fraction of matching positions."""
    a = np.asarray(y_true)
    b = np.asarray(y_pred)
    if a.shape != b.shape or a.ndim != 1:
        raise UsageError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise UsageError("accuracy of empty sequences is undefined")
    return float(np.mean(a == b))


@dataclass(frozen=True)
class HyperParams:
    C: float
    gamma: float

    def __post_init__(self):
        if self.C <= 0 or self.gamma <= 0:
            raise ConfigurationError(f"C and gamma must be positive, got {self}")


@dataclass(frozen=True)
class CvResult:
    fold_accuracies: tuple[float, ...]
    mean: float
    ci_half_width: float
    hyperparams: HyperParams
    kernel_desc: str
    shots: int | None = None

    @classmethod
    def from_folds(cls, fold_accuracies, hyperparams, kernel_desc, shots=None):
        accs = [float(a) for a in fold_accuracies]
        mean = float(np.mean(accs))
        if len(accs) > 1:
            half_width = float(1.96 * np.std(accs, ddof=1) / math.sqrt(len(accs)))
        else:
            half_width = 0.0
        return cls(tuple(accs), mean, half_width, hyperparams, kernel_desc, shots)


def _resolve_spec(kernel_spec: KernelSpec, hp: HyperParams) -> KernelSpec:
    # the grid's gamma drives RBF/PQK widths; the fidelity kernel has none
    if kernel_spec.kind == "FidelityQK":
        return kernel_spec
    return replace(kernel_spec, gamma=hp.gamma)


def _train_and_score(kernel, labels, train_idx, test_idx, test_rows, c, fold_index):
    try:
        sub = kernel[np.ix_(train_idx, train_idx)]
        model = train_smo(sub, labels[train_idx], TrainConfig(C=c))
        predictions = predict_many(model, test_rows)
        return accuracy(labels[test_idx], predictions)
    except (ConvergenceError, DegenerateDataError) as exc:
        raise ConvergenceError(f"fold {fold_index} failed: {exc}") from exc


def _cv_accuracies(
    kernel: np.ndarray, labels: np.ndarray, folds, c: float, jobs: int = 1
) -> list[float]:
    tasks = []
    for fold_index, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(len(labels)), test_idx)
        tasks.append((train_idx, test_idx, kernel[np.ix_(test_idx, train_idx)], fold_index))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_train_and_score, kernel, labels, tr, te, rows, c, fi)
                for tr, te, rows, fi in tasks
            ]
            return [f.result() for f in futures]
    return [
        _train_and_score(kernel, labels, tr, te, rows, c, fi)
        for tr, te, rows, fi in tasks
    ]


def cross_validate(
    dataset: Dataset,
    kernel_spec: KernelSpec,
    hp: HyperParams,
    k: int,
    seed: int,
    *,
    scaling: str = "global",
    interval: tuple[float, float] = (0.0, math.pi),
    stratified: bool = True,
    jobs: int = 1,
) -> CvResult:
    """k-fold cross-validated accuracy for one kernel and one hyperparameter pair.

    In the default global-scaling mode the full kernel matrix is assembled once
    and folds reuse its slices.
    """
    spec = _resolve_spec(kernel_spec, hp)
    fold_fn = stratified_folds if stratified else shuffled_folds
    folds = fold_fn(dataset.labels, k, seed)
    if scaling == "global":
        scaled = apply_scaler(fit_scaler(dataset.features, interval), dataset.features)
        kernel = gram_from_representations(point_representations(scaled, spec), spec).values
        accs = _cv_accuracies(kernel, dataset.labels, folds, hp.C, jobs)
    elif scaling == "fold":
        accs = []
        for fold_index, test_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(dataset.n_points), test_idx)
            scaler = fit_scaler(dataset.features[train_idx], interval)
            train_rows = apply_scaler(scaler, dataset.features[train_idx])
            test_rows = apply_scaler(scaler, dataset.features[test_idx])
            try:
                reps = point_representations(train_rows, spec, train_idx)
                sub = gram_from_representations(reps, spec).values
                model = train_smo(sub, dataset.labels[train_idx], TrainConfig(C=hp.C))
                block = cross_kernel(test_rows, train_rows, spec, test_idx, train_idx)
                predictions = predict_many(model, block)
                accs.append(accuracy(dataset.labels[test_idx], predictions))
            except (ConvergenceError, DegenerateDataError) as exc:
                raise ConvergenceError(f"fold {fold_index} failed: {exc}") from exc
    else:
        raise ConfigurationError(f"scaling must be 'global' or 'fold', got {scaling!r}")
    return CvResult.from_folds(accs, hp, spec.describe(), shots=spec.shots)


def default_grids(kernel_spec: KernelSpec) -> tuple[list[float], list[float]]:
    """Search grids: C in decades 0.1..1000, gamma in decades 0.001..10.

    The PQK grid adds 1/n_projected_features as a scale-aware gamma candidate.
    """
    c_grid = [0.1, 1.0, 10.0, 100.0, 1000.0]
    gamma_grid = [0.001, 0.01, 0.1, 1.0, 10.0]
    if kernel_spec.kind == "PQK":
        gamma_grid = sorted(set(gamma_grid) | {1.0 / kernel_spec.strategy.n_features})
    return c_grid, gamma_grid


def grid_search(
    dataset: Dataset,
    kernel_spec: KernelSpec,
    c_grid,
    gamma_grid,
    k: int,
    seed: int,
    *,
    scaling: str = "global",
    interval: tuple[float, float] = (0.0, math.pi),
    stratified: bool = True,
    jobs: int = 1,
) -> tuple[HyperParams, list[CvResult]]:
    """Cross-validate every (C, gamma) cell; ties prefer smaller C, then smaller gamma.

    Per-point representations are computed once and shared by all cells; each
    gamma rebuilds only the cheap kernel matrix.
    """
    c_grid = [float(c) for c in c_grid]
    gamma_grid = [float(g) for g in gamma_grid]
    if not c_grid or not gamma_grid:
        raise ConfigurationError("grids must be non-empty")
    if kernel_spec.kind == "FidelityQK":
        gamma_grid = [1.0]  # overlap kernel has no width parameter
    fold_fn = stratified_folds if stratified else shuffled_folds
    folds = fold_fn(dataset.labels, k, seed)

    results: list[CvResult] = []
    if scaling == "global":
        scaled = apply_scaler(fit_scaler(dataset.features, interval), dataset.features)
        reps = point_representations(scaled, kernel_spec)
        for gamma in sorted(gamma_grid):
            spec = _resolve_spec(kernel_spec, HyperParams(C=1.0, gamma=gamma))
            kernel = gram_from_representations(reps, spec).values
            for c in sorted(c_grid):
                accs = _cv_accuracies(kernel, dataset.labels, folds, c, jobs)
                results.append(
                    CvResult.from_folds(
                        accs, HyperParams(C=c, gamma=gamma), spec.describe(), spec.shots
                    )
                )
    else:
        for gamma in sorted(gamma_grid):
            for c in sorted(c_grid):
                hp = HyperParams(C=c, gamma=gamma)
                results.append(
                    cross_validate(
                        dataset,
                        kernel_spec,
                        hp,
                        k,
                        seed,
                        scaling=scaling,
                        interval=interval,
                        stratified=stratified,
                        jobs=jobs,
                    )
                )
    results.sort(key=lambda r: (r.hyperparams.C, r.hyperparams.gamma))
    best = max(results, key=lambda r: (r.mean, -r.hyperparams.C, -r.hyperparams.gamma))
    return best.hyperparams, results


def shot_sweep(
    dataset: Dataset,
    kernel_spec: KernelSpec,
    hp: HyperParams,
    shot_counts,
    k: int,
    seed: int,
    *,
    scaling: str = "global",
    interval: tuple[float, float] = (0.0, math.pi),
    stratified: bool = True,
    jobs: int = 1,
) -> list[CvResult]:
    """Cross-validate the PQK model at fixed (C, gamma) for each shot budget.

    Projected features are resampled per shot count with per-point seeds
    derived as seed XOR point index, so the sweep is reproducible.
    """
    counts = [int(s) for s in shot_counts]
    if not counts or any(s < 1 for s in counts):
        raise ConfigurationError(f"shot counts must be positive, got {shot_counts}")
    if counts != sorted(counts):
        raise ConfigurationError(f"shot counts must be ascending, got {shot_counts}")
    if kernel_spec.kind != "PQK":
        raise ConfigurationError("the shot sweep applies to the PQK kernel only")
    results = []
    for shots in counts:
        spec = replace(kernel_spec, shots=shots, shot_seed=seed)
        results.append(
            cross_validate(
                dataset,
                spec,
                hp,
                k,
                seed,
                scaling=scaling,
                interval=interval,
                stratified=stratified,
                jobs=jobs,
            )
        )
    return results
