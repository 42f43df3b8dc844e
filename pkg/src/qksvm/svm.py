"""Soft-margin kernel SVM trained on a precomputed kernel matrix.

The dual problem — maximize ``sum(a) - 0.5 * a' (yy' * K) a`` subject to
``0 <= a_i <= C`` and ``sum(a_i y_i) = 0`` — is solved by sequential minimal
optimization: the worst KKT violator is paired with the point of largest
error gap, the two multipliers are updated analytically with box clipping,
and passes over all points alternate with passes over the unbounded ones
until a configured number of consecutive clean full passes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateDataError, DegenerateModelError, UsageError
from .kernels import GramMatrix


@dataclass(frozen=True)
class TrainConfig:
    """Solver controls.  ``max_iterations=None`` resolves to 1000 * N at train time."""

    C: float = 1.0
    kkt_tolerance: float = 1e-3
    max_passes: int = 10
    max_iterations: int | None = None
    alpha_tol: float = 1e-8

    def __post_init__(self):
        if self.C <= 0:
            raise UsageError(f"C must be positive, got {self.C}")
        if self.kkt_tolerance <= 0 or self.alpha_tol <= 0:
            raise UsageError("tolerances must be positive")
        if self.max_passes < 1:
            raise UsageError(f"max_passes must be >= 1, got {self.max_passes}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise UsageError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass(frozen=True)
class SvmModel:
    alphas: np.ndarray
    labels: np.ndarray
    support_indices: np.ndarray
    bias: float
    C: float
    dual_objective: float

    def to_json_dict(self) -> dict:
        return {
            "alphas": self.alphas.tolist(),
            "labels": self.labels.astype(int).tolist(),
            "support_indices": self.support_indices.tolist(),
            "bias": self.bias,
            "C": self.C,
            "dual_objective": self.dual_objective,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SvmModel":
        return cls(
            alphas=np.asarray(data["alphas"], dtype=np.float64),
            labels=np.asarray(data["labels"], dtype=np.float64),
            support_indices=np.asarray(data["support_indices"], dtype=np.int64),
            bias=float(data["bias"]),
            C=float(data["C"]),
            dual_objective=float(data["dual_objective"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as stream:
            json.dump(self.to_json_dict(), stream, indent=2, sort_keys=True)
            stream.write("\n")

    @classmethod
    def load(cls, path) -> "SvmModel":
        with open(path, "r", encoding="ascii") as stream:
            return cls.from_json_dict(json.load(stream))


def _as_kernel_array(kernel) -> np.ndarray:
    values = kernel.values if isinstance(kernel, GramMatrix) else np.asarray(kernel, float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise UsageError(f"kernel matrix must be square, got shape {values.shape}")
    return values


def _as_labels(labels, n: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (n,):
        raise UsageError(f"expected {n} labels, got shape {y.shape}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise UsageError("labels must be -1 or +1")
    return y


def dual_objective(kernel, labels, alphas) -> float:
    """Value of the maximized dual at ``alphas``."""
    k = _as_kernel_array(kernel)
    y = np.asarray(labels, dtype=np.float64)
    a = np.asarray(alphas, dtype=np.float64)
    ay = a * y
    return float(a.sum() - 0.5 * ay @ k @ ay)


def compute_bias(kernel, labels, alphas, C, alpha_tol: float = 1e-8) -> float:
    """Bias averaged over free support vectors; midpoint fallback at the box bound.

    ``C`` may be a scalar or a per-point upper bound array.
    """
    k = _as_kernel_array(kernel)
    y = _as_labels(labels, len(k))
    a = np.asarray(alphas, dtype=np.float64)
    box = np.broadcast_to(np.asarray(C, dtype=np.float64), a.shape)
    support = a > alpha_tol
    if not support.any():
        raise DegenerateModelError("no support vectors")
    scores = k @ (a * y)
    free = support & (a < box - alpha_tol)
    if free.any():
        return float(np.mean(y[free] - scores[free]))
    candidates = y[support] - scores[support]
    return float(0.5 * (candidates.min() + candidates.max()))


def _select_second(i: int, errors: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    gaps = np.abs(errors[i] - errors[candidates])
    return candidates[np.argsort(-gaps, kind="stable")]


def train_smo(
    kernel, labels, config: TrainConfig, per_point_C=None
) -> SvmModel:
    """Fit the dual on a precomputed kernel matrix.

    ``per_point_C`` optionally replaces the scalar box bound with one bound per
    point (the scalar ``config.C`` is still reported on the model).
    """
    k = _as_kernel_array(kernel)
    n = len(k)
    y = _as_labels(labels, n)
    if n < 2:
        raise DegenerateDataError(f"need at least 2 training points, got {n}")
    if np.all(y == y[0]):
        raise DegenerateDataError("training labels contain a single class")

    box = (
        np.full(n, config.C, dtype=np.float64)
        if per_point_C is None
        else np.asarray(per_point_C, dtype=np.float64).copy()
    )
    if box.shape != (n,) or np.any(box <= 0):
        raise UsageError("per-point C must be positive and match the label count")

    tol = config.kkt_tolerance
    atol = config.alpha_tol
    max_iterations = config.max_iterations if config.max_iterations is not None else 1000 * n

    alphas = np.zeros(n)
    bias = 0.0
    errors = -y.copy()  # E_i = f(x_i) - y_i with f = 0 initially
    iterations = 0
    if __debug__ and n <= 256:
        previous_objective = 0.0

    def violation() -> np.ndarray:
        # positive where the KKT conditions are violated beyond tol,
        # measured against the running bias (selection heuristic only)
        r = y * errors
        lower = np.where(alphas < box - atol, -r - tol, -np.inf)
        upper = np.where(alphas > atol, r - tol, -np.inf)
        return np.maximum(lower, upper)

    def kkt_gap() -> float:
        # width of the infeasibility of the bias interval; <= 0 at the optimum.
        # unlike violation() this does not depend on any bias estimate.
        candidates = y - k @ (alphas * y)
        can_decrease = ((y > 0) & (alphas > atol)) | ((y < 0) & (alphas < box - atol))
        can_increase = ((y > 0) & (alphas < box - atol)) | ((y < 0) & (alphas > atol))
        upper = candidates[can_decrease].min() if can_decrease.any() else np.inf
        lower = candidates[can_increase].max() if can_increase.any() else -np.inf
        return float(lower - upper)

    def try_update(i: int, j: int) -> bool:
        nonlocal bias, errors, iterations
        if i == j:
            return False
        ai_old, aj_old = alphas[i], alphas[j]
        if y[i] != y[j]:
            low = max(0.0, aj_old - ai_old)
            high = min(box[j], box[i] + aj_old - ai_old)
        else:
            low = max(0.0, ai_old + aj_old - box[i])
            high = min(box[j], ai_old + aj_old)
        if high - low < 1e-14:
            return False
        eta = k[i, i] + k[j, j] - 2.0 * k[i, j]
        if eta <= 1e-15:
            return False
        aj = aj_old + y[j] * (errors[i] - errors[j]) / eta
        aj = min(max(aj, low), high)
        if abs(aj - aj_old) < 1e-12 * (aj + aj_old + 1e-12):
            return False
        ai = ai_old + y[i] * y[j] * (aj_old - aj)
        d_i, d_j = ai - ai_old, aj - aj_old
        b1 = bias - errors[i] - y[i] * d_i * k[i, i] - y[j] * d_j * k[i, j]
        b2 = bias - errors[j] - y[i] * d_i * k[i, j] - y[j] * d_j * k[j, j]
        if atol < ai < box[i] - atol:
            new_bias = b1
        elif atol < aj < box[j] - atol:
            new_bias = b2
        else:
            new_bias = 0.5 * (b1 + b2)
        alphas[i], alphas[j] = ai, aj
        errors += y[i] * d_i * k[i] + y[j] * d_j * k[j] + (new_bias - bias)
        bias = new_bias
        iterations += 1
        if __debug__ and n <= 256:
            nonlocal previous_objective
            objective = dual_objective(k, y, alphas)
            assert objective >= previous_objective - 1e-9
            previous_objective = objective
        return True

    examine_all = True
    clean_full_passes = 0
    while iterations < max_iterations and clean_full_passes < config.max_passes:
        if examine_all:
            candidates = np.arange(n)
        else:
            candidates = np.flatnonzero((alphas > atol) & (alphas < box - atol))
        changed = 0
        masked = np.zeros(n, dtype=bool)
        while iterations < max_iterations:
            active = candidates[~masked[candidates]]
            if len(active) == 0:
                break
            scores = violation()[active]
            best = int(np.argmax(scores))
            if scores[best] <= 0.0:
                break
            i = int(active[best])
            others = np.flatnonzero(~masked & (np.arange(n) != i))
            success = False
            for j in _select_second(i, errors, others):
                if try_update(i, int(j)):
                    success = True
                    break
            if success:
                changed += 1
                masked[:] = False
            else:
                masked[i] = True  # cannot make progress from i right now
        if examine_all:
            clean_full_passes = clean_full_passes + 1 if changed == 0 else 0
            examine_all = False
        elif changed == 0:
            examine_all = True

    support = np.flatnonzero(alphas > atol)

    def build_model() -> SvmModel:
        final_bias = compute_bias(k, y, alphas, box, alpha_tol=atol)
        frozen = alphas.copy()
        frozen.flags.writeable = False
        return SvmModel(
            alphas=frozen,
            labels=y,
            support_indices=support,
            bias=final_bias,
            C=config.C,
            dual_objective=dual_objective(k, y, alphas),
        )

    if kkt_gap() > 2.0 * tol:
        best = build_model() if support.size else None
        raise ConvergenceError(
            f"stopped after {iterations} updates with KKT violations above "
            f"{tol} still present",
            model=best,
        )
    if not support.size:
        raise DegenerateModelError("training produced no support vectors")
    return build_model()


def decision_value(model: SvmModel, kernel_row) -> float:
    """Decision function for one point given its kernel values against the training set."""
    row = np.asarray(kernel_row, dtype=np.float64)
    if row.shape != model.labels.shape:
        raise UsageError(f"expected {model.labels.shape[0]} kernel values, got {row.shape}")
    s = model.support_indices
    return float(np.dot(model.alphas[s] * model.labels[s], row[s]) + model.bias)


def decision_values(model: SvmModel, kernel_rows) -> np.ndarray:
    """Vectorized decision function over a (n_points, n_train) kernel block."""
    rows = np.asarray(kernel_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != len(model.labels):
        raise UsageError(
            f"expected (n, {len(model.labels)}) kernel rows, got shape {rows.shape}"
        )
    s = model.support_indices
    return rows[:, s] @ (model.alphas[s] * model.labels[s]) + model.bias


def predict(model: SvmModel, kernel_row) -> int:
    """Sign of the decision value; exactly zero maps to +1."""
    return 1 if decision_value(model, kernel_row) >= 0.0 else -1


def predict_many(model: SvmModel, kernel_rows) -> np.ndarray:
    return np.where(decision_values(model, kernel_rows) >= 0.0, 1, -1)
