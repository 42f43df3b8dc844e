"""Kernel entries, per-point projections, and Gram matrix assembly.

Three kernel kinds share one Gram pipeline: each data point is mapped to a
per-point representation exactly once (raw features for RBF, encoded
amplitudes for the fidelity kernel, measured expectation vectors for the
projected kernel), then pairwise entries are computed over the upper triangle
and mirrored, so ``K[i, j] == K[j, i]`` holds exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, UsageError
from .feature_maps import FeatureMapSpec, encode
from .quantum_state import (
    PauliObservable,
    Statevector,
    pauli_expectation,
    reduced_density_matrix,
    sampled_pauli_expectation,
)

_SEED_MASK = 0xFFFFFFFFFFFFFFFF

KERNEL_KINDS = ("RBF", "FidelityQK", "PQK")
STRATEGY_MODES = ("M1", "M2", "Union")


@dataclass(frozen=True)
class ProjectionStrategy:
    """Which subsystems are measured, and with which Pauli letters."""

    mode: str
    n_qubits: int

    def __post_init__(self):
        if self.mode not in STRATEGY_MODES:
            raise ConfigurationError(
                f"unknown strategy mode {self.mode!r}; pick one of {STRATEGY_MODES}"
            )
        if self.n_qubits < 1:
            raise ConfigurationError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.mode in ("M2", "Union") and self.n_qubits < 2:
            raise ConfigurationError(f"{self.mode} needs at least 2 qubits")

    @property
    def n_features(self) -> int:
        return 6 * self.n_qubits if self.mode == "Union" else 3 * self.n_qubits

    def observables(self) -> list[tuple[tuple[int, ...], str]]:
        """(qubit subset, letters) pairs in the fixed enumeration order.

        Subsets ascend by index; letters run X, Y, Z within each subset.
        """
        n = self.n_qubits
        singles = [((j,), letter) for j in range(n) for letter in "XYZ"]
        pairs = [
            ((j, (j + 1) % n), 2 * letter) for j in range(n) for letter in "XYZ"
        ]
        if self.mode == "M1":
            return singles
        if self.mode == "M2":
            return pairs
        return singles + pairs


def project_state(
    state: Statevector,
    strategy: ProjectionStrategy,
    shots: tuple[int, int] | None = None,
) -> np.ndarray:
    """Vector of Pauli expectations for one encoded state, each in [-1, 1].

    With ``shots=(count, seed)`` every expectation is estimated from ``count``
    measurement samples; observables consume one shared per-point generator in
    enumeration order, so results are deterministic for a fixed seed.
    """
    if strategy.n_qubits != state.n_qubits:
        raise UsageError(
            f"strategy covers {strategy.n_qubits} qubits but state has {state.n_qubits}"
        )
    values = np.empty(strategy.n_features, dtype=np.float64)
    if shots is None:
        for k, (subset, letters) in enumerate(strategy.observables()):
            rho = reduced_density_matrix(state, subset)
            local = PauliObservable(tuple(range(len(subset))), letters)
            values[k] = pauli_expectation(rho, local)
    else:
        count, seed = shots
        rng = np.random.default_rng(int(seed) & _SEED_MASK)
        for k, (subset, letters) in enumerate(strategy.observables()):
            obs = PauliObservable(subset, letters)
            values[k] = sampled_pauli_expectation(state, obs, count, rng)
    return values


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise UsageError(f"length mismatch: {x.shape} vs {y.shape}")
    if gamma <= 0:
        raise UsageError(f"gamma must be positive, got {gamma}")
    return float(np.exp(-gamma * np.sum((x - y) ** 2)))


def pqk_kernel(f, g, gamma: float) -> float:
    """Gaussian kernel over projected feature vectors; identical to rbf_kernel."""
    return rbf_kernel(f, g, gamma)


def fidelity_kernel(x, y, feature_map: FeatureMapSpec) -> float:
    """Squared overlap of the two encoded states, in [0, 1]."""
    vx = encode(feature_map, x).amplitudes
    vy = encode(feature_map, y).amplitudes
    return float(min(abs(np.vdot(vy, vx)) ** 2, 1.0))


@dataclass(frozen=True)
class KernelSpec:
    """Everything needed to evaluate one kernel over a dataset."""

    kind: str
    gamma: float | None = None
    feature_map: FeatureMapSpec | None = None
    strategy: ProjectionStrategy | None = None
    shots: int | None = None
    shot_seed: int = 0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigurationError(
                f"unknown kernel kind {self.kind!r}; pick one of {KERNEL_KINDS}"
            )
        if self.kind in ("RBF", "PQK"):
            if self.gamma is None or self.gamma <= 0:
                raise ConfigurationError(f"{self.kind} needs gamma > 0, got {self.gamma}")
        if self.kind in ("FidelityQK", "PQK") and self.feature_map is None:
            raise ConfigurationError(f"{self.kind} needs a feature_map")
        if self.kind == "PQK":
            if self.strategy is None:
                raise ConfigurationError("PQK needs a projection strategy")
            if self.strategy.n_qubits != self.feature_map.n_qubits:
                raise ConfigurationError(
                    "strategy and feature_map disagree on the qubit count"
                )
        if self.kind != "PQK" and self.shots is not None:
            raise ConfigurationError("shots only apply to the PQK kernel")
        if self.shots is not None and self.shots < 1:
            raise ConfigurationError(f"shots must be >= 1, got {self.shots}")

    def describe(self) -> str:
        if self.kind == "RBF":
            return f"RBF(gamma={self.gamma})"
        fm = self.feature_map
        fm_name = fm.family + ("+ring" if fm.with_cnot_ring else "")
        if self.kind == "FidelityQK":
            return f"FidelityQK({fm_name})"
        noise = f", shots={self.shots}" if self.shots is not None else ""
        return f"PQK({fm_name}, {self.strategy.mode}, gamma={self.gamma}{noise})"


class PsdReport(NamedTuple):
    min_eigenvalue: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class GramMatrix:
    """Exactly symmetric kernel matrix with unit diagonal."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise UsageError(f"Gram matrix must be square, got shape {values.shape}")
        if not np.array_equal(values, values.T):
            raise UsageError("Gram matrix must be exactly symmetric")
        if np.max(np.abs(np.diag(values) - 1.0)) > 1e-9:
            raise UsageError("Gram diagonal must be 1 within 1e-9")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.shape[0]


def check_psd(gram, tol: float = -1e-8) -> PsdReport:
    """Smallest eigenvalue of a symmetric kernel matrix, compared against tol."""
    values = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise UsageError(f"matrix must be square, got shape {values.shape}")
    smallest = float(np.linalg.eigvalsh(values).min())
    return PsdReport(smallest, tol, smallest >= tol)


def point_representations(
    dataset, spec: KernelSpec, point_indices=None
) -> np.ndarray:
    """Per-point representation feeding the Gram assembly; computed once per point.

    ``point_indices`` fixes the identity of each row for shot-seed derivation
    (per-point seed = shot_seed XOR index); it defaults to the row position.
    """
    rows = np.asarray(dataset, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise UsageError(f"dataset must be a non-empty 2-D array, got shape {rows.shape}")
    if spec.kind == "RBF":
        return rows
    if point_indices is None:
        point_indices = range(len(rows))
    states = [encode(spec.feature_map, row) for row in rows]
    if spec.kind == "FidelityQK":
        return np.stack([state.amplitudes for state in states])
    if spec.shots is None:
        return np.stack([project_state(state, spec.strategy) for state in states])
    return np.stack(
        [
            project_state(state, spec.strategy, shots=(spec.shots, spec.shot_seed ^ idx))
            for state, idx in zip(states, point_indices)
        ]
    )


def _pairwise_sq_dists(features: np.ndarray) -> np.ndarray:
    n = len(features)
    out = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        row = np.sum((features[i] - features[i:]) ** 2, axis=1)
        out[i, i:] = row
        out[i:, i] = row
    return out


def _overlap_gram(amplitudes: np.ndarray) -> np.ndarray:
    n = len(amplitudes)
    out = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        row = np.abs(amplitudes[i:] @ amplitudes[i].conj()) ** 2
        out[i, i:] = row
        out[i:, i] = row
    np.fill_diagonal(out, 1.0)
    return np.minimum(out, 1.0)


def gram_from_representations(reps: np.ndarray, spec: KernelSpec) -> GramMatrix:
    if spec.kind == "FidelityQK":
        return GramMatrix(_overlap_gram(reps))
    return GramMatrix(np.exp(-spec.gamma * _pairwise_sq_dists(reps)))


def gram_matrix(dataset, spec: KernelSpec) -> GramMatrix:
    """Full kernel matrix over a dataset; deterministic for a fixed spec."""
    return gram_from_representations(point_representations(dataset, spec), spec)


def cross_kernel(
    dataset_a, dataset_b, spec: KernelSpec, indices_a=None, indices_b=None
) -> np.ndarray:
    """Rectangular kernel block k(a_i, b_j) for scoring held-out points."""
    reps_a = point_representations(dataset_a, spec, indices_a)
    reps_b = point_representations(dataset_b, spec, indices_b)
    if spec.kind == "FidelityQK":
        block = np.abs(reps_a.conj() @ reps_b.T) ** 2
        return np.minimum(block, 1.0)
    out = np.empty((len(reps_a), len(reps_b)), dtype=np.float64)
    for i in range(len(reps_a)):
        out[i] = np.exp(-spec.gamma * np.sum((reps_a[i] - reps_b) ** 2, axis=1))
    return out


GRAM_MAGIC = b"GRAM"


def gram_to_csv(gram: GramMatrix, path) -> None:
    """Row-major full matrix, 17-significant-digit decimals."""
    with open(path, "w", encoding="ascii") as stream:
        for row in gram.values:
            stream.write(",".join(format(v, ".17g") for v in row) + "\n")


def gram_from_csv(path) -> GramMatrix:
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    return GramMatrix(values)


def gram_to_binary(gram: GramMatrix, path) -> None:
    """Magic "GRAM", u64 size, then row-major little-endian float64 entries."""
    with open(path, "wb") as stream:
        stream.write(GRAM_MAGIC)
        stream.write(struct.pack("<Q", gram.size))
        stream.write(gram.values.astype("<f8").tobytes(order="C"))


def gram_from_binary(path) -> GramMatrix:
    with open(path, "rb") as stream:
        magic = stream.read(4)
        if magic != GRAM_MAGIC:
            raise UsageError(f"bad magic {magic!r}, expected {GRAM_MAGIC!r}")
        (size,) = struct.unpack("<Q", stream.read(8))
        data = np.frombuffer(stream.read(size * size * 8), dtype="<f8")
    return GramMatrix(data.reshape(size, size).astype(np.float64))
