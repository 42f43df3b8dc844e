"""Encoding circuits that embed a classical feature vector into a statevector.

Five families are supported, selected by name:

- ``RotX``: one X rotation per qubit, angle ``2 * x_j`` (i.e. exp(-i * x_j * X_j)).
- ``ThreeD``: per qubit, X then Y then Z rotations by the feature value itself,
  optionally followed by a ring of CNOTs (control j, target (j+1) mod n).
- ``ZZ``: Hadamard layer, single-qubit phases ``2 * x_j``, and full pairwise
  CNOT-conjugated phases ``2 * (pi - x_i)(pi - x_j)``, repeated ``reps`` times.
- ``IQP``: Hadamard layer, diagonal RZ(2 x_j) and pairwise RZZ(2 x_i x_j),
  repeated ``reps`` times.
- ``Trotterized``: an RX(2 x_j) upload layer followed by ``reps`` first-order
  steps of nearest-neighbor XX+YY+ZZ couplings on a line, total evolution time
  ``evolution_time``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UsageError
from .quantum_state import (
    MAX_QUBITS,
    Gate,
    Statevector,
    cnot,
    h,
    phase,
    run_circuit,
    rx,
    ry,
    rz,
    rzz,
    s_dag,
)

FAMILIES = ("RotX", "ThreeD", "ZZ", "IQP", "Trotterized")

_DEFAULT_REPS = {"RotX": 1, "ThreeD": 1, "ZZ": 2, "IQP": 2, "Trotterized": 3}


@dataclass(frozen=True)
class FeatureMapSpec:
    """Declarative description of one encoding circuit."""

    family: str
    n_qubits: int
    with_cnot_ring: bool = False
    reps: int | None = None
    evolution_time: float = math.pi / 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"unknown feature map family {self.family!r}; pick one of {FAMILIES}"
            )
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ConfigurationError(
                f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}"
            )
        if self.with_cnot_ring and self.family != "ThreeD":
            raise ConfigurationError("with_cnot_ring is only meaningful for ThreeD")
        if self.reps is not None and self.reps < 1:
            raise ConfigurationError(f"reps must be >= 1, got {self.reps}")
        if not math.isfinite(self.evolution_time):
            raise ConfigurationError("evolution_time must be finite")

    @property
    def resolved_reps(self) -> int:
        return self.reps if self.reps is not None else _DEFAULT_REPS[self.family]


def _check_features(x, n: int | None = None) -> np.ndarray:
    values = np.asarray(x, dtype=np.float64)
    if values.ndim != 1:
        raise UsageError(f"feature vector must be 1-D, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise UsageError("feature vector contains non-finite entries")
    if n is not None and len(values) != n:
        raise UsageError(f"expected {n} features, got {len(values)}")
    return values


def build_rotx_circuit(x) -> list[Gate]:
    """One RX(2 x_j) per qubit."""
    values = _check_features(x)
    return [rx(j, 2.0 * values[j]) for j in range(len(values))]


def build_3d_circuit(x, with_cnot_ring: bool) -> list[Gate]:
    """Per-qubit X, Y, Z rotations by the feature value, plus an optional CNOT ring."""
    values = _check_features(x)
    n = len(values)
    if with_cnot_ring and n < 2:
        raise UsageError("the CNOT ring needs at least 2 qubits")
    gates: list[Gate] = []
    for j in range(n):
        gates += [rx(j, values[j]), ry(j, values[j]), rz(j, values[j])]
    if with_cnot_ring:
        gates += [cnot(j, (j + 1) % n) for j in range(n)]
    return gates


def build_zz_circuit(x, reps: int) -> list[Gate]:
    """Hadamards, single-qubit phases, and full pairwise entangling phases."""
    values = _check_features(x)
    n = len(values)
    if n < 2:
        raise UsageError(f"ZZ encoding needs at least 2 qubits, got {n}")
    if reps < 1:
        raise UsageError(f"reps must be >= 1, got {reps}")
    gates: list[Gate] = []
    for _ in range(reps):
        gates += [h(j) for j in range(n)]
        gates += [phase(j, 2.0 * values[j]) for j in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                pair_angle = 2.0 * (math.pi - values[i]) * (math.pi - values[j])
                gates += [cnot(i, j), phase(j, pair_angle), cnot(i, j)]
    return gates


def build_iqp_circuit(x, reps: int) -> list[Gate]:
    """Hadamards plus commuting single- and two-qubit Z-diagonal rotations."""
    values = _check_features(x)
    n = len(values)
    if n < 2:
        raise UsageError(f"IQP encoding needs at least 2 qubits, got {n}")
    if reps < 1:
        raise UsageError(f"reps must be >= 1, got {reps}")
    gates: list[Gate] = []
    for _ in range(reps):
        gates += [h(j) for j in range(n)]
        gates += [rz(j, 2.0 * values[j]) for j in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                gates.append(rzz(i, j, 2.0 * values[i] * values[j]))
    return gates


def _xx_coupling(a: int, b: int, angle: float) -> list[Gate]:
    # H Z H = X, so conjugating RZZ by Hadamards gives the XX rotation.
    return [h(a), h(b), rzz(a, b, angle), h(a), h(b)]


def _yy_coupling(a: int, b: int, angle: float) -> list[Gate]:
    # (S_DAG . H) Z (S_DAG . H)^dag = -Y; signs cancel on the pair.
    half_pi = math.pi / 2
    return [
        phase(a, half_pi),
        phase(b, half_pi),
        h(a),
        h(b),
        rzz(a, b, angle),
        h(a),
        h(b),
        s_dag(a),
        s_dag(b),
    ]


def build_trotter_circuit(x, steps: int, evolution_time: float) -> list[Gate]:
    """RX upload layer plus first-order steps of line-topology XX+YY+ZZ couplings."""
    values = _check_features(x)
    n = len(values)
    if n < 2:
        raise UsageError(f"Trotterized encoding needs at least 2 qubits, got {n}")
    if steps < 1:
        raise UsageError(f"steps must be >= 1, got {steps}")
    gates: list[Gate] = [rx(j, 2.0 * values[j]) for j in range(n)]
    tau = evolution_time / steps
    if tau == 0.0:
        return gates
    angle = 2.0 * tau
    for _ in range(steps):
        for j in range(n - 1):
            gates += _xx_coupling(j, j + 1, angle)
            gates += _yy_coupling(j, j + 1, angle)
            gates.append(rzz(j, j + 1, angle))
    return gates


def build_circuit(spec: FeatureMapSpec, x) -> list[Gate]:
    """Gate sequence for one data point under the given spec."""
    values = _check_features(x, spec.n_qubits)
    if spec.family == "RotX":
        return build_rotx_circuit(values)
    if spec.family == "ThreeD":
        return build_3d_circuit(values, spec.with_cnot_ring)
    if spec.family == "ZZ":
        return build_zz_circuit(values, spec.resolved_reps)
    if spec.family == "IQP":
        return build_iqp_circuit(values, spec.resolved_reps)
    return build_trotter_circuit(values, spec.resolved_reps, spec.evolution_time)


def encode(spec: FeatureMapSpec, x) -> Statevector:
    """Encoded state |phi(x)>; deterministic for fixed inputs."""
    return run_circuit(spec.n_qubits, build_circuit(spec, x))
