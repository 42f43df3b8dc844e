"""Dense statevector simulation: gates, reduced density matrices, Pauli expectations.

Conventions, fixed across the package:

- Qubit 0 is the most significant bit of the amplitude index, so
  ``amplitudes.reshape([2] * n)`` places qubit ``j`` on axis ``j``.
- Rotations use the half-angle convention ``R_A(theta) = exp(-i * theta * A / 2)``;
  ``PHASE(theta) = diag(1, e^{i theta})``; H and S_DAG are standard.
- All values are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UsageError

MAX_QUBITS = 12

_NORM_TOL = 1e-10
_HERMITIAN_TOL = 1e-10
_EIGENVALUE_FLOOR = -1e-9
_SEED_MASK = 0xFFFFFFFFFFFFFFFF

ROTATION_KINDS = ("RX", "RY", "RZ", "PHASE", "RZZ")
TWO_QUBIT_KINDS = ("CNOT", "RZZ")
GATE_KINDS = ("RX", "RY", "RZ", "H", "S_DAG", "PHASE", "CNOT", "RZZ")


@dataclass(frozen=True)
class Gate:
    """One circuit instruction: kind, target qubits (control first for CNOT), optional angle."""

    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise UsageError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        arity = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(qubits) != arity:
            raise UsageError(f"{self.kind} takes exactly {arity} qubit(s), got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise UsageError(f"{self.kind} qubit indices must be distinct, got {qubits}")
        if any(q < 0 for q in qubits):
            raise UsageError(f"negative qubit index in {qubits}")
        if self.kind in ROTATION_KINDS:
            if self.angle is None:
                raise UsageError(f"{self.kind} requires an angle")
            angle = float(self.angle)
            if not math.isfinite(angle):
                raise UsageError(f"{self.kind} angle must be finite, got {angle}")
            object.__setattr__(self, "angle", angle)
        elif self.angle is not None:
            raise UsageError(f"{self.kind} takes no angle")


def rx(qubit: int, angle: float) -> Gate:
    return Gate("RX", (qubit,), angle)


def ry(qubit: int, angle: float) -> Gate:
    return Gate("RY", (qubit,), angle)


def rz(qubit: int, angle: float) -> Gate:
    return Gate("RZ", (qubit,), angle)


def phase(qubit: int, angle: float) -> Gate:
    return Gate("PHASE", (qubit,), angle)


def h(qubit: int) -> Gate:
    return Gate("H", (qubit,))


def s_dag(qubit: int) -> Gate:
    return Gate("S_DAG", (qubit,))


def cnot(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


def rzz(qubit_a: int, qubit_b: int, angle: float) -> Gate:
    return Gate("RZZ", (qubit_a, qubit_b), angle)


@dataclass(frozen=True)
class Statevector:
    """Normalized complex amplitude vector over ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ConfigurationError(
                f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}"
            )
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise UsageError(
                f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        if abs(np.vdot(amps, amps).real - 1.0) > _NORM_TOL:
            raise UsageError("statevector is not normalized")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix describing a (possibly mixed) qubit subsystem."""

    m_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = 2**self.m_qubits
        mat = np.array(self.matrix, dtype=np.complex128)
        if mat.shape != (dim, dim):
            raise UsageError(f"expected a {dim}x{dim} matrix, got shape {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > _HERMITIAN_TOL:
            raise UsageError("density matrix is not Hermitian")
        if abs(np.trace(mat).real - 1.0) > _HERMITIAN_TOL:
            raise UsageError("density matrix trace is not 1")
        if np.linalg.eigvalsh(mat).min() < _EIGENVALUE_FLOOR:
            raise UsageError("density matrix is not positive semidefinite")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True)
class PauliObservable:
    """Tensor product of Pauli matrices: one letter from XYZ per supported qubit."""

    support: tuple[int, ...]
    letters: str

    def __post_init__(self):
        support = tuple(int(q) for q in self.support)
        object.__setattr__(self, "support", support)
        if not support:
            raise UsageError("observable support must be non-empty")
        if len(set(support)) != len(support):
            raise UsageError(f"observable support indices must be distinct, got {support}")
        if any(q < 0 for q in support):
            raise UsageError(f"negative qubit index in {support}")
        if len(self.letters) != len(support) or any(c not in "XYZ" for c in self.letters):
            raise UsageError(
                f"letters must be a string over XYZ matching the support, got {self.letters!r}"
            )


def new_zero_state(n_qubits: int) -> Statevector:
    """All-qubits-zero state."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


_SQRT2_INV = 1.0 / math.sqrt(2.0)
_H_MATRIX = np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQRT2_INV
_S_DAG_MATRIX = np.array([[1, 0], [0, -1j]], dtype=np.complex128)
_CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)

_PAULI_MATRICES = {
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def gate_matrix(gate: Gate) -> np.ndarray:
    """Dense matrix of a gate on its own qubits (first qubit = most significant bit)."""
    t = gate.angle
    if gate.kind == "RX":
        c, s = math.cos(t / 2), math.sin(t / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if gate.kind == "RY":
        c, s = math.cos(t / 2), math.sin(t / 2)
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if gate.kind == "RZ":
        return np.array(
            [[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=np.complex128
        )
    if gate.kind == "PHASE":
        return np.array([[1, 0], [0, np.exp(1j * t)]], dtype=np.complex128)
    if gate.kind == "H":
        return _H_MATRIX
    if gate.kind == "S_DAG":
        return _S_DAG_MATRIX
    if gate.kind == "CNOT":
        return _CNOT_MATRIX
    if gate.kind == "RZZ":
        a, b = np.exp(-0.5j * t), np.exp(0.5j * t)
        return np.diag([a, b, b, a]).astype(np.complex128)
    raise UsageError(f"unknown gate kind {gate.kind!r}")


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    """Apply one gate, returning a new state.  Norm is preserved."""
    n = state.n_qubits
    for q in gate.qubits:
        if not 0 <= q < n:
            raise UsageError(f"qubit index {q} out of range for {n}-qubit state")
    u = gate_matrix(gate)
    psi = state.amplitudes.reshape([2] * n)
    if len(gate.qubits) == 1:
        q = gate.qubits[0]
        psi = np.moveaxis(np.tensordot(u, psi, axes=(1, q)), 0, q)
    else:
        qa, qb = gate.qubits
        psi = np.moveaxis(psi, (qa, qb), (0, 1)).reshape(4, -1)
        psi = (u @ psi).reshape([2, 2] + [2] * (n - 2))
        psi = np.moveaxis(psi, (0, 1), (qa, qb))
    return Statevector(n, psi.reshape(-1))


def run_circuit(n_qubits: int, circuit) -> Statevector:
    """Fold apply_gate over the zero state, left to right."""
    state = new_zero_state(n_qubits)
    for gate in circuit:
        state = apply_gate(state, gate)
    return state


def reduced_density_matrix(state: Statevector, keep) -> DensityMatrix:
    """Partial trace of |psi><psi| over the complement of ``keep``.

    The returned matrix orders its qubits as ``keep`` lists them.
    """
    keep = tuple(int(q) for q in keep)
    n = state.n_qubits
    if not keep:
        raise UsageError("keep must be non-empty")
    if len(set(keep)) != len(keep):
        raise UsageError(f"keep indices must be distinct, got {keep}")
    if any(not 0 <= q < n for q in keep):
        raise UsageError(f"keep index out of range for {n}-qubit state: {keep}")
    rest = [q for q in range(n) if q not in keep]
    psi = state.amplitudes.reshape([2] * n)
    block = psi.transpose(list(keep) + rest).reshape(2 ** len(keep), -1)
    rho = block @ block.conj().T
    return DensityMatrix(len(keep), rho)


def _observable_matrix(obs: PauliObservable, m_qubits: int) -> np.ndarray:
    by_position = dict(zip(obs.support, obs.letters))
    op = np.array([[1.0]], dtype=np.complex128)
    for pos in range(m_qubits):
        factor = _PAULI_MATRICES.get(by_position.get(pos), np.eye(2, dtype=np.complex128))
        op = np.kron(op, factor)
    return op


def pauli_expectation(rho: DensityMatrix, obs: PauliObservable) -> float:
    """Tr(O rho), clamped to [-1, 1]."""
    if any(q >= rho.m_qubits for q in obs.support):
        raise UsageError(
            f"observable support {obs.support} exceeds {rho.m_qubits}-qubit density matrix"
        )
    op = _observable_matrix(obs, rho.m_qubits)
    value = np.trace(op @ rho.matrix)
    assert abs(value.imag) <= 1e-10
    return float(np.clip(value.real, -1.0, 1.0))


def _parity_eigenvalues(m: int) -> np.ndarray:
    return np.array([(-1) ** bin(i).count("1") for i in range(2**m)], dtype=np.float64)


def sampled_pauli_expectation(
    state: Statevector, obs: PauliObservable, shots: int, seed
) -> float:
    """Finite-shot estimate of <O> on ``state``.

    Measured qubits are rotated into the observable eigenbasis (X: H; Y: S_DAG
    then H; Z: nothing), ``shots`` outcomes are drawn from the exact marginal
    distribution by inverse CDF, and the mean of the +-1 eigenvalue products is
    returned.  ``seed`` may be an integer or a ``numpy.random.Generator``; the
    estimator is unbiased and deterministic for a fixed seed.
    """
    if shots < 1:
        raise UsageError(f"shots must be >= 1, got {shots}")
    n = state.n_qubits
    if any(q >= n for q in obs.support):
        raise UsageError(f"observable support {obs.support} exceeds {n}-qubit state")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(
        int(seed) & _SEED_MASK
    )
    rotated = state
    for q, letter in zip(obs.support, obs.letters):
        if letter == "X":
            rotated = apply_gate(rotated, h(q))
        elif letter == "Y":
            rotated = apply_gate(rotated, s_dag(q))
            rotated = apply_gate(rotated, h(q))
    m = len(obs.support)
    probs = np.abs(rotated.amplitudes.reshape([2] * n)) ** 2
    drop = tuple(q for q in range(n) if q not in obs.support)
    if drop:
        probs = probs.sum(axis=drop)
    probs = probs.reshape(-1)
    probs = probs / probs.sum()
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    outcomes = np.searchsorted(cdf, rng.random(shots), side="right")
    np.clip(outcomes, 0, 2**m - 1, out=outcomes)
    return float(_parity_eigenvalues(m)[outcomes].mean())
