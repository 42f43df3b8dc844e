"""Independent brute-force oracles and the self-check battery behind ``qksvm validate``.

Everything here recomputes results through dense matrix algebra (matrix
exponentials via eigendecomposition, full Kronecker embeddings, full density
matrices, projected-gradient QP) and deliberately shares no machinery with the
production code paths it cross-checks.
"""

from __future__ import annotations

import math

import numpy as np

from .quantum_state import Gate  # gate description only; no simulator machinery

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)
_S_DAG = np.array([[1, 0], [0, -1j]], dtype=np.complex128)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)

PAULI = {"X": _X, "Y": _Y, "Z": _Z}


def expm_minus_i(hermitian: np.ndarray) -> np.ndarray:
    """exp(-i * H) for Hermitian H, via eigendecomposition."""
    eigenvalues, vectors = np.linalg.eigh(hermitian)
    return (vectors * np.exp(-1j * eigenvalues)) @ vectors.conj().T


def oracle_gate_matrix(gate: Gate) -> np.ndarray:
    """Gate matrix rebuilt from first principles (rotations as matrix exponentials)."""
    if gate.kind == "RX":
        return expm_minus_i(0.5 * gate.angle * _X)
    if gate.kind == "RY":
        return expm_minus_i(0.5 * gate.angle * _Y)
    if gate.kind == "RZ":
        return expm_minus_i(0.5 * gate.angle * _Z)
    if gate.kind == "RZZ":
        return expm_minus_i(0.5 * gate.angle * np.kron(_Z, _Z))
    if gate.kind == "PHASE":
        return np.array([[1, 0], [0, np.exp(1j * gate.angle)]], dtype=np.complex128)
    if gate.kind == "H":
        return _H
    if gate.kind == "S_DAG":
        return _S_DAG
    if gate.kind == "CNOT":
        return _CNOT
    raise ValueError(f"unknown gate kind {gate.kind!r}")


def embed_unitary(local: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Extend a k-qubit unitary to the full 2^n space (qubit 0 = most significant bit)."""
    k = len(qubits)
    full = np.kron(local, np.eye(2 ** (n - k), dtype=np.complex128))
    order = list(qubits) + [q for q in range(n) if q not in qubits]
    inverse = np.argsort(order)
    tensor = full.reshape([2] * (2 * n))
    tensor = tensor.transpose(list(inverse) + [n + i for i in inverse])
    return tensor.reshape(2**n, 2**n)


def circuit_unitary(n: int, circuit) -> np.ndarray:
    """Full unitary of a circuit as a plain product of dense embedded matrices."""
    total = np.eye(2**n, dtype=np.complex128)
    for gate in circuit:
        total = embed_unitary(oracle_gate_matrix(gate), gate.qubits, n) @ total
    return total


def brute_force_state(n: int, circuit) -> np.ndarray:
    """Circuit output on |0...0>, computed from the dense circuit unitary."""
    zero = np.zeros(2**n, dtype=np.complex128)
    zero[0] = 1.0
    return circuit_unitary(n, circuit) @ zero


def dense_partial_trace(amplitudes: np.ndarray, keep, n: int) -> np.ndarray:
    """Partial trace computed from the full 2^n x 2^n density matrix."""
    keep = tuple(keep)
    rho = np.outer(amplitudes, amplitudes.conj()).reshape([2] * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for q in range(n):
        if q not in keep:
            col[q] = row[q]
    out = "".join(row[q] for q in keep) + "".join(col[q] for q in keep)
    reduced = np.einsum("".join(row + col) + "->" + out, rho)
    dim = 2 ** len(keep)
    return reduced.reshape(dim, dim)


def project_box_hyperplane(v: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    """Euclidean projection onto {0 <= a <= c, y.a = 0} by bisection on the multiplier."""

    def constraint(lam: float) -> float:
        return float(np.dot(y, np.clip(v - lam * y, 0.0, c)))

    lo = -(np.max(np.abs(v)) + c + 1.0)
    hi = -lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if constraint(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * y, 0.0, c)


def qp_dual_oracle(
    kernel: np.ndarray, y: np.ndarray, c: float, iterations: int = 60000
) -> tuple[np.ndarray, float]:
    """Maximize the box-and-hyperplane-constrained SVM dual by projected gradient.

    Returns (alphas, objective).  Intended for small problems (N <= ~20).
    """
    y = np.asarray(y, dtype=np.float64)
    q = np.outer(y, y) * kernel
    lipschitz = max(float(np.linalg.eigvalsh(q).max()), 1e-12)
    step = 1.0 / lipschitz
    alphas = np.zeros(len(y))
    for _ in range(iterations):
        gradient = 1.0 - q @ alphas
        updated = project_box_hyperplane(alphas + step * gradient, y, c)
        if np.max(np.abs(updated - alphas)) < 1e-14:
            alphas = updated
            break
        alphas = updated
    objective = float(alphas.sum() - 0.5 * alphas @ q @ alphas)
    return alphas, objective


def oracle_bias(kernel: np.ndarray, y: np.ndarray, alphas: np.ndarray, c: float) -> float:
    """Margin-averaged bias recomputed from scratch for oracle models."""
    scores = kernel @ (alphas * y)
    free = (alphas > 1e-8) & (alphas < c - 1e-8)
    if free.any():
        return float(np.mean(y[free] - scores[free]))
    support = alphas > 1e-8
    candidates = y[support] - scores[support]
    return float(0.5 * (candidates.min() + candidates.max()))


# ---------------------------------------------------------------------------
# self-check battery


def _check_simulator(rng) -> dict:
    from .quantum_state import run_circuit

    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        circuit = _random_circuit(rng, n, 10)
        simulated = run_circuit(n, circuit).amplitudes
        worst = max(worst, float(np.max(np.abs(simulated - brute_force_state(n, circuit)))))
    return {
        "name": "simulator_matches_dense_products",
        "passed": worst < 1e-12,
        "detail": f"max amplitude error {worst:.3e} over 100 random circuits (<= 3 qubits)",
    }


def _check_partial_trace(rng) -> dict:
    from .quantum_state import Statevector, reduced_density_matrix

    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 6))
        amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        amps /= np.linalg.norm(amps)
        state = Statevector(n, amps)
        size = int(rng.integers(1, min(n, 3) + 1))
        keep = tuple(int(q) for q in rng.choice(n, size=size, replace=False))
        rho = reduced_density_matrix(state, keep).matrix  # invariants checked on build
        expected = dense_partial_trace(state.amplitudes, keep, n)
        worst = max(worst, float(np.max(np.abs(rho - expected))))
    return {
        "name": "partial_trace_matches_dense_oracle",
        "passed": worst < 1e-12,
        "detail": f"max entry error {worst:.3e} over 100 random reductions",
    }


def _check_rotx_identities(rng) -> dict:
    from .feature_maps import FeatureMapSpec, encode
    from .kernels import ProjectionStrategy, fidelity_kernel, project_state

    spec = FeatureMapSpec("RotX", 4)
    strategy = ProjectionStrategy("M1", 4)
    worst_fid = worst_proj = 0.0
    for _ in range(100):
        x = rng.uniform(0, math.pi, 4)
        y = rng.uniform(0, math.pi, 4)
        expected = float(np.prod(np.cos(x - y) ** 2))
        worst_fid = max(worst_fid, abs(fidelity_kernel(x, y, spec) - expected))
        features = project_state(encode(spec, x), strategy)
        closed = np.column_stack([np.zeros(4), -np.sin(2 * x), np.cos(2 * x)]).reshape(-1)
        worst_proj = max(worst_proj, float(np.max(np.abs(features - closed))))
    return {
        "name": "rotx_closed_forms",
        "passed": worst_fid < 1e-10 and worst_proj < 1e-10,
        "detail": f"fidelity error {worst_fid:.3e}, projection error {worst_proj:.3e}",
    }


def _check_pqk_equals_rbf(rng) -> dict:
    from .feature_maps import FeatureMapSpec, encode
    from .kernels import KernelSpec, ProjectionStrategy, gram_matrix, project_state

    spec = KernelSpec(
        "PQK",
        gamma=0.25,
        feature_map=FeatureMapSpec("RotX", 3),
        strategy=ProjectionStrategy("M1", 3),
    )
    data = rng.uniform(0, math.pi, size=(50, 3))
    pqk = gram_matrix(data, spec).values
    features = np.stack(
        [project_state(encode(spec.feature_map, row), spec.strategy) for row in data]
    )
    rbf = gram_matrix(features, KernelSpec("RBF", gamma=0.25)).values
    identical = bool(np.array_equal(pqk, rbf))
    return {
        "name": "pqk_is_rbf_on_projections",
        "passed": identical,
        "detail": "bit-identical Gram matrices on 50 points"
        if identical
        else f"max diff {np.max(np.abs(pqk - rbf)):.3e}",
    }


def _check_gram_psd(rng) -> dict:
    from .feature_maps import FeatureMapSpec
    from .kernels import KernelSpec, ProjectionStrategy, check_psd, gram_matrix

    data = rng.uniform(0, math.pi, size=(200, 3))
    specs = [
        KernelSpec("RBF", gamma=0.8),
        KernelSpec("FidelityQK", feature_map=FeatureMapSpec("RotX", 3)),
        KernelSpec(
            "PQK",
            gamma=0.2,
            feature_map=FeatureMapSpec("ThreeD", 3, with_cnot_ring=True),
            strategy=ProjectionStrategy("Union", 3),
        ),
    ]
    floor = min(check_psd(gram_matrix(data, spec)).min_eigenvalue for spec in specs)
    return {
        "name": "gram_matrices_positive_semidefinite",
        "passed": floor >= -1e-8,
        "detail": f"smallest eigenvalue {floor:.3e} over {len(specs)} kernels x 200 points",
    }


def _check_smo_against_qp(rng) -> dict:
    from .kernels import KernelSpec, gram_matrix
    from .svm import TrainConfig, predict_many, train_smo

    two_point = train_smo(
        np.array([[1.0, -1.0], [-1.0, 1.0]]), np.array([-1.0, 1.0]), TrainConfig(C=10.0)
    )
    exact = (
        np.max(np.abs(two_point.alphas - 0.5)) < 1e-9 and abs(two_point.bias) < 1e-9
    )
    worst = 0.0
    agree = True
    for _ in range(50):
        n = int(rng.integers(4, 13))
        points = rng.normal(size=(n, 3))
        labels = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        if np.all(labels == labels[0]):
            labels[int(rng.integers(n))] = -labels[0]
        c = float(rng.choice([0.5, 1.0, 5.0]))
        gram = gram_matrix(points, KernelSpec("RBF", gamma=0.5)).values
        model = train_smo(gram, labels, TrainConfig(C=c, kkt_tolerance=1e-5))
        alphas, objective = qp_dual_oracle(gram, labels, c)
        worst = max(worst, abs(model.dual_objective - objective))
        rows = np.exp(
            -0.5
            * ((rng.normal(size=(6, 3))[:, None, :] - points[None, :, :]) ** 2).sum(-1)
        )
        bias = oracle_bias(gram, labels, alphas, c)
        oracle_pred = np.where(rows @ (alphas * labels) + bias >= 0.0, 1, -1)
        agree = agree and bool(np.array_equal(predict_many(model, rows), oracle_pred))
    return {
        "name": "smo_matches_projected_gradient_qp",
        "passed": exact and worst <= 1e-6 and agree,
        "detail": f"two-point exact={exact}, max objective gap {worst:.3e}, "
        f"predictions agree={agree}",
    }


def _check_shot_estimator(rng) -> dict:
    from .quantum_state import (
        PauliObservable,
        apply_gate,
        new_zero_state,
        rx,
        sampled_pauli_expectation,
    )

    state = new_zero_state(1)
    obs = PauliObservable((0,), "X")
    shots, seeds = 4096, 200
    means = [
        sampled_pauli_expectation(state, obs, shots, seed=int(rng.integers(2**63)))
        for _ in range(seeds)
    ]
    bias_ok = abs(float(np.mean(means))) < 3.0 / math.sqrt(seeds * shots)

    tilted = apply_gate(new_zero_state(1), rx(0, 0.9))
    z_obs = PauliObservable((0,), "Z")
    shot_counts = [64, 256, 1024, 4096]
    stds = []
    for count in shot_counts:
        estimates = [
            sampled_pauli_expectation(tilted, z_obs, count, seed=int(rng.integers(2**63)))
            for _ in range(200)
        ]
        stds.append(float(np.std(estimates)))
    slope = float(np.polyfit(np.log(shot_counts), np.log(stds), 1)[0])
    return {
        "name": "shot_estimator_statistics",
        "passed": bias_ok and abs(slope + 0.5) < 0.1,
        "detail": f"mean bias ok={bias_ok}, error-scaling exponent {slope:.3f}",
    }


def _check_determinism(rng) -> dict:
    from .feature_maps import FeatureMapSpec
    from .kernels import KernelSpec, ProjectionStrategy, gram_matrix
    from .svm import TrainConfig, train_smo

    data = rng.uniform(0, math.pi, size=(12, 3))
    labels = np.where(np.arange(12) % 2 == 0, -1.0, 1.0)
    spec = KernelSpec(
        "PQK",
        gamma=0.3,
        feature_map=FeatureMapSpec("ThreeD", 3, with_cnot_ring=True),
        strategy=ProjectionStrategy("M2", 3),
        shots=128,
        shot_seed=7,
    )
    first = gram_matrix(data, spec)
    second = gram_matrix(data, spec)
    grams_equal = bool(np.array_equal(first.values, second.values))
    model_a = train_smo(first, labels, TrainConfig(C=2.0))
    model_b = train_smo(second, labels, TrainConfig(C=2.0))
    models_equal = bool(
        np.array_equal(model_a.alphas, model_b.alphas) and model_a.bias == model_b.bias
    )
    return {
        "name": "repeated_runs_bit_identical",
        "passed": grams_equal and models_equal,
        "detail": f"grams equal={grams_equal}, models equal={models_equal}",
    }


def _random_circuit(rng, n_qubits: int, length: int) -> list[Gate]:
    from .quantum_state import GATE_KINDS, ROTATION_KINDS, TWO_QUBIT_KINDS

    kinds = GATE_KINDS if n_qubits >= 2 else tuple(
        k for k in GATE_KINDS if k not in TWO_QUBIT_KINDS
    )
    gates = []
    for _ in range(length):
        kind = str(rng.choice(kinds))
        if kind in TWO_QUBIT_KINDS:
            qubits = tuple(int(q) for q in rng.choice(n_qubits, size=2, replace=False))
        else:
            qubits = (int(rng.integers(n_qubits)),)
        angle = (
            float(rng.uniform(-2 * math.pi, 2 * math.pi))
            if kind in ROTATION_KINDS
            else None
        )
        gates.append(Gate(kind, qubits, angle))
    return gates


def run_property_suite(seed: int) -> dict:
    """Run every self-check with a deterministic seed; returns a serializable report."""
    rng = np.random.default_rng(seed)
    checks = [
        _check_simulator(rng),
        _check_partial_trace(rng),
        _check_rotx_identities(rng),
        _check_pqk_equals_rbf(rng),
        _check_gram_psd(rng),
        _check_smo_against_qp(rng),
        _check_shot_estimator(rng),
        _check_determinism(rng),
    ]
    return {"seed": seed, "passed": all(c["passed"] for c in checks), "checks": checks}
