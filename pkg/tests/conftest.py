import os
from pathlib import Path

import numpy as np
import pytest

from qksvm.quantum_state import GATE_KINDS, Gate, TWO_QUBIT_KINDS, ROTATION_KINDS

DATASET_ENV = "QKSVM_DATASET"
_DEFAULT_DATASET = Path(__file__).resolve().parent.parent / "data" / "iot_occupancy.csv"


def paper_dataset_path() -> Path | None:
    """Path of the real smart-office occupancy CSV, or None when not available."""
    candidate = Path(os.environ.get(DATASET_ENV, _DEFAULT_DATASET))
    return candidate if candidate.is_file() else None


def random_gate(rng: np.random.Generator, n_qubits: int) -> Gate:
    kinds = GATE_KINDS if n_qubits >= 2 else tuple(
        k for k in GATE_KINDS if k not in TWO_QUBIT_KINDS
    )
    kind = str(rng.choice(kinds))
    if kind in TWO_QUBIT_KINDS:
        qubits = tuple(rng.choice(n_qubits, size=2, replace=False).tolist())
    else:
        qubits = (int(rng.integers(n_qubits)),)
    angle = float(rng.uniform(-2 * np.pi, 2 * np.pi)) if kind in ROTATION_KINDS else None
    return Gate(kind, qubits, angle)


def random_circuit(rng: np.random.Generator, n_qubits: int, length: int) -> list[Gate]:
    return [random_gate(rng, n_qubits) for _ in range(length)]


def random_state_amplitudes(rng: np.random.Generator, n_qubits: int) -> np.ndarray:
    amps = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return amps / np.linalg.norm(amps)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
