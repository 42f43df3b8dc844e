"""Quantum-kernel SVM experiments on tabular sensor data."""

__version__ = "0.1.0"
