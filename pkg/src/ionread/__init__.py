"""Readout statistics, detector calibration and crosstalk budgets for trapped-ion qubits."""

__version__ = "0.1.0"
