"""Numerical dynamics of the iterated CNOT + faulty-Hadamard qubit protocol."""

__version__ = "0.1.0"
