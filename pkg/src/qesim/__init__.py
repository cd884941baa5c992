"""Exact small-scale simulation of remote state rotation, blind delegated
computation on top of it, and an enclave that realises the rotation."""

from qesim.quantum import Angle, QuantumRegister

__version__ = "0.1.0"
__all__ = ["Angle", "QuantumRegister", "__version__"]
