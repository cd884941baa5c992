"""Attested-execution registry, enclave programs and the client/host protocol."""

from qesim.enclave.attestation import Abort, AttestedExecution, verify_attestation
from qesim.enclave.crypto import CryptoSuite, crypto_suite
from qesim.enclave.hybrids import simulated_vs_real_transcript
from qesim.enclave.programs import OUTSRC_FUNCTIONS, RSR_FUNCTIONS, OutsourceProgram, RotationProgram
from qesim.enclave.protocol import SCENARIOS, adversarial_scenario, client_run

__all__ = [
    "Abort", "AttestedExecution", "verify_attestation", "CryptoSuite", "crypto_suite",
    "simulated_vs_real_transcript", "OUTSRC_FUNCTIONS", "RSR_FUNCTIONS", "OutsourceProgram",
    "RotationProgram", "SCENARIOS", "adversarial_scenario", "client_run",
]
