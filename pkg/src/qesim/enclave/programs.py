"""Enclave programs: key exchange followed by encrypted compute rounds.

Both programs keep ``mem = {"sk": key, "seen": set of accepted ciphertexts}``.
The rotation program additionally drives a :class:`QuantumApparatus` that
rotates whatever qubits the host loaded into it, honest or not.
"""

from __future__ import annotations

import json
import operator
from functools import reduce
from typing import Any, Callable

import numpy as np

from qesim.enclave.attestation import Abort
from qesim.enclave.crypto import CryptoSuite, DecryptionError, derive_key
from qesim.quantum import Angle, QuantumRegister, z_rotation

ENCLAVE = "enclave"

OUTSRC_FUNCTIONS: dict[str, Callable[[Any], Any]] = {
    "identity": lambda x: x,
    "sum": sum,
    "product": lambda x: reduce(operator.mul, x, 1),
    "max": max,
    "min": min,
    "len": len,
    "sorted": sorted,
    "reverse": lambda x: list(reversed(x)),
    "xor": lambda x: reduce(operator.xor, x, 0),
    "square": lambda x: x * x,
    "parity": lambda x: sum(x) % 2,
    "count-ones": lambda x: bin(x).count("1"),
}

# functions whose output is the angle vector (integers mod 8) to apply
RSR_FUNCTIONS: dict[str, Callable[[Any], list[int]]] = {
    "angles": lambda x: [int(k) % 8 for k in x],
    "zeros": lambda n: [0] * int(n),
    "negate": lambda x: [-int(k) % 8 for k in x],
    "antipodes": lambda x: [(int(k) + 4) % 8 for k in x],
}


def encode_call(f: str, x: Any) -> bytes:
    return json.dumps({"f": f, "x": x}, sort_keys=True, separators=(",", ":")).encode()


def decode_call(data: bytes) -> tuple[str, Any]:
    obj = json.loads(data)
    return obj["f"], obj["x"]


def encode_result(y: Any) -> bytes:
    return json.dumps(y, sort_keys=True, separators=(",", ":")).encode()


def decode_result(data: bytes) -> Any:
    return json.loads(data)


class QuantumApparatus:
    """Sealed single-qubit rotation stage fed by the host's quantum source."""

    def __init__(self) -> None:
        self.register: QuantumRegister | None = None
        self.loaded: tuple[int, ...] = ()
        self.source_owner = ""

    def load(self, register: QuantumRegister, qubits: tuple[int, ...], sender: str) -> None:
        register.transfer(qubits, sender, ENCLAVE)
        self.register, self.loaded, self.source_owner = register, tuple(qubits), sender

    def rotate(self, angles: list[int]) -> tuple[int, ...]:
        if self.register is None or len(self.loaded) != len(angles):
            raise Abort("source-unavailable", f"{len(self.loaded)} qubit(s) loaded for {len(angles)} angle(s)")
        for q, k in zip(self.loaded, angles):
            self.register.apply(z_rotation(Angle(k)), [q], ENCLAVE)
        self.register.transfer(self.loaded, ENCLAVE, self.source_owner)
        done, self.loaded, self.register = self.loaded, (), None
        return done


class _KeyExchangeProgram:
    name = "prog"

    def __init__(self, suite: CryptoSuite, rng: np.random.Generator):
        self.suite = suite
        self._rng = rng

    def __call__(self, inp: tuple, mem: Any) -> tuple[Any, Any]:
        op = inp[0]
        if op == "keyex":
            return self._keyex(inp[1], mem)
        if op == "compute":
            return self._compute(inp[1], mem)
        raise Abort("bad-input", repr(op))

    def _keyex(self, g_a: int, mem: Any) -> tuple[Any, Any]:
        group = self.suite.group
        if mem:
            raise Abort("protocol-order", "key already exchanged")
        if not group.is_element(g_a):
            raise Abort("bad-input", "g^a is not a group element")
        b = group.random_exponent(self._rng)
        sk = derive_key(group, group.exp(g_a, b))
        return (g_a, group.gen_exp(b)), {"sk": sk, "seen": set()}

    def _open(self, ct: bytes, mem: Any) -> tuple[str, Any]:
        if not mem:
            raise Abort("protocol-order", "compute before key exchange")
        try:
            plaintext = self.suite.ae.decrypt(mem["sk"], ct)
        except DecryptionError as exc:
            raise Abort("decryption-abort", str(exc)) from None
        if ct in mem["seen"]:
            raise Abort("replay-abort", "ciphertext seen before")
        try:
            return decode_call(plaintext)
        except (ValueError, KeyError, TypeError):
            raise Abort("bad-input", "malformed call") from None

    def _seal(self, y: Any, ct: bytes, mem: Any) -> tuple[bytes, Any]:
        ct_out = self.suite.ae.encrypt(mem["sk"], encode_result(y), self._rng)
        return ct_out, {"sk": mem["sk"], "seen": mem["seen"] | {ct}}

    def _compute(self, ct: bytes, mem: Any) -> tuple[Any, Any]:
        raise NotImplementedError


class OutsourceProgram(_KeyExchangeProgram):
    """y = f(x) for f from :data:`OUTSRC_FUNCTIONS`, returned encrypted."""

    name = "prog_outsrc"

    def _compute(self, ct: bytes, mem: Any) -> tuple[Any, Any]:
        f, x = self._open(ct, mem)
        if f not in OUTSRC_FUNCTIONS:
            raise Abort("unknown-function", f)
        return self._seal(OUTSRC_FUNCTIONS[f](x), ct, mem)


class RotationProgram(_KeyExchangeProgram):
    """Angles = f(x); rotates the loaded source qubits and returns the angles encrypted."""

    name = "prog_rsr"

    def __init__(self, suite: CryptoSuite, rng: np.random.Generator, apparatus: QuantumApparatus):
        super().__init__(suite, rng)
        self.apparatus = apparatus

    def _compute(self, ct: bytes, mem: Any) -> tuple[Any, Any]:
        f, x = self._open(ct, mem)
        if f not in RSR_FUNCTIONS:
            raise Abort("unknown-function", f)
        angles = RSR_FUNCTIONS[f](x)
        self.apparatus.rotate(angles)
        return self._seal(angles, ct, mem)
