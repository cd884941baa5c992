"""Anonymous attested execution: a registry of enclave programs whose outputs are signed."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from qesim.enclave.crypto import SignatureScheme
from qesim.enclave.wire import encode_value


class Abort(Exception):
    """Protocol abort with a machine-readable label."""

    def __init__(self, label: str, detail: str = ""):
        super().__init__(f"{label}: {detail}" if detail else label)
        self.label = label
        self.detail = detail


class Program(Protocol):
    name: str

    def __call__(self, inp: Any, mem: Any) -> tuple[Any, Any]: ...


@dataclass
class Entry:
    idx: str
    program: Program
    mem: Any = None


def attested_message(idx: str, eid: bytes, program_name: str, outp: Any) -> bytes:
    return encode_value((idx, eid, program_name, outp))


class AttestedExecution:
    """Registry of installed enclave programs keyed by (eid, party).

    ``parties`` are the registered platforms; those in ``corrupt`` may
    install under any session index, honest ones only under ``sid``.
    Table access is serialised, so one registry can serve concurrent
    sessions.
    """

    def __init__(self, scheme: SignatureScheme, rng: np.random.Generator, sid: str = "sid-0",
                 parties: tuple[str, ...] = ("server",), corrupt: tuple[str, ...] = (),
                 security_bits: int = 128):
        self.scheme = scheme
        self.sid = sid
        self.parties = frozenset(parties)
        self.corrupt = frozenset(corrupt)
        self.security_bits = security_bits
        self._rng = rng
        self._mpk, self._msk = scheme.keygen(rng)
        self._table: dict[tuple[bytes, str], Entry] = {}
        self._lock = threading.Lock()

    def getpk(self) -> bytes:
        return self._mpk

    def install(self, party: str, idx: str, program: Program) -> bytes:
        if party not in self.parties:
            raise Abort("unregistered", party)
        if party not in self.corrupt and idx != self.sid:
            raise Abort("sid-mismatch", f"{idx!r} != {self.sid!r}")
        with self._lock:
            while True:
                eid = self._rng.bytes(self.security_bits // 8)
                if (eid, party) not in self._table:
                    break
            self._table[(eid, party)] = Entry(idx, program)
        return eid

    def resume(self, party: str, eid: bytes, inp: Any) -> tuple[Any, bytes]:
        with self._lock:
            entry = self._table.get((eid, party))
            if entry is None:
                raise Abort("not-found", "no such enclave")
            outp, mem = entry.program(inp, entry.mem)
            entry.mem = mem
            message = attested_message(entry.idx, eid, entry.program.name, outp)
        return outp, self.scheme.sign(self._msk, message)

    def inspect(self, party: str, eid: bytes) -> Any:
        """Enclave memory, for simulator-side checks only; no protocol role reaches this."""
        return self._table[(eid, party)].mem


def verify_attestation(scheme: SignatureScheme, mpk: bytes, sid: str, eid: bytes,
                       program_name: str, outp: Any, signature: bytes) -> bool:
    return scheme.verify(mpk, attested_message(sid, eid, program_name, outp), signature)
