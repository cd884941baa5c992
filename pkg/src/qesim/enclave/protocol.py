"""Client and host roles for the enclave protocols, plus adversarial scenarios.

The client talks to the untrusted host over a :class:`~qesim.transcript.Channel`
carrying framed wire records; the host relays to the attested-execution
registry.  Scenarios put an adversary on the wire (a channel tap) or make
the host misbehave, and report which abort fired.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from qesim.enclave.attestation import Abort, AttestedExecution, verify_attestation
from qesim.enclave.crypto import CryptoSuite, DecryptionError, crypto_suite, derive_key
from qesim.enclave.programs import (
    OutsourceProgram,
    QuantumApparatus,
    RotationProgram,
    decode_result,
    encode_call,
)
from qesim.enclave.wire import Kind, WireError, frame, pack_fields, unframe, unpack_fields
from qesim.quantum import QuantumRegister, plus_state
from qesim.transcript import Channel, Transcript

CLIENT = "client"
SERVER = "server"
DEFAULT_SID = "sid-0"
SCENARIOS = ("honest", "forge-attestation", "tamper-ct", "replay-ct", "substitute-ctout")

_CATEGORY = {
    "success": "success",
    "sig-failure": "client-abort",
    "authenc-failure": "client-abort",
    "decryption-abort": "enclave-abort",
    "replay-abort": "enclave-abort",
}


class Client:
    """Honest client: key exchange with attestation check, then encrypted compute rounds."""

    def __init__(self, suite: CryptoSuite, mpk: bytes, program_name: str, rng: np.random.Generator,
                 sid: str = DEFAULT_SID):
        self.suite = suite
        self.mpk = mpk
        self.program_name = program_name
        self.sid = sid
        self._rng = rng
        self._a: int | None = None
        self._g_a: int | None = None
        self.eid: bytes | None = None
        self._sk: bytes | None = None
        self._seen_out: set[bytes] = set()

    def keyex_request(self) -> bytes:
        group = self.suite.group
        self._a = group.random_exponent(self._rng)
        self._g_a = group.gen_exp(self._a)
        return frame(Kind.KEYEX_REQUEST, pack_fields(group.encode(self._g_a)))

    def on_keyex_response(self, record: bytes) -> None:
        group = self.suite.group
        try:
            kind, payload = unframe(record)
            if kind != Kind.KEYEX_RESPONSE:
                raise WireError(f"unexpected {kind.label}")
            eid, g_b_bytes, sig = unpack_fields(payload, 3)
        except WireError as exc:
            raise Abort("sig-failure", f"malformed key exchange response: {exc}") from None
        g_b = int.from_bytes(g_b_bytes, "big")
        outp = (self._g_a, g_b)
        if not verify_attestation(self.suite.signature, self.mpk, self.sid, eid, self.program_name, outp, sig):
            raise Abort("sig-failure", "attestation does not verify")
        if not group.is_element(g_b):
            raise Abort("sig-failure", "g^b is not a group element")
        self.eid = eid
        self._sk = derive_key(group, group.exp(g_b, self._a))

    @property
    def session_key(self) -> bytes | None:
        return self._sk

    def compute_request(self, f: str, x: Any) -> bytes:
        if self._sk is None:
            raise Abort("protocol-order", "compute before key exchange")
        ct = self.suite.ae.encrypt(self._sk, encode_call(f, x), self._rng)
        return frame(Kind.COMPUTE_REQUEST, ct)

    def on_compute_response(self, record: bytes) -> Any:
        try:
            kind, ct_out = unframe(record)
            if kind != Kind.COMPUTE_RESPONSE:
                raise WireError(f"unexpected {kind.label}")
            plaintext = self.suite.ae.decrypt(self._sk, ct_out)
        except (WireError, DecryptionError) as exc:
            raise Abort("authenc-failure", str(exc)) from None
        if ct_out in self._seen_out:
            raise Abort("authenc-failure", "output ciphertext seen before")
        self._seen_out.add(ct_out)
        return decode_result(plaintext)


class QuantumSource:
    """The host's qubit source: |+>^n when honest, any state otherwise.

    ``state`` covers the ``n`` qubits handed to the enclave followed by any
    auxiliary qubits the host keeps.
    """

    def __init__(self, register: QuantumRegister, n: int, state: np.ndarray | None = None):
        self.register = register
        self.n = n
        self.state = state
        self.qubits: tuple[int, ...] = ()
        self.aux: tuple[int, ...] = ()
        self.initial: np.ndarray | None = None

    def emit(self) -> tuple[int, ...]:
        if self.state is None:
            labels = ()
            for _ in range(self.n):
                labels += self.register.add(plus_state(0), SERVER)
        else:
            labels = self.register.add(self.state, SERVER)
        self.qubits, self.aux = labels[: self.n], labels[self.n:]
        self.initial = self.register.density(labels)
        return self.qubits


class Server:
    """Untrusted host relaying between the client and its enclave."""

    def __init__(self, registry: AttestedExecution, program, apparatus: QuantumApparatus | None = None,
                 source: QuantumSource | None = None, sid: str = DEFAULT_SID):
        self.registry = registry
        self.program = program
        self.apparatus = apparatus
        self.source = source
        self.sid = sid
        self.eid: bytes | None = None
        self.last_ct: bytes | None = None

    def handle(self, record: bytes) -> bytes:
        kind, payload = unframe(record)
        if kind == Kind.KEYEX_REQUEST:
            (g_a_bytes,) = unpack_fields(payload, 1)
            self.eid = self.registry.install(SERVER, self.sid, self.program)
            (g_a, g_b), sig = self.registry.resume(SERVER, self.eid, ("keyex", int.from_bytes(g_a_bytes, "big")))
            return frame(Kind.KEYEX_RESPONSE,
                         pack_fields(self.eid, self.registry_group_encode(g_b), sig))
        if kind == Kind.COMPUTE_REQUEST:
            return frame(Kind.COMPUTE_RESPONSE, self.resume_compute(payload))
        raise WireError(f"host does not accept {kind.label}")

    def registry_group_encode(self, value: int) -> bytes:
        return self.program.suite.group.encode(value)

    def resume_compute(self, ct: bytes) -> bytes:
        if self.apparatus is not None and self.source is not None:
            self.apparatus.load(self.source.register, self.source.emit(), SERVER)
        self.last_ct = ct
        ct_out, _ = self.registry.resume(SERVER, self.eid, ("compute", ct))
        return ct_out


@dataclass
class Session:
    kind: str
    y: Any
    transcript: Transcript
    registry: AttestedExecution
    client: Client
    server: Server
    register: QuantumRegister | None = None
    source: QuantumSource | None = None
    extra: dict = field(default_factory=dict)

    @property
    def enclave_key(self) -> bytes:
        return self.registry.inspect(SERVER, self.server.eid)["sk"]


def _rngs(seed: int | np.random.SeedSequence, n: int) -> list[np.random.Generator]:
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in seq.spawn(n)]


def client_run(kind: str, f: str | None = None, x: Any = None, *, seed: int = 0,
               suite: CryptoSuite | str = "toy", tap: Callable | None = None,
               n_qubits: int | None = None, source_state: np.ndarray | None = None,
               max_qubits: int = 12) -> Session:
    """One full session: key exchange then a compute round.

    ``kind="outsrc"`` returns y = f(x).  ``kind="rsr"`` returns the angle
    vector; by default the client picks ``n_qubits`` uniform angles itself
    and the host's source emits |+>^n (or ``source_state``).
    """
    if isinstance(suite, str):
        suite = crypto_suite(suite)
    reg_rng, enc_rng, cli_rng = _rngs(seed, 3)
    registry = AttestedExecution(suite.signature, reg_rng, DEFAULT_SID)
    register = source = apparatus = None
    if kind == "outsrc":
        program = OutsourceProgram(suite, enc_rng)
    elif kind == "rsr":
        if f is None:
            f = "angles"
        if x is None:
            n = n_qubits if n_qubits is not None else 1
            x = [int(k) for k in cli_rng.integers(8, size=n)]
        n = len(x) if n_qubits is None and isinstance(x, list) else (n_qubits or int(x))
        register = QuantumRegister(max_qubits)
        source = QuantumSource(register, n, source_state)
        apparatus = QuantumApparatus()
        program = RotationProgram(suite, enc_rng, apparatus)
    else:
        raise ValueError(f"unknown session kind {kind!r}")

    client = Client(suite, registry.getpk(), program.name, cli_rng)
    server = Server(registry, program, apparatus, source)
    channel = Channel(CLIENT, SERVER, tap=tap)

    try:
        channel.send(CLIENT, Kind.KEYEX_REQUEST.label, client.keyex_request())
        _, rec = channel.recv(SERVER)
        channel.send(SERVER, Kind.KEYEX_RESPONSE.label, server.handle(rec))
        _, rec = channel.recv(CLIENT)
        client.on_keyex_response(rec)

        channel.send(CLIENT, Kind.COMPUTE_REQUEST.label, client.compute_request(f, x))
        _, rec = channel.recv(SERVER)
        channel.send(SERVER, Kind.COMPUTE_RESPONSE.label, server.handle(rec))
        _, rec = channel.recv(CLIENT)
        y = client.on_compute_response(rec)
    except Abort as exc:
        exc.transcript = channel.transcript
        raise
    return Session(kind, y, channel.transcript, registry, client, server, register, source,
                   {"f": f, "x": x})


# --- adversaries ---------------------------------------------------------------------

def flip_bit(data: bytes, byte_index: int, bit: int = 0) -> bytes:
    out = bytearray(data)
    out[byte_index] ^= 1 << bit
    return bytes(out)


def _field_tap(target: Kind, field_index: int, count: int, rng: np.random.Generator) -> Callable:
    """Tap flipping one random bit inside one field of one record kind."""

    def tap(sender: str, kind: str, record: bytes) -> bytes:
        if kind != target.label:
            return record
        k, payload = unframe(record)
        if count:
            fields = unpack_fields(payload, count)
            victim = fields[field_index]
            fields[field_index] = flip_bit(victim, int(rng.integers(len(victim))), int(rng.integers(8)))
            return frame(k, pack_fields(*fields))
        return frame(k, flip_bit(payload, int(rng.integers(len(payload))), int(rng.integers(8))))

    return tap


@dataclass
class ScenarioOutcome:
    scenario: str
    label: str
    category: str
    y: Any = None
    transcript: Transcript | None = None
    forged_accepted: bool = False
    detail: str = ""


def adversarial_scenario(kind: str, *, seed: int = 0, suite: CryptoSuite | str = "toy",
                         f: str = "sum", x: Any = (1, 2, 3)) -> ScenarioOutcome:
    """Run an outsourcing session under attack and report which abort fired.

    ``forge-attestation`` flips a bit of the attestation signature,
    ``tamper-ct`` a bit of the request ciphertext, ``substitute-ctout`` a
    bit of the response ciphertext; ``replay-ct`` has the host resubmit an
    already executed request to its enclave.
    """
    if kind not in SCENARIOS:
        raise ValueError(f"unknown scenario {kind!r}")
    x = list(x) if isinstance(x, tuple) else x
    (adv_rng,) = _rngs(np.random.SeedSequence([seed, 1]), 1)
    tap = None
    if kind == "forge-attestation":
        tap = _field_tap(Kind.KEYEX_RESPONSE, 2, 3, adv_rng)
    elif kind == "tamper-ct":
        tap = _field_tap(Kind.COMPUTE_REQUEST, 0, 0, adv_rng)
    elif kind == "substitute-ctout":
        tap = _field_tap(Kind.COMPUTE_RESPONSE, 0, 0, adv_rng)

    try:
        session = client_run("outsrc", f, x, seed=seed, suite=suite, tap=tap)
    except Abort as exc:
        # a substituted response that still decrypted would have returned normally
        return ScenarioOutcome(kind, exc.label, _CATEGORY.get(exc.label, "abort"),
                               transcript=getattr(exc, "transcript", None), detail=exc.detail)

    if kind == "replay-ct":
        try:
            session.server.resume_compute(session.server.last_ct)
        except Abort as exc:
            return ScenarioOutcome(kind, exc.label, _CATEGORY[exc.label], session.y, session.transcript,
                                   detail=exc.detail)
        return ScenarioOutcome(kind, "replay-accepted", "violation", session.y, session.transcript)
    if kind == "substitute-ctout":
        return ScenarioOutcome(kind, "authenc-failure", "violation", session.y, session.transcript,
                               forged_accepted=True)
    if kind != "honest":
        return ScenarioOutcome(kind, "undetected", "violation", session.y, session.transcript)
    return ScenarioOutcome(kind, "success", "success", session.y, session.transcript)


def outcome_labels(scenarios: Sequence[str], seeds: Sequence[int], **kwargs) -> dict[str, list[str]]:
    return {s: [adversarial_scenario(s, seed=i, **kwargs).label for i in seeds] for s in scenarios}
