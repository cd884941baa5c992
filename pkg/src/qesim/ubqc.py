"""Blind delegated computation over brickwork and cluster patterns.

Vertices are ``(column, row)`` pairs, 0-indexed, so sorting vertices gives
the column-major measurement order.  A pattern with ``m`` measured columns
has an extra output column ``m`` that the server prepares itself.

The client masks every measurement angle as
``delta = phi' + theta + pi*r``, where ``phi'`` is the angle after flow
corrections, ``theta`` the hidden preparation angle and ``r`` a random bit
that flips the reported signal.  Preparation of the hidden states goes
through one of three back ends: the client sending |+_theta> directly,
remote state preparation, or remote state rotation of server-made |+>.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from qesim import ac
from qesim.quantum import (
    CZ,
    DEFAULT_MAX_QUBITS,
    H,
    X,
    Z,
    Angle,
    QuantumRegister,
    ket,
    plus_state,
    z_rotation,
)
from qesim.transcript import Channel, ProtocolOrderError, Transcript

Vertex = tuple[int, int]

CLIENT = ac.CLIENT
SERVER = ac.SERVER
BACKENDS = ("direct", "rsp", "rsr")
DEFAULT_ENUMERATION_BOUND = 10**7


class PatternError(ValueError):
    pass


class EnumerationBoundExceeded(RuntimeError):
    pass


# --- graphs and patterns --------------------------------------------------------

@dataclass(frozen=True)
class PatternGraph:
    rows: int
    cols: int
    kind: str
    edges: frozenset[tuple[Vertex, Vertex]]

    @property
    def vertices(self) -> list[Vertex]:
        return [(c, r) for c in range(self.cols + 1) for r in range(self.rows)]

    @property
    def measured(self) -> list[Vertex]:
        return [(c, r) for c in range(self.cols) for r in range(self.rows)]

    @property
    def inputs(self) -> list[Vertex]:
        return [(0, r) for r in range(self.rows)]

    @property
    def outputs(self) -> list[Vertex]:
        return [(self.cols, r) for r in range(self.rows)]

    def neighbors(self, v: Vertex) -> set[Vertex]:
        return {b if a == v else a for a, b in self.edges if v in (a, b)}

    def flow(self, v: Vertex) -> Vertex:
        c, r = v
        if c >= self.cols:
            raise PatternError(f"output vertex {v} has no successor")
        return (c + 1, r)


def _brickwork_bridges(n: int, total_cols: int) -> set[tuple[Vertex, Vertex]]:
    # 1-indexed rule: at columns j = 3 mod 8 link odd rows i to i+1, at
    # j = 7 mod 8 link even rows; each brick gets a rung at j and at j+2
    bridges = set()
    for j in range(1, total_cols + 1):
        if j % 8 == 3:
            parity = 1
        elif j % 8 == 7:
            parity = 0
        else:
            continue
        for i in range(1, n):
            if i % 2 == parity:
                for col in (j, j + 2):
                    bridges.add(((col - 1, i - 1), (col - 1, i)))
    return bridges


def build_pattern_graph(n: int, m: int, kind: str = "brickwork") -> PatternGraph:
    """Graph with ``n`` rows, ``m`` measured columns and one output column.

    ``linear-cluster`` gives ``n`` disjoint chains of ``m + 1`` qubits.
    ``brickwork`` needs ``n >= 2`` and ``m + 1 = 5 (mod 8)`` columns in
    total so that every brick is complete.
    """
    if n < 1 or m < 1:
        raise PatternError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    edges = {((c, r), (c + 1, r)) for r in range(n) for c in range(m)}
    if kind == "brickwork":
        if n < 2 or (m + 1) % 8 != 5:
            raise PatternError(f"brickwork needs n >= 2 and m + 1 = 5 mod 8, got n={n}, m={m}")
        edges |= _brickwork_bridges(n, m + 1)
    elif kind != "linear-cluster":
        raise PatternError(f"unknown graph kind {kind!r}")
    return PatternGraph(n, m, kind, frozenset(edges))


@dataclass(frozen=True)
class Pattern:
    graph: PatternGraph
    phi: Mapping[Vertex, Angle]
    x_deps: Mapping[Vertex, frozenset[Vertex]]
    z_deps: Mapping[Vertex, frozenset[Vertex]]

    @property
    def size(self) -> int:
        return len(self.graph.measured)


def make_pattern(graph: PatternGraph, phi: Mapping[Vertex, int] | Sequence[int]) -> Pattern:
    """Attach angles (column-major sequence or vertex map) and flow dependencies."""
    measured = graph.measured
    if isinstance(phi, Mapping):
        angles = {v: Angle(int(phi[v])) for v in measured}
    else:
        if len(phi) != len(measured):
            raise PatternError(f"expected {len(measured)} angles, got {len(phi)}")
        angles = {v: Angle(int(k)) for v, k in zip(measured, phi)}
    x_deps = {w: set() for w in graph.vertices}
    z_deps = {w: set() for w in graph.vertices}
    for v in measured:
        f = graph.flow(v)
        x_deps[f].add(v)
        for w in graph.neighbors(f) - {v}:
            z_deps[w].add(v)
    for w in graph.vertices:
        if any(u >= w for u in x_deps[w] | z_deps[w]):
            raise PatternError(f"dependency of {w} is not measured before it")
    return Pattern(graph, angles,
                   {w: frozenset(s) for w, s in x_deps.items()},
                   {w: frozenset(s) for w, s in z_deps.items()})


# --- angle arithmetic ---------------------------------------------------------------

def updated_angle(phi: Angle, s_x: int, s_z: int) -> Angle:
    """Flow-corrected angle (-1)^sX * phi + sZ * pi."""
    return Angle((-1) ** (s_x & 1) * phi.k + 4 * (s_z & 1))


def delta_angle(phi_prime: Angle, theta: Angle, r: int) -> Angle:
    return Angle(phi_prime.k + theta.k + 4 * (r & 1))


def _parity(signals: Mapping[Vertex, int], deps: frozenset[Vertex]) -> int:
    return sum(signals[u] for u in deps) & 1


# --- oracle -------------------------------------------------------------------------

def target_state(pattern: Pattern, inputs: Sequence[int] | None = None) -> np.ndarray:
    """Ideal output as a plain gate circuit, without any measurement.

    Each column applies the CZ rungs living in that column and then
    H Z(-phi) on every row; the output column only contributes its rungs.
    The input register is Z^x |+>^n for classical input bits x.
    """
    g = pattern.graph
    bits = _inputs(g, inputs)
    psi = np.ones(1, dtype=complex)
    for b in bits:
        psi = np.kron(psi, plus_state(4 * b))
    n = g.rows

    def on(u: np.ndarray, targets: list[int]) -> np.ndarray:
        t = psi.reshape((2,) * n)
        k = len(targets)
        out = np.tensordot(u.reshape((2,) * 2 * k), t, axes=(list(range(k, 2 * k)), targets))
        return np.moveaxis(out, list(range(k)), targets).reshape(-1)

    for c in range(g.cols + 1):
        for (a, b) in sorted(g.edges):
            if a[0] == b[0] == c:
                psi = on(CZ, [a[1], b[1]])
        if c < g.cols:
            for r in range(n):
                psi = on(H @ z_rotation(-pattern.phi[(c, r)]), [r])
    return psi


def _inputs(graph: PatternGraph, inputs: Sequence[int] | None) -> list[int]:
    bits = [0] * graph.rows if inputs is None else [int(b) & 1 for b in inputs]
    if len(bits) != graph.rows:
        raise PatternError(f"expected {graph.rows} input bits, got {len(bits)}")
    return bits


# --- parties ------------------------------------------------------------------------------

class ClientSession:
    """Client state: hidden angles, flip bits and the corrected signals."""

    def __init__(self, pattern: Pattern, rng: np.random.Generator, inputs: Sequence[int] | None = None):
        self.pattern = pattern
        self.rng = rng
        self.inputs = _inputs(pattern.graph, inputs)
        self.r = {v: int(rng.integers(2)) for v in pattern.graph.measured}
        self.theta: dict[Vertex, Angle] = {}
        self.signals: dict[Vertex, int] = {}
        self.deltas: dict[Vertex, Angle] = {}

    def set_theta(self, v: Vertex, theta: Angle) -> None:
        if v in self.theta:
            raise ProtocolOrderError(f"hidden angle for {v} already fixed")
        self.theta[v] = theta

    def next_delta(self, v: Vertex) -> Angle:
        p = self.pattern
        for u in p.x_deps[v] | p.z_deps[v]:
            if u not in self.signals:
                raise ProtocolOrderError(f"{v} needs the signal of {u} first")
        if v not in self.theta:
            raise ProtocolOrderError(f"{v} was never prepared")
        phi = p.phi[v]
        if v[0] == 0:
            phi = phi + 4 * self.inputs[v[1]]
        phi_prime = updated_angle(phi, _parity(self.signals, p.x_deps[v]), _parity(self.signals, p.z_deps[v]))
        delta = delta_angle(phi_prime, self.theta[v], self.r[v])
        self.deltas[v] = delta
        return delta

    def record(self, v: Vertex, reported: int) -> int:
        if v in self.signals:
            raise ProtocolOrderError(f"signal for {v} already recorded")
        self.signals[v] = int(reported) ^ self.r[v]
        return self.signals[v]

    def byproducts(self, w: Vertex) -> tuple[int, int]:
        p = self.pattern
        return _parity(self.signals, p.x_deps[w]), _parity(self.signals, p.z_deps[w])


class ServerSession:
    """Server state: the qubits laid out on the graph."""

    def __init__(self, register: QuantumRegister, graph: PatternGraph):
        self.register = register
        self.graph = graph
        self.qubits: dict[Vertex, int] = {}
        self.entangled = False

    def receive(self, v: Vertex, label: int) -> None:
        if self.register.owner(label) != SERVER:
            raise ProtocolOrderError(f"qubit for {v} is not held by the server")
        self.qubits[v] = label

    def make_plus(self) -> int:
        (label,) = self.register.add(plus_state(0), SERVER)
        return label

    def prepare_outputs(self) -> None:
        for w in self.graph.outputs:
            self.qubits[w] = self.make_plus()

    def entangle(self) -> None:
        if self.entangled:
            raise ProtocolOrderError("graph already entangled")
        missing = [v for v in self.graph.vertices if v not in self.qubits]
        if missing:
            raise ProtocolOrderError(f"no qubit for vertices {missing}")
        for a, b in sorted(self.graph.edges):
            self.register.apply(CZ, [self.qubits[a], self.qubits[b]], SERVER)
        self.entangled = True

    def measure(self, v: Vertex, delta: Angle, rng: np.random.Generator | None) -> int:
        if not self.entangled:
            raise ProtocolOrderError("measurement before entanglement")
        s, _ = self.register.measure(self.qubits.pop(v), delta, SERVER, rng)
        return s

    def measure_output(self, w: Vertex, rng: np.random.Generator | None) -> int:
        s, _ = self.register.measure_basis(self.qubits.pop(w), (ket("0"), ket("1")), SERVER, rng)
        return s


@dataclass
class UbqcRun:
    output: np.ndarray | tuple[int, ...]
    transcript: Transcript
    signals: dict[Vertex, int]
    reported: dict[Vertex, int]
    deltas: dict[Vertex, Angle]
    theta: dict[Vertex, Angle]
    r: dict[Vertex, int]
    weight: float = 1.0
    backend: str = "direct"
    output_mode: str = "quantum"
    extra: dict = field(default_factory=dict)

    def signal_key(self) -> tuple[int, ...]:
        return tuple(self.signals[v] for v in sorted(self.signals))


def run_ubqc(pattern: Pattern, backend: str = "direct", rng: np.random.Generator | None = None, *,
             inputs: Sequence[int] | None = None, reported: Sequence[int] | None = None,
             output_mode: str = "quantum", max_qubits: int = DEFAULT_MAX_QUBITS) -> UbqcRun:
    """Run the delegated computation once.

    ``reported`` forces the server's measurement outcomes (in measurement
    order), which is how branches are enumerated; the run's ``weight`` is
    then the probability of that branch.  In ``"quantum"`` output mode the
    output qubits are handed to the client, which applies the Pauli
    corrections and ends up with a density matrix.  In ``"classical"``
    mode the server measures them in the computational basis and the
    client undoes the X byproducts on the bits.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown preparation back end {backend!r}")
    if output_mode not in ("quantum", "classical"):
        raise ValueError(f"unknown output mode {output_mode!r}")
    rng = np.random.default_rng() if rng is None else rng
    graph = pattern.graph
    register = QuantumRegister(max_qubits)
    channel = Channel(CLIENT, SERVER)
    client = ClientSession(pattern, rng, inputs)
    server = ServerSession(register, graph)

    # preparation
    for v in graph.measured:
        if backend == "direct":
            theta = Angle(int(rng.integers(8)))
            (label,) = register.add(plus_state(theta), CLIENT)
            register.transfer([label], CLIENT, SERVER)
        elif backend == "rsp":
            theta, (label,) = ac.rsp_b(register, rng, c=0, receiver=SERVER)
        else:
            label = server.make_plus()
            theta = ac.rsr_b(register, label, rng, sender=SERVER)
        client.set_theta(v, theta)
        server.receive(v, label)
    server.prepare_outputs()
    server.entangle()

    # interaction
    if reported is not None:
        register.force(reported)
    reported_signals: dict[Vertex, int] = {}
    for v in graph.measured:
        channel.send(CLIENT, "delta", {"vertex": list(v), "delta": client.next_delta(v).k})
        _, msg = channel.recv(SERVER, expect="delta")
        s = server.measure(v, Angle(msg["delta"]), rng)
        channel.send(SERVER, "signal", {"vertex": list(v), "s": s})
        _, msg = channel.recv(CLIENT, expect="signal")
        reported_signals[v] = msg["s"]
        client.record(v, msg["s"])

    # output
    if output_mode == "quantum":
        labels = [server.qubits.pop(w) for w in graph.outputs]
        register.transfer(labels, SERVER, CLIENT)
        channel.send(SERVER, "output-qubits", {"count": len(labels)})
        for w, q in zip(graph.outputs, labels):
            s_x, s_z = client.byproducts(w)
            if s_x:
                register.apply(X, [q], CLIENT)
            if s_z:
                register.apply(Z, [q], CLIENT)
        output: np.ndarray | tuple[int, ...] = register.density(labels)
    else:
        bits = [server.measure_output(w, rng) for w in graph.outputs]
        channel.send(SERVER, "output-bits", {"bits": bits})
        output = tuple(b ^ client.byproducts(w)[0] for b, w in zip(bits, graph.outputs))

    return UbqcRun(output, channel.transcript, dict(client.signals), reported_signals,
                   dict(client.deltas), dict(client.theta), dict(client.r),
                   register.weight, backend, output_mode)


def output_distribution(pattern: Pattern, backend: str = "direct", seed: int = 0, *,
                        inputs: Sequence[int] | None = None,
                        bound: int = DEFAULT_ENUMERATION_BOUND,
                        max_qubits: int = DEFAULT_MAX_QUBITS) -> dict[tuple[int, ...], tuple[float, np.ndarray]]:
    """Exact map from corrected signal string to (probability, client output).

    Every branch reuses ``seed``, so the hidden angles and flip bits are
    the same across branches; only the server's outcomes change.
    """
    n = pattern.size
    if 2**n > bound:
        raise EnumerationBoundExceeded(f"{2**n} branches exceed the bound {bound}")
    out = {}
    for outcomes in itertools.product((0, 1), repeat=n):
        try:
            run = run_ubqc(pattern, backend, np.random.default_rng(seed), inputs=inputs,
                           reported=outcomes, max_qubits=max_qubits)
        except ValueError as exc:  # zero-probability branch
            if "probability zero" in str(exc):
                continue
            raise
        out[run.signal_key()] = (run.weight, run.output)
    return out


# --- blindness -----------------------------------------------------------------------------

def server_view_distribution(pattern: Pattern, inputs: Sequence[int] | None = None,
                             bound: int = DEFAULT_ENUMERATION_BOUND) -> dict[tuple, Fraction]:
    """Exact joint distribution of the server's view (all deltas, all reported signals).

    Enumerates every hidden angle, flip bit and corrected signal; corrected
    signals of a flow pattern are independent fair coins, so every branch
    has equal weight.  Keys are ``(deltas, reported)`` tuples of ints in
    measurement order.
    """
    measured = pattern.graph.measured
    n = len(measured)
    total = 32**n
    if total > bound:
        raise EnumerationBoundExceeded(f"{total} branches exceed the bound {bound}")
    index = {v: i for i, v in enumerate(measured)}
    bits = _inputs(pattern.graph, inputs)

    grid = np.indices((8,) * n + (2,) * (2 * n)).reshape(3 * n, -1).T
    theta, r, t = grid[:, :n], grid[:, n:2 * n], grid[:, 2 * n:]
    deltas = np.empty_like(theta)
    for v, i in index.items():
        s_x = np.bitwise_xor.reduce(t[:, [index[u] for u in pattern.x_deps[v]]], axis=1) \
            if pattern.x_deps[v] else 0
        s_z = np.bitwise_xor.reduce(t[:, [index[u] for u in pattern.z_deps[v]]], axis=1) \
            if pattern.z_deps[v] else 0
        phi = pattern.phi[v].k + (4 * bits[v[1]] if v[0] == 0 else 0)
        phi_prime = np.where(s_x == 1, -phi, phi) + 4 * s_z
        deltas[:, i] = (phi_prime + theta[:, i] + 4 * r[:, i]) % 8
    code = np.zeros(len(grid), dtype=np.int64)
    for i in range(n):
        code = code * 8 + deltas[:, i]
    for i in range(n):
        code = code * 2 + (t[:, i] ^ r[:, i])
    keys, counts = np.unique(code, return_counts=True)
    out = {}
    for key, count in zip(keys.tolist(), counts.tolist()):
        reported = []
        for _ in range(n):
            key, bit = divmod(key, 2)
            reported.append(bit)
        ds = []
        for _ in range(n):
            key, d = divmod(key, 8)
            ds.append(d)
        out[(tuple(reversed(ds)), tuple(reversed(reported)))] = Fraction(count, total)
    return out


def delta_marginal(view: Mapping[tuple, Fraction]) -> dict[tuple[int, ...], Fraction]:
    out: dict[tuple[int, ...], Fraction] = {}
    for (deltas, _), p in view.items():
        out[deltas] = out.get(deltas, Fraction(0)) + p
    return out


def tv_distance(p: Mapping, q: Mapping) -> Fraction:
    keys = set(p) | set(q)
    return sum((abs(Fraction(p.get(k, 0)) - Fraction(q.get(k, 0))) for k in keys), Fraction(0)) / 2
