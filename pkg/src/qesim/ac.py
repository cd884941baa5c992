"""Remote state rotation and remote state preparation resources.

Resources act on a shared :class:`~qesim.quantum.QuantumRegister`.  The
client interface receives a classical :class:`Angle`; the server interface
exchanges qubits by ownership transfer.  Every resource draws its angle
from ``rng`` unless ``theta`` is given, which is how branch enumeration
fixes the internal randomness.

Output comparisons go through :class:`CqState`, the exact joint state of
the client's angle register and the server's quantum system, built by
enumerating all eight angles (and all measurement outcomes) rather than
by sampling.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from qesim.quantum import (
    CNOT,
    EQ_TOL,
    VALID_TOL,
    Angle,
    QuantumError,
    QuantumRegister,
    is_density_matrix,
    is_positive,
    num_qubits,
    plus_state,
    projector,
    random_density_matrix,
    random_pure_state,
    random_unitary,
    trace_distance,
    z_rotation,
)

CLIENT = "client"
SERVER = "server"
RSR_PARTY = "rsr"
RSP_PARTY = "rsp"
MRSP_PARTY = "mrsp"
SIMULATOR = "simulator"

StateFamily = Mapping[Angle, np.ndarray]
ProjectorFamily = Mapping[Angle, np.ndarray]


class InvalidFamily(ValueError):
    """Server input rejected by a resource.

    The resource state is untouched, so the caller may resubmit; this is
    how "ignore the input and wait for a valid one" is surfaced.
    """


def _draw(rng: np.random.Generator | None, theta: Angle | int | None) -> Angle:
    if theta is not None:
        return Angle(int(theta))
    if rng is None:
        raise ValueError("need an rng or a fixed theta")
    return Angle(int(rng.integers(8)))


def _full_family(family: Mapping) -> dict[Angle, np.ndarray]:
    out = {Angle(int(k)): np.asarray(v, dtype=complex) for k, v in family.items()}
    missing = [a for a in Angle.all() if a not in out]
    if missing:
        raise InvalidFamily(f"missing entries for angles {[a.k for a in missing]}")
    return out


# --- families ----------------------------------------------------------------

def weak_correlation_check(family: StateFamily, tol: float = VALID_TOL) -> bool:
    """True iff every state is valid and rho^t + rho^{t+pi} does not depend on t."""
    states = _full_family(family)
    if not all(is_density_matrix(rho, tol) for rho in states.values()):
        return False
    shapes = {rho.shape for rho in states.values()}
    if len(shapes) != 1:
        return False
    pair_sums = [states[a] + states[a.antipode()] for a in Angle.all()]
    return all(np.allclose(s, pair_sums[0], atol=tol, rtol=0) for s in pair_sums[1:])


def check_projector_family(projectors: ProjectorFamily, tol: float = VALID_TOL) -> dict[Angle, np.ndarray]:
    ops = _full_family(projectors)
    shapes = {op.shape for op in ops.values()}
    if len(shapes) != 1:
        raise InvalidFamily("operators of differing dimension")
    (shape,) = shapes
    eye = np.eye(shape[0])
    for a, op in ops.items():
        if not is_positive(op, tol):
            raise InvalidFamily(f"operator for angle {a.k} is not positive")
        if not np.allclose(op + ops[a.antipode()], eye, atol=tol, rtol=0):
            raise InvalidFamily(f"operators for angles {a.k} and {a.antipode().k} do not sum to I")
    return ops


def plus_family() -> dict[Angle, np.ndarray]:
    return {a: projector(plus_state(a)) for a in Angle.all()}


def simulator_projectors() -> dict[Angle, np.ndarray]:
    """The family |+_{-theta}><+_{-theta}| submitted by the simulator."""
    return {a: projector(plus_state(-a)) for a in Angle.all()}


# --- resources ------------------------------------------------------------------

def rsr_b(register: QuantumRegister, qubit: int, rng: np.random.Generator | None = None, *,
          sender: str = SERVER, theta: Angle | int | None = None) -> Angle:
    """Remote state rotation.

    Takes the single qubit ``qubit`` from ``sender``, applies Z(theta) for a
    uniformly drawn theta and hands the qubit back.  The qubit may be
    entangled with anything else in the register.  Returns theta, which is
    delivered at the client interface only.
    """
    if isinstance(qubit, (tuple, list)):
        if len(qubit) != 1:
            raise QuantumError("remote state rotation takes exactly one qubit")
        (qubit,) = qubit
    register.transfer([qubit], sender, RSR_PARTY)
    theta = _draw(rng, theta)
    register.apply(z_rotation(theta), [qubit], RSR_PARTY)
    register.transfer([qubit], RSR_PARTY, sender)
    return theta


def rsp_b(register: QuantumRegister, rng: np.random.Generator | None = None, *, c: int = 0,
          family: StateFamily | None = None, receiver: str = SERVER,
          theta: Angle | int | None = None) -> tuple[Angle, tuple[int, ...]]:
    """Random remote state preparation.

    With ``c=0`` the server gets |+_theta>; with ``c=1`` it gets the state
    ``family[theta]`` of its own choosing, provided the family passes
    :func:`weak_correlation_check`.  Returns (theta, new qubit labels).
    """
    if c:
        if family is None:
            raise InvalidFamily("c=1 needs a state family")
        states = _full_family(family)
        if not weak_correlation_check(states):
            raise InvalidFamily("family violates the weak correlation conditions")
    theta = _draw(rng, theta)
    state = states[theta] if c else plus_state(theta)
    labels = register.add(state, RSP_PARTY)
    register.transfer(labels, RSP_PARTY, receiver)
    return theta, labels


def mrsp_b(register: QuantumRegister, rng: np.random.Generator | None = None, *, c: int = 0,
           projectors: ProjectorFamily | None = None, qubits: tuple[int, ...] | None = None,
           sender: str = SERVER, theta: Angle | int | None = None) -> tuple[Angle, tuple[int, ...]]:
    """Measurement-based remote state preparation.

    With ``c=0`` behaves like honest :func:`rsp_b`.  With ``c=1`` the sender
    supplies eight positive operators with Pi_t + Pi_{t+pi} = I and the
    qubits ``qubits``; the resource measures {Pi_theta, Pi_{theta+pi}} and
    returns theta' (theta or theta+pi, labelled by the operator that
    fired) to the client and the post-measurement qubits to the sender.
    """
    if not c:
        theta = _draw(rng, theta)
        labels = register.add(plus_state(theta), MRSP_PARTY)
        register.transfer(labels, MRSP_PARTY, sender)
        return theta, labels
    if projectors is None or qubits is None:
        raise InvalidFamily("c=1 needs operators and a state")
    ops = check_projector_family(projectors)
    dim = next(iter(ops.values())).shape[0]
    if dim != 2 ** len(qubits):
        raise InvalidFamily(f"operators of dimension {dim} do not match {len(qubits)} qubit(s)")
    register.transfer(qubits, sender, MRSP_PARTY)
    theta = _draw(rng, theta)
    outcome, _ = register.measure_povm(qubits, [ops[theta], ops[theta.antipode()]], MRSP_PARTY, rng)
    register.transfer(qubits, MRSP_PARTY, sender)
    return (theta if outcome == 0 else theta.antipode()), tuple(qubits)


def simulator_sigma_b(register: QuantumRegister, qubit: int, rng: np.random.Generator | None = None, *,
                      sender: str = SERVER, theta: Angle | int | None = None) -> Angle:
    """Server-side simulator that turns measurement-based preparation into a rotation.

    Receives the server's qubit, entangles it with a fresh |0> ancilla by
    CNOT (server qubit as control), feeds the ancilla to :func:`mrsp_b`
    with c=1 and the operators |+_{-t}><+_{-t}|, and returns the server's
    qubit.  The ancilla is traced out.  Returns the angle the resource
    delivers to the client; ``theta`` fixes the resource's internal draw.
    """
    register.transfer([qubit], sender, SIMULATOR)
    (ancilla,) = register.add(np.array([1, 0], dtype=complex), SIMULATOR)
    register.apply(CNOT, [qubit, ancilla], SIMULATOR)
    theta_out, _ = mrsp_b(register, rng, c=1, projectors=simulator_projectors(),
                          qubits=(ancilla,), sender=SIMULATOR, theta=theta)
    register.discard([ancilla], SIMULATOR)
    register.transfer([qubit], SIMULATOR, sender)
    return theta_out


# --- cq states and the distinguisher --------------------------------------------

@dataclass
class CqState:
    """sum_t p(t) |t><t| (x) rho^t over the eight angles."""

    weights: dict[Angle, float]
    branches: dict[Angle, np.ndarray]
    dim: int = field(init=False)

    def __post_init__(self):
        dims = {rho.shape[0] for rho in self.branches.values()}
        if len(dims) != 1:
            raise QuantumError("branch states of differing dimension")
        (self.dim,) = dims
        if abs(sum(self.weights.values()) - 1) > EQ_TOL:
            raise QuantumError(f"weights sum to {sum(self.weights.values())}")

    def weighted(self, theta: Angle) -> np.ndarray:
        p = self.weights.get(theta, 0.0)
        if p == 0:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return p * self.branches[theta]

    def family(self) -> dict[Angle, np.ndarray]:
        return {a: self.branches[a] for a in Angle.all() if a in self.branches}

    def operator(self) -> np.ndarray:
        """The full block-diagonal operator, angle register first."""
        out = np.zeros((8 * self.dim, 8 * self.dim), dtype=complex)
        for a in Angle.all():
            sl = slice(a.k * self.dim, (a.k + 1) * self.dim)
            out[sl, sl] = self.weighted(a)
        return out


def distinguish(s1: CqState, s2: CqState) -> float:
    """Optimal one-shot distinguishing advantage: trace distance of the cq operators."""
    if s1.dim != s2.dim:
        raise QuantumError(f"dimension mismatch: {s1.dim} vs {s2.dim}")
    # block diagonal, so the trace norm splits over angles
    return sum(trace_distance(s1.weighted(a), s2.weighted(a)) for a in Angle.all())


@dataclass(frozen=True)
class ServerInput:
    """What a (possibly dishonest) server feeds in: the first qubit is sent, the rest is kept."""

    state: np.ndarray
    kind: str = "custom"

    @property
    def n_aux(self) -> int:
        return num_qubits(np.asarray(self.state).shape[0]) - 1


def honest_input() -> ServerInput:
    return ServerInput(plus_state(0), "honest")


def random_server_input(rng: np.random.Generator, kind: str = "entangled", n_aux: int = 1) -> ServerInput:
    """Adversarial preparation Omega (|+><+| (x) rho_aux) Omega^dagger.

    ``kind`` is "pure" (one qubit, random unitary), "mixed" (one random
    mixed qubit) or "entangled" (Haar unitary over the qubit and ``n_aux``
    auxiliary qubits in a random mixed state).
    """
    if kind == "pure":
        return ServerInput(random_unitary(2, rng) @ plus_state(0), kind)
    if kind == "mixed":
        return ServerInput(random_density_matrix(1, rng), kind)
    if kind == "entangled":
        aux = random_density_matrix(n_aux, rng) if rng.random() < 0.5 else random_pure_state(n_aux, rng)
        aux = aux if aux.ndim == 2 else projector(aux)
        omega = random_unitary(2 ** (n_aux + 1), rng)
        rho = omega @ np.kron(projector(plus_state(0)), aux) @ omega.conj().T
        return ServerInput(rho, kind)
    raise ValueError(f"unknown server input kind {kind!r}")


SYSTEMS = ("rsr-honest", "mrsp-honest", "rsr", "mrsp-sim")


def output_cq_state(system: str, server_input: ServerInput | None = None,
                    max_qubits: int = 12) -> CqState:
    """Exact output of one of the four composed systems.

    ``"rsr-honest"``   client converter . RSR . honest server converter
    ``"mrsp-honest"``  MRSP with the server interface filtered
    ``"rsr"``          client converter . RSR, server input left open
    ``"mrsp-sim"``     MRSP . simulator, server input left open

    Honest systems ignore ``server_input`` and use |+>.  The server part of
    each branch is the state of everything the server holds afterwards.
    """
    if system not in SYSTEMS:
        raise ValueError(f"unsupported composition {system!r}")
    honest = system.endswith("honest")
    state = honest_input().state if honest or server_input is None else server_input.state
    acc: dict[Angle, np.ndarray] = {}
    weights: dict[Angle, float] = {}

    def record(label: Angle, weight: float, rho: np.ndarray) -> None:
        weights[label] = weights.get(label, 0.0) + weight
        acc[label] = acc.get(label, 0) + weight * rho

    for theta in Angle.all():
        if system == "mrsp-honest":
            reg = QuantumRegister(max_qubits)
            label, _ = mrsp_b(reg, c=0, theta=theta)
            record(label, 1 / 8, reg.density(reg.held_by(SERVER)))
            continue
        if system == "mrsp-sim":
            for outcome in (0, 1):
                reg = QuantumRegister(max_qubits)
                labels = reg.add(state, SERVER)
                reg.force([outcome])
                label = simulator_sigma_b(reg, labels[0], theta=theta)
                if reg.weight > 0:
                    record(label, reg.weight / 8, reg.density(reg.held_by(SERVER)))
            continue
        reg = QuantumRegister(max_qubits)
        labels = reg.add(state, SERVER)
        label = rsr_b(reg, labels[0], theta=theta)
        record(label, 1 / 8, reg.density(reg.held_by(SERVER)))

    branches = {a: acc[a] / weights[a] for a in acc if weights[a] > 0}
    return CqState({a: weights[a] for a in branches}, branches)


def correctness_distance() -> float:
    """Distance between the honest rotation system and filtered MRSP."""
    return distinguish(output_cq_state("rsr-honest"), output_cq_state("mrsp-honest"))


def security_distance(server_input: ServerInput) -> float:
    """Distance between the open rotation system and MRSP with the simulator."""
    return distinguish(output_cq_state("rsr", server_input), output_cq_state("mrsp-sim", server_input))
