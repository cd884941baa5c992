"""Exact dense simulation of a handful of qubits.

States are numpy arrays in big-endian qubit order: the first qubit of a
register is the most significant bit of a basis index.  Single-qubit
rotations are restricted to the eight angles k*pi/4 and are represented by
:class:`Angle`, so angle arithmetic is exact integer arithmetic mod 8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

VALID_TOL = 1e-9
EQ_TOL = 1e-12
DEFAULT_MAX_QUBITS = 12


class QuantumError(ValueError):
    """Invalid quantum operation (bad target, arity, dimension, state)."""


class OwnershipError(QuantumError):
    """A party touched qubits it does not hold."""


@dataclass(frozen=True, order=True)
class Angle:
    """An angle k*pi/4 with k taken mod 8."""

    k: int

    def __post_init__(self):
        object.__setattr__(self, "k", int(self.k) % 8)

    @classmethod
    def all(cls) -> tuple[Angle, ...]:
        return tuple(cls(k) for k in range(8))

    @property
    def radians(self) -> float:
        return self.k * math.pi / 4

    def antipode(self) -> Angle:
        return Angle(self.k + 4)

    def __add__(self, other: Angle | int) -> Angle:
        return Angle(self.k + _as_k(other))

    __radd__ = __add__

    def __sub__(self, other: Angle | int) -> Angle:
        return Angle(self.k - _as_k(other))

    def __neg__(self) -> Angle:
        return Angle(-self.k)

    def __int__(self) -> int:
        return self.k

    def __repr__(self) -> str:
        return f"Angle({self.k})"


def _as_k(value: Angle | int) -> int:
    if isinstance(value, Angle):
        return value.k
    if isinstance(value, (int, np.integer)):
        return int(value)
    raise TypeError(f"expected Angle or int, got {type(value).__name__}")


# --- gates -----------------------------------------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def z_rotation(theta: Angle | int) -> np.ndarray:
    """Z(theta) = diag(1, e^{i theta}), mapping |+> to |+_theta>."""
    theta = Angle(_as_k(theta))
    return np.diag([1.0, np.exp(1j * theta.radians)]).astype(complex)


_NAMED_GATES = {"I": I2, "X": X, "Y": Y, "Z": Z, "H": H, "CZ": CZ, "CNOT": CNOT}


def gate_matrix(gate: str | np.ndarray, theta: Angle | int | None = None) -> np.ndarray:
    """Resolve a gate name ("Z(theta)" needs ``theta``) or pass a matrix through."""
    if isinstance(gate, np.ndarray):
        return np.asarray(gate, dtype=complex)
    if gate in ("RZ", "Z(theta)"):
        if theta is None:
            raise QuantumError("Z(theta) needs an angle")
        return z_rotation(theta)
    try:
        return _NAMED_GATES[gate]
    except KeyError:
        raise QuantumError(f"unknown gate {gate!r}") from None


# --- states ----------------------------------------------------------------

def ket(bits: str) -> np.ndarray:
    """Computational basis vector, e.g. ``ket("01")``."""
    vec = np.zeros(2 ** len(bits), dtype=complex)
    vec[int(bits, 2)] = 1.0
    return vec


def plus_state(theta: Angle | int = 0) -> np.ndarray:
    """|+_theta> = (|0> + e^{i theta}|1>)/sqrt(2)."""
    theta = Angle(_as_k(theta))
    return np.array([1.0, np.exp(1j * theta.radians)], dtype=complex) / math.sqrt(2)


def minus_state(theta: Angle | int = 0) -> np.ndarray:
    return plus_state(Angle(_as_k(theta)).antipode())


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def num_qubits(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise QuantumError(f"dimension {dim} is not a power of two")
    return n


def as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return projector(state)
    if state.ndim == 2 and state.shape[0] == state.shape[1]:
        return state
    raise QuantumError(f"not a state vector or square matrix: shape {state.shape}")


def is_density_matrix(rho: np.ndarray, tol: float = VALID_TOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.allclose(rho, rho.conj().T, atol=tol, rtol=0):
        return False
    if abs(np.trace(rho) - 1) > tol:
        return False
    return bool(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -tol)


def is_positive(op: np.ndarray, tol: float = VALID_TOL) -> bool:
    op = np.asarray(op)
    if not np.allclose(op, op.conj().T, atol=tol, rtol=0):
        return False
    return bool(np.linalg.eigvalsh((op + op.conj().T) / 2).min() >= -tol)


def check_density_matrix(rho: np.ndarray, tol: float = VALID_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if not is_density_matrix(rho, tol):
        raise QuantumError("not a valid density matrix")
    return rho


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_pure_state(n: int, rng: np.random.Generator) -> np.ndarray:
    vec = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return vec / np.linalg.norm(vec)


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    dim = 2**n
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


# --- operations on raw arrays ------------------------------------------------

def apply_unitary(rho: np.ndarray, unitary: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Conjugate ``rho`` by ``unitary`` acting on qubits ``targets``."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho.shape[0])
    u = np.asarray(unitary, dtype=complex)
    k = len(targets)
    if u.shape != (2**k, 2**k):
        raise QuantumError(f"gate of shape {u.shape} does not act on {k} qubit(s)")
    _check_targets(targets, n)
    t = rho.reshape((2,) * (2 * n))
    t = _contract(t, u, targets)
    t = _contract(t, u.conj(), [n + q for q in targets])
    return t.reshape(2**n, 2**n)


def _contract(tensor: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _check_targets(targets: Sequence[int], n: int) -> None:
    if len(set(targets)) != len(targets):
        raise QuantumError(f"repeated target in {list(targets)}")
    for q in targets:
        if not 0 <= q < n:
            raise QuantumError(f"qubit index {q} out of range for {n} qubit(s)")


def z_rotate_density(theta: Angle | int, rho: np.ndarray) -> np.ndarray:
    """Rotate the first qubit of ``rho`` by Z(theta).

    The |0><1| blocks pick up e^{-i theta}, the |1><0| blocks e^{+i theta}
    and the diagonal blocks are untouched, whatever the trailing subsystem.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    if rho.ndim != 2 or dim != rho.shape[1] or dim % 2:
        raise QuantumError(f"cannot split a qubit off a {rho.shape} matrix")
    phase = np.exp(1j * Angle(_as_k(theta)).radians)
    half = dim // 2
    out = rho.copy()
    out[:half, half:] *= phase.conjugate()
    out[half:, :half] *= phase
    return out


def partial_trace(rho: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduced state on the qubits ``keep``, in the order given."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho.shape[0])
    keep = list(keep)
    _check_targets(keep, n)
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    # move kept row axes, dropped row axes, kept col axes, dropped col axes
    order = keep + drop + [n + q for q in keep] + [n + q for q in drop]
    t = t.transpose(order)
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise QuantumError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    diff = rho - sigma
    return 0.5 * float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (squared convention, 1 for identical states).

    If either argument is a state vector the overlap <psi|rho|psi> is used.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.ndim == 1 or sigma.ndim == 1:
        vec, mat = (rho, as_density(sigma)) if rho.ndim == 1 else (sigma, rho)
        if mat.shape[0] != vec.shape[0]:
            raise QuantumError(f"dimension mismatch: {vec.shape} vs {mat.shape}")
        return float(np.vdot(vec, mat @ vec).real)
    rho = as_density(rho)
    sigma = as_density(sigma)
    if rho.shape != sigma.shape:
        raise QuantumError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    root = linalg.sqrtm(rho)
    value = np.trace(linalg.sqrtm(root @ sigma @ root)).real ** 2
    return float(min(max(value, 0.0), 1.0 + 1e-15))


def psd_sqrt(op: np.ndarray) -> np.ndarray:
    """Square root of a positive operator via its eigendecomposition."""
    w, v = np.linalg.eigh((op + op.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


# --- register with ownership --------------------------------------------------

class QuantumRegister:
    """A global quantum state whose qubits are held by named parties.

    Qubits are identified by integer labels that are never reused.  Every
    operation names the acting party and fails unless that party holds all
    the qubits it touches; "sending" a qubit is :meth:`transfer`, which moves
    ownership and never copies amplitudes.

    The state stays a state vector while everything added is pure and
    switches to a density matrix on the first mixed input.

    Measurements are sampled from ``rng`` unless outcomes were queued with
    :meth:`force`; either way :attr:`weight` accumulates the Born
    probability of the realised record, which lets callers enumerate
    branches exactly.
    """

    def __init__(self, max_qubits: int = DEFAULT_MAX_QUBITS):
        self.max_qubits = max_qubits
        self._labels: list[int] = []
        self._owner: dict[int, str] = {}
        self._psi: np.ndarray | None = np.ones(1, dtype=complex)
        self._rho: np.ndarray | None = None
        self._next = 0
        self._forced: list[int] = []
        self.weight = 1.0

    # introspection
    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(self._labels)

    @property
    def is_pure(self) -> bool:
        return self._rho is None

    def __len__(self) -> int:
        return len(self._labels)

    def owner(self, label: int) -> str:
        try:
            return self._owner[label]
        except KeyError:
            raise QuantumError(f"no qubit labelled {label}") from None

    def held_by(self, party: str) -> tuple[int, ...]:
        return tuple(q for q in self._labels if self._owner[q] == party)

    def _require(self, labels: Sequence[int], party: str) -> list[int]:
        if len(set(labels)) != len(labels):
            raise QuantumError(f"repeated qubit in {list(labels)}")
        for q in labels:
            if self.owner(q) != party:
                raise OwnershipError(f"qubit {q} is held by {self._owner[q]!r}, not {party!r}")
        return [self._labels.index(q) for q in labels]

    # allocation and ownership
    def add(self, state: np.ndarray, party: str) -> tuple[int, ...]:
        """Append qubits in ``state`` (vector or density matrix) held by ``party``."""
        state = np.asarray(state, dtype=complex)
        k = num_qubits(state.shape[0])
        if len(self._labels) + k > self.max_qubits:
            raise QuantumError(f"register cap of {self.max_qubits} qubits exceeded")
        if state.ndim == 1 and self._rho is None:
            if abs(np.linalg.norm(state) - 1) > VALID_TOL:
                raise QuantumError("state vector is not normalised")
            self._psi = np.kron(self._psi, state)
        else:
            rho = check_density_matrix(as_density(state))
            self._to_density()
            self._rho = np.kron(self._rho, rho)
        new = tuple(range(self._next, self._next + k))
        self._next += k
        self._labels.extend(new)
        self._owner.update({q: party for q in new})
        return new

    def transfer(self, labels: Sequence[int], src: str, dst: str) -> None:
        self._require(labels, src)
        for q in labels:
            self._owner[q] = dst

    def _to_density(self) -> None:
        if self._rho is None:
            self._rho = projector(self._psi)
            self._psi = None

    # evolution
    def apply(self, gate: str | np.ndarray, labels: Sequence[int], party: str,
              theta: Angle | int | None = None) -> None:
        u = gate_matrix(gate, theta)
        if u.shape != (2 ** len(labels), 2 ** len(labels)):
            raise QuantumError(f"gate arity does not match {len(labels)} target(s)")
        idx = self._require(labels, party)
        n = len(self._labels)
        if self._rho is None:
            t = _contract(self._psi.reshape((2,) * n), u, idx)
            self._psi = t.reshape(-1)
        else:
            self._rho = apply_unitary(self._rho, u, idx)

    # measurement
    def force(self, outcomes: Iterable[int]) -> None:
        """Queue outcomes for the next measurements instead of sampling."""
        self._forced.extend(int(o) for o in outcomes)

    def _choose(self, probs: Sequence[float], rng: np.random.Generator | None) -> int:
        if self._forced:
            return self._forced.pop(0)
        if rng is None:
            raise QuantumError("measurement needs an rng or a forced outcome")
        p = np.clip(np.asarray(probs, dtype=float), 0, None)
        return int(rng.choice(len(p), p=p / p.sum()))

    def measure(self, label: int, delta: Angle | int, party: str,
                rng: np.random.Generator | None = None) -> tuple[int, float]:
        """Measure in {|+_delta>, |-_delta>}; outcome 0 is |+_delta>.

        The qubit is removed.  Returns ``(signal, probability)``.
        """
        return self.measure_basis(label, (plus_state(delta), minus_state(delta)), party, rng)

    def measure_basis(self, label: int, basis: Sequence[np.ndarray], party: str,
                      rng: np.random.Generator | None = None) -> tuple[int, float]:
        """Projective measurement of one qubit onto an orthonormal basis; removes it."""
        (i,) = self._require([label], party)
        n = len(self._labels)
        branches, probs = [], []
        for vec in basis:
            bra = np.asarray(vec, dtype=complex).conj()
            if self._rho is None:
                t = np.tensordot(bra, self._psi.reshape((2,) * n), axes=([0], [i]))
                branches.append(t.reshape(-1))
                probs.append(float(np.vdot(branches[-1], branches[-1]).real))
            else:
                t = self._rho.reshape((2,) * (2 * n))
                t = np.tensordot(bra, t, axes=([0], [i]))
                t = np.tensordot(t, bra.conj(), axes=([n - 1 + i], [0]))
                d = 2 ** (n - 1)
                branches.append(t.reshape(d, d))
                probs.append(float(np.trace(branches[-1]).real))
        outcome = self._choose(probs, rng)
        p = probs[outcome]
        if p <= 0:
            raise QuantumError(f"outcome {outcome} has probability zero")
        if self._rho is None:
            self._psi = branches[outcome] / math.sqrt(p)
        else:
            self._rho = branches[outcome] / p
        del self._owner[label]
        self._labels.pop(i)
        self.weight *= p
        return outcome, p

    def measure_povm(self, labels: Sequence[int], effects: Sequence[np.ndarray], party: str,
                     rng: np.random.Generator | None = None) -> tuple[int, float]:
        """Generalised measurement with Lüders update; qubits stay in the register."""
        idx = self._require(labels, party)
        self._to_density()
        posts, probs = [], []
        for effect in effects:
            root = psd_sqrt(np.asarray(effect, dtype=complex))
            post = apply_unitary(self._rho, root, idx)  # root need not be unitary
            posts.append(post)
            probs.append(float(np.trace(post).real))
        outcome = self._choose(probs, rng)
        p = probs[outcome]
        if p <= 0:
            raise QuantumError(f"outcome {outcome} has probability zero")
        self._rho = posts[outcome] / p
        self.weight *= p
        return outcome, p

    def discard(self, labels: Sequence[int], party: str) -> None:
        """Trace out qubits."""
        self._require(labels, party)
        keep = [i for i, q in enumerate(self._labels) if q not in labels]
        self._to_density()
        self._rho = partial_trace(self._rho, keep)
        self._labels = [self._labels[i] for i in keep]
        for q in labels:
            del self._owner[q]

    # readout (simulator-side, not a physical operation)
    def density(self, labels: Sequence[int] | None = None) -> np.ndarray:
        labels = self._labels if labels is None else list(labels)
        idx = [self._labels.index(self._check_label(q)) for q in labels]
        rho = projector(self._psi) if self._rho is None else self._rho
        if idx == list(range(len(self._labels))):
            return rho.copy()
        return partial_trace(rho, idx)

    def _check_label(self, label: int) -> int:
        self.owner(label)
        return label
