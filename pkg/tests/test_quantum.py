import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qesim.quantum import (
    CNOT,
    CZ,
    H,
    X,
    Y,
    Z,
    Angle,
    OwnershipError,
    QuantumError,
    QuantumRegister,
    apply_unitary,
    fidelity,
    is_density_matrix,
    ket,
    minus_state,
    partial_trace,
    plus_state,
    projector,
    random_density_matrix,
    random_pure_state,
    random_unitary,
    trace_distance,
    z_rotate_density,
    z_rotation,
)

TOL = 1e-12
angles = st.integers(0, 7).map(Angle)
seeds = st.integers(0, 2**32 - 1)


# --- angles ---------------------------------------------------------------------

def test_angle_arithmetic_is_mod_8():
    assert Angle(9) == Angle(1)
    assert Angle(3) + Angle(7) == Angle(2)
    assert Angle(1) - Angle(2) == Angle(7)
    assert -Angle(3) == Angle(5)
    assert Angle(6).antipode() == Angle(2)
    assert Angle(2).radians == pytest.approx(math.pi / 2)
    assert len(Angle.all()) == 8


@given(angles, angles)
def test_angle_group_laws(a, b):
    assert a + b == b + a
    assert a + (-a) == Angle(0)
    assert a.antipode().antipode() == a


# --- gates ------------------------------------------------------------------------

@pytest.mark.parametrize("u", [X, Y, Z, H, CZ, CNOT] + [z_rotation(k) for k in range(8)])
def test_gates_are_unitary(u):
    assert np.allclose(u @ u.conj().T, np.eye(len(u)), atol=TOL)


def test_z_rotation_examples():
    rho = random_density_matrix(1, np.random.default_rng(0))
    assert np.allclose(z_rotate_density(0, rho), rho, atol=TOL)
    assert np.allclose(z_rotate_density(4, projector(plus_state(0))), projector(minus_state(0)), atol=TOL)
    for k in range(8):
        assert np.allclose(z_rotation(k) @ plus_state(0), oracles.plus(k), atol=TOL)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["X", "Y", "Z", "H", "CZ", "CNOT"]))
def test_gate_application_preserves_trace_and_hermiticity(seed, gate):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(3, rng)
    arity = 2 if gate in ("CZ", "CNOT") else 1
    targets = list(rng.permutation(3)[:arity])
    reg = QuantumRegister()
    labels = reg.add(rho, "p")
    reg.apply(gate, [labels[t] for t in targets], "p")
    out = reg.density()
    assert abs(np.trace(out) - 1) < TOL
    assert np.allclose(out, out.conj().T, atol=TOL)


def test_apply_rejects_arity_mismatch_and_foreign_qubits():
    reg = QuantumRegister()
    a = reg.add(ket("00"), "alice")
    (b,) = reg.add(ket("0"), "bob")
    with pytest.raises(QuantumError):
        reg.apply("CZ", [a[0]], "alice")
    with pytest.raises(OwnershipError):
        reg.apply("X", [b], "alice")
    with pytest.raises(QuantumError):
        reg.apply("X", [99], "alice")


def test_pure_register_stays_pure_until_mixed_input():
    reg = QuantumRegister()
    (q,) = reg.add(plus_state(0), "p")
    reg.apply("H", [q], "p")
    assert reg.is_pure
    reg.add(np.eye(2) / 2, "p")
    assert not reg.is_pure


def test_register_cap():
    reg = QuantumRegister(max_qubits=2)
    reg.add(ket("00"), "p")
    with pytest.raises(QuantumError):
        reg.add(ket("0"), "p")


def test_transfer_moves_ownership_without_copy():
    reg = QuantumRegister()
    (q,) = reg.add(plus_state(1), "client")
    reg.transfer([q], "client", "server")
    assert reg.owner(q) == "server" and len(reg) == 1
    with pytest.raises(OwnershipError):
        reg.transfer([q], "client", "server")


# --- z_rotate_density ------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(seeds, angles)
def test_z_rotate_density_matches_entrywise_formula(seed, theta):
    rng = np.random.default_rng(seed)
    alpha, beta = random_pure_state(1, rng)
    rho = projector(np.array([alpha, beta]))
    assert np.allclose(z_rotate_density(theta, rho), oracles.rotated_qubit(alpha, beta, theta.k), atol=TOL)


@settings(max_examples=50, deadline=None)
@given(seeds, angles, st.integers(0, 2))
def test_z_rotate_density_matches_kronecker_oracle_and_inverts(seed, theta, n_aux):
    rho = random_density_matrix(1 + n_aux, np.random.default_rng(seed))
    out = z_rotate_density(theta, rho)
    assert np.allclose(out, oracles.rotate_first(rho, theta.k), atol=TOL)
    assert np.allclose(z_rotate_density(-theta, out), rho, atol=TOL)


def test_antipodal_rotations_sum_to_diagonal():
    alpha, beta = random_pure_state(1, np.random.default_rng(5))
    rho = projector(np.array([alpha, beta]))
    for k in range(4):
        total = z_rotate_density(k, rho) + z_rotate_density(k + 4, rho)
        assert np.allclose(total, np.diag([2 * abs(alpha) ** 2, 2 * abs(beta) ** 2]), atol=TOL)


def test_antipodal_sums_agree_for_200_random_inputs():
    rng = np.random.default_rng(2024)
    for i in range(200):
        kind = i % 4
        if kind == 0:
            rho = projector(random_pure_state(1, rng))
        elif kind == 1:
            rho = random_density_matrix(1, rng)
        else:
            rho = random_density_matrix(1 + kind - 1, rng)  # 1 or 2 aux qubits
        sums = [z_rotate_density(k, rho) + z_rotate_density(k + 4, rho) for k in range(4)]
        assert all(np.allclose(s, sums[0], atol=TOL) for s in sums)


def test_z_rotate_density_rejects_odd_dimension():
    with pytest.raises(QuantumError):
        z_rotate_density(1, np.eye(3) / 3)


# --- measurement ----------------------------------------------------------------------------

@pytest.mark.parametrize("delta", range(8))
def test_eigenstate_measures_zero(delta):
    reg = QuantumRegister()
    (q,) = reg.add(plus_state(delta), "p")
    s, p = reg.measure(q, delta, "p", np.random.default_rng(0))
    assert s == 0 and abs(p - 1) < TOL and len(reg) == 0


@pytest.mark.parametrize("delta", range(8))
def test_zero_state_is_unbiased_in_equatorial_bases(delta):
    for outcome in (0, 1):
        reg = QuantumRegister()
        (q,) = reg.add(ket("0"), "p")
        reg.force([outcome])
        _, p = reg.measure(q, delta, "p")
        assert abs(p - 0.5) < TOL


def test_plus_measured_at_right_angle():
    reg = QuantumRegister()
    (q,) = reg.add(plus_state(0), "p")
    reg.force([0])
    _, p = reg.measure(q, 2, "p")
    assert abs(p - 0.5) < TOL


@settings(max_examples=30, deadline=None)
@given(seeds, angles)
def test_measurement_averages_back_to_reduced_state(seed, delta):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(2, rng)
    total, avg = 0.0, 0
    for outcome in (0, 1):
        reg = QuantumRegister()
        a, b = reg.add(rho, "p")
        reg.force([outcome])
        _, p = reg.measure(a, delta, "p")
        total += p
        avg = avg + p * reg.density()
    assert abs(total - 1) < TOL
    assert np.allclose(avg, partial_trace(rho, [1]), atol=TOL)


def test_measurement_without_rng_or_forcing_fails():
    reg = QuantumRegister()
    (q,) = reg.add(plus_state(0), "p")
    with pytest.raises(QuantumError):
        reg.measure(q, 0, "p")


def test_sampled_frequencies_follow_born_rule():
    rng = np.random.default_rng(11)
    ones = 0
    for _ in range(4000):
        reg = QuantumRegister()
        (q,) = reg.add(plus_state(0), "p")
        s, _ = reg.measure(q, 2, "p", rng)
        ones += s
    assert abs(ones / 4000 - 0.5) < 0.03


def test_povm_with_identity_halves_leaves_state_unchanged():
    rho = random_density_matrix(1, np.random.default_rng(3))
    reg = QuantumRegister()
    (q,) = reg.add(rho, "p")
    reg.force([1])
    _, p = reg.measure_povm([q], [np.eye(2) / 2, np.eye(2) / 2], "p")
    assert abs(p - 0.5) < TOL and np.allclose(reg.density(), rho, atol=TOL)


# --- partial trace and distances ---------------------------------------------------------------

def test_partial_trace_examples():
    rng = np.random.default_rng(1)
    a, b = random_density_matrix(1, rng), random_density_matrix(2, rng)
    assert np.allclose(partial_trace(np.kron(a, b), [0]), a, atol=TOL)
    assert np.allclose(partial_trace(np.kron(a, b), [1, 2]), b, atol=TOL)
    bell = (ket("00") + ket("11")) / math.sqrt(2)
    assert np.allclose(partial_trace(projector(bell), [0]), np.eye(2) / 2, atol=TOL)
    with pytest.raises(QuantumError):
        partial_trace(np.kron(a, b), [3])


def test_partial_trace_can_reorder():
    rng = np.random.default_rng(2)
    a, b = random_density_matrix(1, rng), random_density_matrix(1, rng)
    assert np.allclose(partial_trace(np.kron(a, b), [1, 0]), np.kron(b, a), atol=TOL)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_partial_trace_commutes_with_kept_operations(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(3, rng)
    u = random_unitary(4, rng)
    lhs = partial_trace(apply_unitary(rho, u, [0, 1]), [0, 1])
    rhs = u @ partial_trace(rho, [0, 1]) @ u.conj().T
    assert np.allclose(lhs, rhs, atol=TOL)


def test_trace_distance_examples():
    zero, one, plus = projector(ket("0")), projector(ket("1")), projector(plus_state(0))
    assert trace_distance(zero, zero) == pytest.approx(0, abs=TOL)
    assert trace_distance(zero, one) == pytest.approx(1, abs=TOL)
    assert trace_distance(zero, plus) == pytest.approx(math.sqrt(2) / 2, abs=TOL)
    assert trace_distance(zero, plus) == pytest.approx(oracles.trace_distance(zero, plus), abs=TOL)
    with pytest.raises(QuantumError):
        trace_distance(zero, np.eye(4) / 4)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_trace_distance_agrees_with_oracle_and_is_bounded(seed):
    rng = np.random.default_rng(seed)
    a, b = random_density_matrix(2, rng), random_density_matrix(2, rng)
    d = trace_distance(a, b)
    assert 0 <= d <= 1 + TOL
    assert d == pytest.approx(oracles.trace_distance(a, b), abs=TOL)


def test_fidelity_pure_and_mixed():
    psi = random_pure_state(2, np.random.default_rng(4))
    assert fidelity(psi, projector(psi)) == pytest.approx(1, abs=TOL)
    assert fidelity(ket("0"), projector(ket("1"))) == pytest.approx(0, abs=TOL)
    assert fidelity(np.eye(2) / 2, projector(ket("0"))) == pytest.approx(0.5, abs=1e-9)


def test_random_states_are_valid():
    rng = np.random.default_rng(6)
    for n in (1, 2, 3):
        assert is_density_matrix(random_density_matrix(n, rng))
        assert abs(np.linalg.norm(random_pure_state(n, rng)) - 1) < TOL
