import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qesim import ac
from qesim.enclave.attestation import Abort, AttestedExecution, verify_attestation
from qesim.enclave.crypto import (
    MODP_2048,
    TOY_GROUP,
    DecryptionError,
    Ed25519Signature,
    SchnorrSignature,
    StandardAE,
    ToyAE,
    crypto_suite,
    safe_prime_group,
)
from qesim.enclave.hybrids import simulated_vs_real_transcript
from qesim.enclave.programs import (
    OUTSRC_FUNCTIONS,
    OutsourceProgram,
    QuantumApparatus,
    RotationProgram,
    encode_call,
)
from qesim.enclave.protocol import SCENARIOS, adversarial_scenario, client_run, flip_bit
from qesim.enclave.wire import Kind, WireError, encode_value, frame, pack_fields, unframe, unpack_fields
from qesim.quantum import Angle, plus_state, projector, random_density_matrix, z_rotate_density

TOL = 1e-12
seeds = st.integers(0, 2**32 - 1)


# --- primitives ------------------------------------------------------------------------

@given(st.integers(1, TOY_GROUP.order - 1), st.integers(1, TOY_GROUP.order - 1))
def test_diffie_hellman_commutes(a, b):
    g = TOY_GROUP
    assert g.exp(g.gen_exp(a), b) == g.exp(g.gen_exp(b), a)


def test_groups_are_safe_prime_subgroups():
    for g in (TOY_GROUP, MODP_2048):
        assert g.modulus == 2 * g.order + 1
        assert g.is_element(g.generator)
    assert safe_prime_group(23).order == 11
    with pytest.raises(ValueError):
        safe_prime_group(29)  # 14 is not prime


@pytest.mark.parametrize("ae", [ToyAE(), ToyAE(None), StandardAE(), StandardAE(None)])
@settings(max_examples=20, deadline=None)
@given(data=st.binary(max_size=200), seed=seeds)
def test_ae_round_trip_and_tamper_detection(ae, data, seed):
    rng = np.random.default_rng(seed)
    key = rng.bytes(32)
    ct = ae.encrypt(key, data, rng)
    assert ae.decrypt(key, ct) == data
    i = int(rng.integers(len(ct)))
    with pytest.raises(DecryptionError):
        ae.decrypt(key, flip_bit(ct, i, int(rng.integers(8))))
    with pytest.raises(DecryptionError):
        ae.decrypt(rng.bytes(32), ct)


def test_padding_hides_short_lengths_only_when_enabled():
    rng = np.random.default_rng(0)
    key = rng.bytes(32)
    assert len(ToyAE().encrypt(key, b"a", rng)) == len(ToyAE().encrypt(key, b"a" * 50, rng))
    assert len(ToyAE(None).encrypt(key, b"a", rng)) != len(ToyAE(None).encrypt(key, b"a" * 50, rng))


@pytest.mark.parametrize("scheme", [SchnorrSignature(), Ed25519Signature()])
def test_signatures_verify_and_reject_forgeries(scheme):
    rng = np.random.default_rng(1)
    pk, sk = scheme.keygen(rng)
    sig = scheme.sign(sk, b"message")
    assert scheme.verify(pk, b"message", sig)
    assert not scheme.verify(pk, b"messagf", sig)
    for i in range(len(sig)):
        assert not scheme.verify(pk, b"message", flip_bit(sig, i, i % 8))
    other_pk, _ = scheme.keygen(rng)
    assert not scheme.verify(other_pk, b"message", sig)


def test_crypto_suite_selector():
    assert crypto_suite("toy").group is TOY_GROUP
    assert crypto_suite("standard").group is MODP_2048
    assert crypto_suite("toy", modulus=23).group.modulus == 23
    with pytest.raises(ValueError):
        crypto_suite("quantum")


# --- wire format -------------------------------------------------------------------------------

def test_frame_round_trip_and_validation():
    rec = frame(Kind.COMPUTE_REQUEST, b"abc")
    assert rec[0] == 0x03 and unframe(rec) == (Kind.COMPUTE_REQUEST, b"abc")
    with pytest.raises(WireError):
        unframe(rec + b"x")
    with pytest.raises(WireError):
        unframe(b"\x09" + rec[1:])
    assert unpack_fields(pack_fields(b"", b"xy"), 2) == [b"", b"xy"]
    with pytest.raises(WireError):
        unpack_fields(pack_fields(b"a"), 2)


def test_encode_value_is_injective_on_examples():
    values = [1, b"\x01", "1", (1,), (1, 2), ((1, 2),), (b"", ""), 256]
    assert len({encode_value(v) for v in values}) == len(values)


# --- attested execution ---------------------------------------------------------------------

class Counter:
    name = "counter"

    def __call__(self, inp, mem):
        mem = (mem or 0) + inp
        return mem, mem


def registry(seed=0, **kw):
    return AttestedExecution(SchnorrSignature(), np.random.default_rng(seed), **kw)


def test_getpk_is_stable_and_fresh_per_registry():
    reg = registry()
    assert reg.getpk() == reg.getpk()
    keys = {registry(seed).getpk() for seed in range(100)}
    assert len(keys) == 100


def test_install_and_resume_sign_outputs():
    reg = registry()
    e1, e2 = reg.install("server", "sid-0", Counter()), reg.install("server", "sid-0", Counter())
    assert e1 != e2 and len(e1) == 16
    assert reg.inspect("server", e1) is None
    out, sig = reg.resume("server", e1, 5)
    assert out == 5
    assert verify_attestation(reg.scheme, reg.getpk(), "sid-0", e1, "counter", 5, sig)
    assert not verify_attestation(reg.scheme, reg.getpk(), "sid-0", e2, "counter", 5, sig)
    assert reg.resume("server", e1, 2)[0] == 7  # memory persists
    assert reg.inspect("server", e2) is None  # other entry untouched


def test_install_rejections():
    reg = registry(parties=("server", "mallory"), corrupt=("mallory",))
    with pytest.raises(Abort) as exc:
        reg.install("eve", "sid-0", Counter())
    assert exc.value.label == "unregistered"
    with pytest.raises(Abort) as exc:
        reg.install("server", "sid-1", Counter())
    assert exc.value.label == "sid-mismatch"
    reg.install("mallory", "sid-1", Counter())  # corrupt parties choose any index
    with pytest.raises(Abort) as exc:
        reg.resume("server", b"\x00" * 16, 1)
    assert exc.value.label == "not-found"


def test_registry_serialises_concurrent_resumes():
    reg = registry()
    eid = reg.install("server", "sid-0", Counter())
    threads = [threading.Thread(target=lambda: [reg.resume("server", eid, 1) for _ in range(50)])
               for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert reg.inspect("server", eid) == 400


# --- programs --------------------------------------------------------------------------------

def test_program_requires_key_exchange_first():
    suite = crypto_suite("toy")
    prog = OutsourceProgram(suite, np.random.default_rng(0))
    with pytest.raises(Abort) as exc:
        prog(("compute", b"x" * 20), None)
    assert exc.value.label == "protocol-order"
    with pytest.raises(Abort) as exc:
        prog(("keyex", 1), None)
    assert exc.value.label == "bad-input"


def test_program_rejects_unknown_function_and_replays():
    suite = crypto_suite("toy")
    rng = np.random.default_rng(0)
    prog = OutsourceProgram(suite, rng)
    (g_a, g_b), mem = prog(("keyex", suite.group.gen_exp(5)), None)
    ct = suite.ae.encrypt(mem["sk"], encode_call("nope", 1), rng)
    with pytest.raises(Abort) as exc:
        prog(("compute", ct), mem)
    assert exc.value.label == "unknown-function"
    ct = suite.ae.encrypt(mem["sk"], encode_call("sum", [1]), rng)
    _, mem2 = prog(("compute", ct), mem)
    assert mem["seen"] <= mem2["seen"] and ct in mem2["seen"]
    with pytest.raises(Abort) as exc:
        prog(("compute", ct), mem2)
    assert exc.value.label == "replay-abort"


def test_apparatus_needs_matching_qubit_count():
    suite = crypto_suite("toy")
    rng = np.random.default_rng(0)
    apparatus = QuantumApparatus()
    prog = RotationProgram(suite, rng, apparatus)
    _, mem = prog(("keyex", suite.group.gen_exp(3)), None)
    ct = suite.ae.encrypt(mem["sk"], encode_call("angles", [1, 2]), rng)
    with pytest.raises(Abort) as exc:
        prog(("compute", ct), mem)
    assert exc.value.label == "source-unavailable"


# --- protocol runs -------------------------------------------------------------------------------

OUTSRC_FIXTURES = [
    ("identity", [4, 5]), ("identity", "hello"), ("sum", [1, 2, 3]), ("sum", []), ("product", [2, 3, 7]),
    ("max", [3, 9, 1]), ("min", [3, 9, 1]), ("len", [0] * 11), ("sorted", [3, 1, 2]), ("reverse", [1, 2, 3]),
    ("xor", [5, 3]), ("square", 12), ("parity", [1, 1, 1]), ("count-ones", 255), ("sum", list(range(100))),
    ("product", []), ("identity", {"k": [1]}), ("max", [-4, -2]), ("square", -3), ("count-ones", 0),
]


@pytest.mark.parametrize("i", range(len(OUTSRC_FIXTURES)))
def test_honest_outsourcing(i):
    f, x = OUTSRC_FIXTURES[i]
    session = client_run("outsrc", f, x, seed=i)
    assert session.y == OUTSRC_FUNCTIONS[f](x)
    assert session.client.session_key == session.enclave_key


def test_honest_outsourcing_standard_suite():
    session = client_run("outsrc", "sum", [1, 2, 3], seed=0, suite="standard")
    assert session.y == 6 and session.client.session_key == session.enclave_key


def test_key_agreement_over_100_runs():
    for seed in range(100):
        s = client_run("outsrc", "identity", 0, seed=seed)
        assert s.client.session_key == s.enclave_key


@pytest.mark.parametrize("seed", range(5))
def test_rotation_session_delivers_rotated_plus_states(seed):
    session = client_run("rsr", n_qubits=3, seed=seed)
    expected = np.ones((1, 1))
    for k in session.y:
        expected = np.kron(expected, z_rotate_density(Angle(k), projector(plus_state(0))))
    assert np.abs(session.register.density(session.source.qubits) - expected).max() <= TOL
    assert all(session.register.owner(q) == "server" for q in session.source.qubits)


def test_zero_angles_leave_plus_states():
    session = client_run("rsr", "zeros", 2, n_qubits=2, seed=1)
    assert session.y == [0, 0]
    assert np.allclose(session.register.density(session.source.qubits),
                       np.kron(projector(plus_state(0)), projector(plus_state(0))), atol=TOL)


def test_adversarial_source_is_rotated_anyway():
    """Host feeds one qubit entangled with an auxiliary it keeps; the enclave still rotates it."""
    inp = ac.random_server_input(np.random.default_rng(3), "entangled", 1)
    session = client_run("rsr", "angles", [5], n_qubits=1, seed=2, source_state=inp.state)
    labels = session.source.qubits + session.source.aux
    assert np.abs(session.register.density(labels) - z_rotate_density(5, inp.state)).max() <= TOL


def test_transcript_has_each_message_once_in_causal_order():
    t = client_run("outsrc", "sum", [1], seed=0).transcript
    assert [r.kind for r in t] == [k.label for k in Kind]
    assert [r.party for r in t] == ["client", "server", "client", "server"]
    assert [r.index for r in t] == [0, 1, 2, 3]


def test_sessions_replay_byte_for_byte():
    a = client_run("rsr", n_qubits=2, seed=42).transcript.dumps()
    b = client_run("rsr", n_qubits=2, seed=42).transcript.dumps()
    c = client_run("rsr", n_qubits=2, seed=43).transcript.dumps()
    assert a == b and a != c


def test_concurrent_sessions_on_separate_threads():
    results = {}

    def run(i):
        results[i] = client_run("outsrc", "sum", [i, i], seed=i).y

    threads = [threading.Thread(target=run, args=(i,)) for i in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == {i: 2 * i for i in range(6)}


# --- attacks --------------------------------------------------------------------------------------

EXPECTED = {"honest": "success", "forge-attestation": "sig-failure", "tamper-ct": "decryption-abort",
            "replay-ct": "replay-abort", "substitute-ctout": "authenc-failure"}


@pytest.mark.parametrize("scenario", SCENARIOS)
@pytest.mark.parametrize("suite", ["toy", "standard"])
def test_scenarios_end_in_their_named_outcome(scenario, suite):
    for seed in range(5):
        outcome = adversarial_scenario(scenario, seed=seed, suite=suite)
        assert outcome.label == EXPECTED[scenario]
        assert not outcome.forged_accepted
    assert (outcome.y == 6) == (scenario in ("honest", "replay-ct"))


def test_any_bit_flip_in_attested_fields_fails_verification():
    session = client_run("outsrc", "sum", [1], seed=0)
    suite = crypto_suite("toy")
    rec = session.transcript[1].payload
    _, payload = unframe(rec)
    eid, g_b, sig = unpack_fields(payload, 3)
    outp = (session.client._g_a, int.from_bytes(g_b, "big"))
    mpk = session.registry.getpk()
    assert verify_attestation(suite.signature, mpk, "sid-0", eid, "prog_outsrc", outp, sig)
    for i in range(len(eid)):
        assert not verify_attestation(suite.signature, mpk, "sid-0", flip_bit(eid, i, i % 8),
                                      "prog_outsrc", outp, sig)
    for bit in range(62):
        bad = (outp[0], outp[1] ^ (1 << bit))
        assert not verify_attestation(suite.signature, mpk, "sid-0", eid, "prog_outsrc", bad, sig)
    assert not verify_attestation(suite.signature, mpk, "sid-0", eid, "prog_rsr", outp, sig)


def test_aborted_scenarios_keep_their_transcript():
    outcome = adversarial_scenario("tamper-ct", seed=0)
    assert [r.kind for r in outcome.transcript] == ["keyex-request", "keyex-response", "compute-request"]


def test_unknown_scenario():
    with pytest.raises(ValueError):
        adversarial_scenario("teleport")


# --- simulated transcripts ----------------------------------------------------------------------

def test_simulated_transcripts_show_no_advantage():
    report = simulated_vs_real_transcript("sum", [1, 2, 3], trials=1000, seed=0)
    assert report.consistent


def test_leaky_encryption_is_detected():
    report = simulated_vs_real_transcript("sum", [1, 2, 3], trials=100, seed=0,
                                          suite=crypto_suite("toy", pad_block=None))
    assert report.statistic > 0 and not report.consistent


def test_identical_sides_give_zero_statistic():
    report = simulated_vs_real_transcript("sum", [1, 2, 3], trials=100, seed=3, simulate=False)
    assert report.statistic == 0


def test_random_density_is_accepted_as_source():
    rho = random_density_matrix(2, np.random.default_rng(9))
    session = client_run("rsr", "angles", [1, 2], n_qubits=2, seed=0, source_state=rho)
    assert np.isclose(np.trace(session.register.density()).real, 1)
