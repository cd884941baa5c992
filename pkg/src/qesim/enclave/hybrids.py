"""Real-vs-simulated transcript comparison for the outsourcing protocol.

The simulator runs the key exchange for real, then swaps the session key
for an independent random key and encrypts a fixed canonical call
``(f0, x0)`` and its result instead of the client's.  Transcripts are
reduced to a few observable features (record lengths and the top bit of
the first ciphertext byte of each compute record) and compared by
total-variation distance.  A deterministic permutation test supplies the
threshold below which the statistic counts as zero advantage.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any

import numpy as np

from qesim.enclave.crypto import CryptoSuite, crypto_suite
from qesim.enclave.programs import OUTSRC_FUNCTIONS, encode_call, encode_result
from qesim.enclave.protocol import CLIENT, SERVER, client_run
from qesim.enclave.wire import Kind, frame, unframe
from qesim.transcript import Channel, Transcript

Features = tuple


def transcript_features(transcript: Transcript, nonce_size: int) -> Features:
    lengths = tuple(len(rec.payload) for rec in transcript)
    bits = []
    for rec in transcript:
        if rec.kind in (Kind.COMPUTE_REQUEST.label, Kind.COMPUTE_RESPONSE.label):
            _, ct = unframe(rec.payload)
            bits.append(ct[nonce_size] >> 7 if len(ct) > nonce_size else -1)
    return (lengths,) + tuple(bits)


def simulated_transcript(f0: str, x0: Any, *, seed: int, suite: CryptoSuite) -> Transcript:
    session = client_run("outsrc", "identity", 0, seed=seed, suite=suite)
    sim_rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    key = sim_rng.bytes(32)
    transcript = Transcript()
    channel = Channel(CLIENT, SERVER, transcript)
    for rec in list(session.transcript)[:2]:
        channel.send(rec.party, rec.kind, rec.payload)
        channel.recv(SERVER if rec.party == CLIENT else CLIENT)
    ct = suite.ae.encrypt(key, encode_call(f0, x0), sim_rng)
    ct_out = suite.ae.encrypt(key, encode_result(OUTSRC_FUNCTIONS[f0](x0)), sim_rng)
    channel.send(CLIENT, Kind.COMPUTE_REQUEST.label, frame(Kind.COMPUTE_REQUEST, ct))
    channel.send(SERVER, Kind.COMPUTE_RESPONSE.label, frame(Kind.COMPUTE_RESPONSE, ct_out))
    return transcript


def tv_statistic(a: list[Features], b: list[Features]) -> float:
    """Max over feature coordinates of the empirical TV distance."""
    if not a or not b:
        return 0.0
    worst = 0.0
    for i in range(len(a[0])):
        ca, cb = Counter(s[i] for s in a), Counter(s[i] for s in b)
        tv = 0.5 * sum(abs(ca[k] / len(a) - cb[k] / len(b)) for k in ca.keys() | cb.keys())
        worst = max(worst, tv)
    return worst


def permutation_threshold(a: list[Features], b: list[Features], *, rounds: int = 200,
                          quantile: float = 0.99, seed: int = 0) -> float:
    pooled = a + b
    rng = np.random.default_rng(seed)
    stats = []
    for _ in range(rounds):
        order = rng.permutation(len(pooled))
        shuffled = [pooled[i] for i in order]
        stats.append(tv_statistic(shuffled[: len(a)], shuffled[len(a):]))
    return float(np.quantile(stats, quantile))


@dataclass
class HybridReport:
    statistic: float
    threshold: float
    trials: int

    @property
    def consistent(self) -> bool:
        """True when the statistic is within permutation noise (no detected advantage)."""
        return self.statistic <= self.threshold


def simulated_vs_real_transcript(f: str, x: Any, *, trials: int = 1000, seed: int = 0,
                                 suite: CryptoSuite | str = "toy", f0: str = "identity", x0: Any = 0,
                                 simulate: bool = True) -> HybridReport:
    """Compare ``trials`` real transcripts of ``(f, x)`` against simulated ones.

    With ``simulate=False`` the second side is another batch of real
    transcripts of ``(f, x)`` from the same seeds, so both sides coincide.
    """
    if isinstance(suite, str):
        suite = crypto_suite(suite)
    nonce = suite.ae.nonce_size
    real, other = [], []
    for t in range(trials):
        real.append(transcript_features(client_run("outsrc", f, x, seed=seed + t, suite=suite).transcript, nonce))
        if simulate:
            tr = simulated_transcript(f0, x0, seed=seed + trials + t, suite=suite)
        else:
            tr = client_run("outsrc", f, x, seed=seed + t, suite=suite).transcript
        other.append(transcript_features(tr, nonce))
    stat = tv_statistic(real, other)
    return HybridReport(stat, permutation_threshold(real, other, seed=seed), trials)
