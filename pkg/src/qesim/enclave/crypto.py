"""Group, authenticated encryption and signature instances behind small interfaces.

Each primitive comes in a "toy" flavour (fast, seedable, deliberately weak
parameters) for protocol-logic tests and a "standard" flavour built on the
``cryptography`` package.  All randomness, including nonces, is drawn from
an injected numpy ``Generator`` so that transcripts replay byte for byte.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import sympy
from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF


class DecryptionError(Exception):
    pass


def random_int(rng: np.random.Generator, upper: int) -> int:
    """Uniform integer in [0, upper) from rng bytes (works beyond 64 bits)."""
    nbytes = (upper.bit_length() + 7) // 8 + 8
    return int.from_bytes(rng.bytes(nbytes), "big") % upper


# --- groups -------------------------------------------------------------------

@dataclass(frozen=True)
class Group:
    """Order-q subgroup of Z_p^* for a safe prime p = 2q + 1."""

    modulus: int
    order: int
    generator: int
    name: str = "custom"

    @property
    def element_size(self) -> int:
        return (self.modulus.bit_length() + 7) // 8

    def random_exponent(self, rng: np.random.Generator) -> int:
        return 1 + random_int(rng, self.order - 1)

    def exp(self, base: int, exponent: int) -> int:
        return pow(base, exponent, self.modulus)

    def gen_exp(self, exponent: int) -> int:
        return pow(self.generator, exponent, self.modulus)

    def is_element(self, value: int) -> bool:
        return 1 < value < self.modulus and pow(value, self.order, self.modulus) == 1

    def encode(self, value: int) -> bytes:
        return value.to_bytes(self.element_size, "big")


def safe_prime_group(modulus: int, name: str = "custom") -> Group:
    q = (modulus - 1) // 2
    if modulus < 7 or not sympy.isprime(modulus) or not sympy.isprime(q):
        raise ValueError(f"{modulus} is not a safe prime")
    # 4 is a non-trivial square, hence generates the order-q subgroup
    return Group(modulus, q, 4, name)


TOY_GROUP = Group(4611686018427377339, 2305843009213688669, 4, "toy-62")

_RFC3526_2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
MODP_2048 = Group(_RFC3526_2048, (_RFC3526_2048 - 1) // 2, 2, "modp-2048")


def derive_key(group: Group, shared: int, length: int = 32) -> bytes:
    """HKDF-SHA256 of the encoded shared group element."""
    return HKDF(algorithm=hashes.SHA256(), length=length, salt=None,
                info=b"qesim enclave session key").derive(group.encode(shared))


# --- authenticated encryption -------------------------------------------------------

class AEScheme(Protocol):
    name: str

    def encrypt(self, key: bytes, plaintext: bytes, rng: np.random.Generator) -> bytes: ...

    def decrypt(self, key: bytes, ciphertext: bytes) -> bytes: ...


def pad(plaintext: bytes, block: int | None) -> bytes:
    framed = struct.pack(">I", len(plaintext)) + plaintext
    if block is None:
        return framed
    return framed + b"\x00" * (-len(framed) % block)


def unpad(data: bytes) -> bytes:
    if len(data) < 4:
        raise DecryptionError("truncated plaintext")
    (n,) = struct.unpack(">I", data[:4])
    if 4 + n > len(data):
        raise DecryptionError("bad plaintext length")
    return data[4:4 + n]


class ToyAE:
    """SHA-256 counter-mode stream cipher with a truncated HMAC tag.

    Encrypt-then-MAC with an 8-byte nonce and a 4-byte tag: correct and
    tamper-evident at test scale, not meant to resist a real adversary.
    ``pad_block=None`` exposes the exact plaintext length.
    """

    nonce_size = 8
    tag_size = 4

    def __init__(self, pad_block: int | None = 64):
        self.pad_block = pad_block
        self.name = "toy" if pad_block else "toy-leaky"

    @staticmethod
    def _stream(key: bytes, nonce: bytes, n: int) -> bytes:
        out = bytearray()
        counter = 0
        while len(out) < n:
            out += hashlib.sha256(key + nonce + counter.to_bytes(8, "big")).digest()
            counter += 1
        return bytes(out[:n])

    def _tag(self, key: bytes, body: bytes) -> bytes:
        return hmac.new(key, body, hashlib.sha256).digest()[: self.tag_size]

    def encrypt(self, key: bytes, plaintext: bytes, rng: np.random.Generator) -> bytes:
        nonce = rng.bytes(self.nonce_size)
        data = pad(plaintext, self.pad_block)
        body = nonce + bytes(a ^ b for a, b in zip(data, self._stream(key, nonce, len(data))))
        return body + self._tag(key, body)

    def decrypt(self, key: bytes, ciphertext: bytes) -> bytes:
        if len(ciphertext) < self.nonce_size + self.tag_size:
            raise DecryptionError("ciphertext too short")
        body, tag = ciphertext[: -self.tag_size], ciphertext[-self.tag_size:]
        if not hmac.compare_digest(tag, self._tag(key, body)):
            raise DecryptionError("authentication tag mismatch")
        nonce, enc = body[: self.nonce_size], body[self.nonce_size:]
        return unpad(bytes(a ^ b for a, b in zip(enc, self._stream(key, nonce, len(enc)))))


class StandardAE:
    """AES-256-GCM with a 12-byte nonce prefixed to the ciphertext."""

    nonce_size = 12

    def __init__(self, pad_block: int | None = 64):
        self.pad_block = pad_block
        self.name = "aes-gcm" if pad_block else "aes-gcm-leaky"

    def encrypt(self, key: bytes, plaintext: bytes, rng: np.random.Generator) -> bytes:
        nonce = rng.bytes(self.nonce_size)
        return nonce + AESGCM(key).encrypt(nonce, pad(plaintext, self.pad_block), None)

    def decrypt(self, key: bytes, ciphertext: bytes) -> bytes:
        if len(ciphertext) < self.nonce_size + 16:
            raise DecryptionError("ciphertext too short")
        nonce, body = ciphertext[: self.nonce_size], ciphertext[self.nonce_size:]
        try:
            return unpad(AESGCM(key).decrypt(nonce, body, None))
        except InvalidTag:
            raise DecryptionError("authentication tag mismatch") from None


# --- signatures ----------------------------------------------------------------------

class SignatureScheme(Protocol):
    name: str

    def keygen(self, rng: np.random.Generator) -> tuple[bytes, object]: ...

    def sign(self, secret: object, message: bytes) -> bytes: ...

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool: ...


class SchnorrSignature:
    """Schnorr signatures over a prime-order subgroup, deterministic nonces."""

    def __init__(self, group: Group = TOY_GROUP):
        self.group = group
        self.name = f"schnorr-{group.name}"
        self._qsize = (group.order.bit_length() + 7) // 8

    def _hash(self, *parts: bytes) -> int:
        h = hashlib.sha256()
        for part in parts:
            h.update(struct.pack(">I", len(part)) + part)
        return int.from_bytes(h.digest(), "big") % self.group.order

    def keygen(self, rng: np.random.Generator) -> tuple[bytes, int]:
        x = self.group.random_exponent(rng)
        return self.group.encode(self.group.gen_exp(x)), x

    def sign(self, secret: int, message: bytes) -> bytes:
        g = self.group
        k = self._hash(b"nonce", secret.to_bytes(self._qsize, "big"), message) or 1
        r = g.encode(g.gen_exp(k))
        e = self._hash(r, g.encode(g.gen_exp(secret)), message)
        s = (k + e * secret) % g.order
        return e.to_bytes(self._qsize, "big") + s.to_bytes(self._qsize, "big")

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        g = self.group
        if len(signature) != 2 * self._qsize or len(public) != g.element_size:
            return False
        e = int.from_bytes(signature[: self._qsize], "big")
        s = int.from_bytes(signature[self._qsize:], "big")
        y = int.from_bytes(public, "big")
        if not (e < g.order and s < g.order and g.is_element(y)):
            return False
        r = g.gen_exp(s) * pow(y, g.order - e, g.modulus) % g.modulus
        return self._hash(g.encode(r), public, message) == e


class Ed25519Signature:
    name = "ed25519"

    def keygen(self, rng: np.random.Generator) -> tuple[bytes, Ed25519PrivateKey]:
        secret = Ed25519PrivateKey.from_private_bytes(rng.bytes(32))
        public = secret.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        return public, secret

    def sign(self, secret: Ed25519PrivateKey, message: bytes) -> bytes:
        return secret.sign(message)

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


# --- suites ------------------------------------------------------------------------------

@dataclass(frozen=True)
class CryptoSuite:
    group: Group
    ae: AEScheme
    signature: SignatureScheme
    name: str


def crypto_suite(kind: str = "toy", modulus: int | None = None, pad_block: int | None = 64) -> CryptoSuite:
    """``"toy"``: 62-bit group, toy AE, Schnorr.  ``"standard"``: MODP-2048, AES-GCM, Ed25519."""
    if kind == "toy":
        group = TOY_GROUP if modulus is None else safe_prime_group(modulus)
        return CryptoSuite(group, ToyAE(pad_block), SchnorrSignature(group), kind)
    if kind == "standard":
        group = MODP_2048 if modulus is None else safe_prime_group(modulus)
        return CryptoSuite(group, StandardAE(pad_block), Ed25519Signature(), kind)
    raise ValueError(f"unknown crypto instance {kind!r}")
