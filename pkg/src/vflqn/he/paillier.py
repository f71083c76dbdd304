"""Paillier cryptosystem with the g = N + 1 simplification.

With g = N + 1, encryption is ``(1 + m N) r^N mod N^2`` and the private key is
``lambda = phi(N)``, ``mu = phi(N)^-1 mod N``.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from ..errors import EncodingError, KeyGenerationError, ProtocolError
from . import bigint
from .base import Ciphertext, HEBackend
from .encoding import DEFAULT_EXPONENT, BASE, EncodedNumber, decode, encode, max_int_for

DEFAULT_KEY_BITS = 2048
MIN_KEY_BITS = 256


@dataclass(frozen=True)
class PublicKey:
    n: int
    g: int

    @cached_property
    def nsquare(self) -> int:
        return self.n * self.n

    @cached_property
    def max_int(self) -> int:
        return max_int_for(self.n)

    def to_json(self) -> dict:
        return {"n": str(self.n), "g": str(self.g)}

    @classmethod
    def from_json(cls, d: dict) -> "PublicKey":
        return cls(int(d["n"]), int(d["g"]))


@dataclass(frozen=True)
class PrivateKey:
    public_key: PublicKey
    lam: int
    mu: int

    def to_json(self) -> dict:
        return {"lambda": str(self.lam), "mu": str(self.mu)}

    @classmethod
    def from_json(cls, d: dict, public_key: PublicKey) -> "PrivateKey":
        return cls(public_key, int(d["lambda"]), int(d["mu"]))


@dataclass(frozen=True)
class KeyPair:
    public: PublicKey
    private: PrivateKey


def keygen(bits: int = DEFAULT_KEY_BITS, max_attempts: int = 64) -> KeyPair:
    if bits < MIN_KEY_BITS or bits % 2:
        raise ValueError(f"key size must be even and >= {MIN_KEY_BITS}, got {bits}")
    half = bits // 2
    for _ in range(max_attempts):
        try:
            p = bigint.random_prime(half)
            q = bigint.random_prime(half)
        except RuntimeError as exc:
            raise KeyGenerationError(str(exc)) from exc
        if p == q:
            continue
        n = p * q
        if n.bit_length() != bits:
            continue
        phi = (p - 1) * (q - 1)
        pk = PublicKey(n, n + 1)
        return KeyPair(pk, PrivateKey(pk, phi, bigint.invert(phi, n)))
    raise KeyGenerationError(f"could not generate a {bits}-bit modulus in {max_attempts} attempts")


def raw_encrypt(pk: PublicKey, plaintext: int, r: Optional[int] = None) -> int:
    nsq = pk.nsquare
    nude = (1 + plaintext * pk.n) % nsq
    if r is None:
        r = bigint.random_below(pk.n)
    return nude * bigint.powmod(r, pk.n, nsq) % nsq


def raw_decrypt(sk: PrivateKey, c: int) -> int:
    n = sk.public_key.n
    u = bigint.powmod(c, sk.lam, sk.public_key.nsquare)
    return (u - 1) // n * sk.mu % n


class PaillierBackend(HEBackend):
    name = "paillier"

    def __init__(self, public_key: PublicKey, private_key: Optional[PrivateKey] = None):
        self.public_key = public_key
        self._private_key = private_key

    @classmethod
    def generate(cls, bits: int = DEFAULT_KEY_BITS) -> "PaillierBackend":
        kp = keygen(bits)
        return cls(kp.public, kp.private)

    @property
    def has_private_key(self) -> bool:
        return self._private_key is not None

    def public_only(self) -> "PaillierBackend":
        return PaillierBackend(self.public_key)

    def encrypt(self, x: float, exponent: int = DEFAULT_EXPONENT) -> Ciphertext:
        enc = encode(self.public_key.n, x, exponent)
        return Ciphertext(raw_encrypt(self.public_key, enc.mantissa), enc.exponent, self.public_key)

    def decrypt(self, a: Ciphertext) -> float:
        if self._private_key is None:
            raise ProtocolError("this party does not hold the private key")
        self._check_key(a)
        m = raw_decrypt(self._private_key, a.raw)
        return decode(self.public_key.n, EncodedNumber(m, a.exponent))

    def from_wire(self, record: dict) -> Ciphertext:
        return Ciphertext(int(record["raw"]), int(record["exp"]), self.public_key)

    def _raise_power(self, raw: int, mantissa: int) -> int:
        """``raw ** mantissa`` in Z_{N^2}, with negative mantissas via the inverse."""
        pk = self.public_key
        if mantissa >= pk.n - pk.max_int:
            return bigint.powmod(bigint.invert(raw, pk.nsquare), pk.n - mantissa, pk.nsquare)
        return bigint.powmod(raw, mantissa, pk.nsquare)

    def decrease_exponent(self, a: Ciphertext, new_exponent: int) -> Ciphertext:
        if new_exponent > a.exponent:
            raise EncodingError("exponent can only be decreased")
        if new_exponent == a.exponent:
            return a
        factor = BASE ** (a.exponent - new_exponent)
        if factor > self.public_key.max_int:
            raise EncodingError("exponent alignment factor exceeds the encoding bound")
        return Ciphertext(bigint.powmod(a.raw, factor, self.public_key.nsquare), new_exponent, a.key)

    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check_key(a, b)
        if a.exponent > b.exponent:
            a = self.decrease_exponent(a, b.exponent)
        elif b.exponent > a.exponent:
            b = self.decrease_exponent(b, a.exponent)
        return Ciphertext(a.raw * b.raw % self.public_key.nsquare, a.exponent, self.public_key)

    def scalar_mul(self, k: float, a: Ciphertext) -> Ciphertext:
        self._check_key(a)
        enc = encode(self.public_key.n, k, DEFAULT_EXPONENT)
        return Ciphertext(self._raise_power(a.raw, enc.mantissa), a.exponent + enc.exponent, self.public_key)

    def sum(self, cts):
        if not cts:
            raise ProtocolError("cannot sum an empty ciphertext vector")
        self._check_key(*cts)
        target = min(c.exponent for c in cts)
        nsq = self.public_key.nsquare
        acc = 1
        for c in cts:
            acc = acc * self.decrease_exponent(c, target).raw % nsq
        return Ciphertext(acc, target, self.public_key)

    def weighted_sums(self, weights, cts):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != len(cts):
            raise ProtocolError(f"weight matrix {weights.shape} does not match {len(cts)} ciphertexts")
        if not cts:
            raise ProtocolError("cannot aggregate an empty ciphertext vector")
        self._check_key(*cts)
        pk = self.public_key
        nsq, n = pk.nsquare, pk.n
        target = min(c.exponent for c in cts)
        raws = [self.decrease_exponent(c, target).raw for c in cts]
        inverses: dict[int, int] = {}
        out = []
        for j in range(weights.shape[1]):
            acc = 1
            for i, w in enumerate(weights[:, j]):
                m = encode(n, float(w), DEFAULT_EXPONENT).mantissa
                if m == 0:
                    continue
                if m >= n - pk.max_int:
                    if i not in inverses:
                        inverses[i] = bigint.invert(raws[i], nsq)
                    term = bigint.powmod(inverses[i], n - m, nsq)
                else:
                    term = bigint.powmod(raws[i], m, nsq)
                acc = acc * term % nsq
            out.append(Ciphertext(acc, target + DEFAULT_EXPONENT, pk))
        return out
