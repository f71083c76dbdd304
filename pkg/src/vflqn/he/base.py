from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..errors import ProtocolError
from .encoding import DEFAULT_EXPONENT


@dataclass(frozen=True)
class Ciphertext:
    """One encrypted real.

    ``raw`` is an integer in Z_{N^2} for Paillier and a plain float for the
    mock backend. ``key`` identifies the public key and is not part of the
    wire form.
    """

    raw: Any
    exponent: int
    key: Any = field(default=None, compare=False, repr=False)

    def to_wire(self) -> dict:
        raw = repr(self.raw) if isinstance(self.raw, float) else str(self.raw)
        return {"raw": raw, "exp": self.exponent}


class HEBackend:
    """Interface shared by the Paillier and mock backends.

    Vector helpers are written in terms of the scalar operations; backends
    override them where a faster route exists.
    """

    name = "abstract"
    public_key: Any = None

    @property
    def has_private_key(self) -> bool:
        raise NotImplementedError

    def public_only(self) -> "HEBackend":
        raise NotImplementedError

    def encrypt(self, x: float, exponent: int = DEFAULT_EXPONENT) -> Ciphertext:
        raise NotImplementedError

    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        raise NotImplementedError

    def scalar_mul(self, k: float, a: Ciphertext) -> Ciphertext:
        raise NotImplementedError

    def decrypt(self, a: Ciphertext) -> float:
        raise NotImplementedError

    def from_wire(self, record: dict) -> Ciphertext:
        raise NotImplementedError

    def _check_key(self, *cts: Ciphertext) -> None:
        for c in cts:
            if c.key != self.public_key:
                raise ProtocolError("ciphertext was produced under a different public key")

    def encrypt_vector(self, xs, exponent: int = DEFAULT_EXPONENT) -> list[Ciphertext]:
        return [self.encrypt(float(x), exponent) for x in np.asarray(xs, dtype=float).ravel()]

    def decrypt_vector(self, cts: Sequence[Ciphertext]) -> np.ndarray:
        return np.array([self.decrypt(c) for c in cts], dtype=float)

    def add_vectors(self, a: Sequence[Ciphertext], b: Sequence[Ciphertext]) -> list[Ciphertext]:
        if len(a) != len(b):
            raise ProtocolError(f"length mismatch: {len(a)} vs {len(b)}")
        return [self.add(x, y) for x, y in zip(a, b)]

    def scale_vector(self, ks, cts: Sequence[Ciphertext]) -> list[Ciphertext]:
        ks = np.asarray(ks, dtype=float).ravel()
        if len(ks) != len(cts):
            raise ProtocolError(f"length mismatch: {len(ks)} vs {len(cts)}")
        return [self.scalar_mul(float(k), c) for k, c in zip(ks, cts)]

    def sum(self, cts: Sequence[Ciphertext]) -> Ciphertext:
        if not cts:
            raise ProtocolError("cannot sum an empty ciphertext vector")
        acc = cts[0]
        for c in cts[1:]:
            acc = self.add(acc, c)
        return acc

    def weighted_sums(self, weights, cts: Sequence[Ciphertext]) -> list[Ciphertext]:
        """Column sums ``out[j] = sum_i weights[i, j] * cts[i]``."""
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != len(cts):
            raise ProtocolError(f"weight matrix {weights.shape} does not match {len(cts)} ciphertexts")
        return [self.sum(self.scale_vector(weights[:, j], cts)) for j in range(weights.shape[1])]
