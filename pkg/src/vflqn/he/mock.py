import itertools

import numpy as np

from ..errors import ProtocolError
from .base import Ciphertext, HEBackend
from .encoding import DEFAULT_EXPONENT

_ids = itertools.count()


class MockPublicKey:
    def __init__(self):
        self.key_id = next(_ids)

    def __repr__(self):
        return f"<MockPublicKey {self.key_id}>"

    def to_json(self) -> dict:
        return {"mock": self.key_id}


class MockBackend(HEBackend):
    """Plaintext passthrough with the Paillier interface.

    Exponents are tracked the same way as in Paillier so that message shapes
    match, but values are plain floats and no quantisation happens.
    """

    name = "mock"

    def __init__(self, public_key=None, private=True):
        self.public_key = public_key if public_key is not None else MockPublicKey()
        self._private = private

    @property
    def has_private_key(self) -> bool:
        return self._private

    def public_only(self) -> "MockBackend":
        return MockBackend(self.public_key, private=False)

    def encrypt(self, x, exponent=DEFAULT_EXPONENT):
        return Ciphertext(float(x), exponent, self.public_key)

    def decrypt(self, a):
        if not self._private:
            raise ProtocolError("this party does not hold the private key")
        self._check_key(a)
        return a.raw

    def add(self, a, b):
        self._check_key(a, b)
        return Ciphertext(a.raw + b.raw, min(a.exponent, b.exponent), self.public_key)

    def scalar_mul(self, k, a):
        self._check_key(a)
        return Ciphertext(float(k) * a.raw, a.exponent + DEFAULT_EXPONENT, self.public_key)

    def from_wire(self, record):
        return Ciphertext(float(record["raw"]), int(record["exp"]), self.public_key)

    def encrypt_vector(self, xs, exponent=DEFAULT_EXPONENT):
        pk = self.public_key
        return [Ciphertext(x, exponent, pk) for x in np.asarray(xs, dtype=float).ravel().tolist()]

    def decrypt_vector(self, cts):
        if not self._private:
            raise ProtocolError("this party does not hold the private key")
        self._check_key(*cts)
        return np.array([c.raw for c in cts], dtype=float)

    def sum(self, cts):
        if not cts:
            raise ProtocolError("cannot sum an empty ciphertext vector")
        self._check_key(*cts)
        return Ciphertext(float(np.sum([c.raw for c in cts])), min(c.exponent for c in cts), self.public_key)

    def weighted_sums(self, weights, cts):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != len(cts):
            raise ProtocolError(f"weight matrix {weights.shape} does not match {len(cts)} ciphertexts")
        self._check_key(*cts)
        vals = np.array([c.raw for c in cts], dtype=float)
        exp = min(c.exponent for c in cts) + DEFAULT_EXPONENT
        pk = self.public_key
        return [Ciphertext(v, exp, pk) for v in (vals @ weights).tolist()]
