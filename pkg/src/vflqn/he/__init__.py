"""Additively homomorphic encryption backends."""
from .base import Ciphertext, HEBackend
from .encoding import BASE, DEFAULT_EXPONENT, EncodedNumber, decode, encode
from .mock import MockBackend
from .paillier import DEFAULT_KEY_BITS, KeyPair, PaillierBackend, PrivateKey, PublicKey, keygen

BACKENDS = ("paillier", "mock")


def make_backend(name: str, key_bits: int = DEFAULT_KEY_BITS) -> HEBackend:
    """Coordinator-side backend (holds the private key)."""
    if name == "paillier":
        return PaillierBackend.generate(key_bits)
    if name == "mock":
        return MockBackend()
    raise ValueError(f"unknown HE backend {name!r}; expected one of {BACKENDS}")


__all__ = [
    "BASE", "BACKENDS", "Ciphertext", "DEFAULT_EXPONENT", "DEFAULT_KEY_BITS", "EncodedNumber",
    "HEBackend", "KeyPair", "MockBackend", "PaillierBackend", "PrivateKey", "PublicKey",
    "decode", "encode", "keygen", "make_backend",
]
