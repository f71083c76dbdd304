"""Fixed-point codec between reals and the Paillier plaintext ring Z_N.

A real ``x`` is stored as ``mantissa * BASE**exponent``. Negative values wrap
into the upper part of the ring. Anything whose mantissa magnitude exceeds
``max_int = N // 3 - 1`` is rejected, which leaves a gap in the middle of the
ring so that overflow during homomorphic arithmetic is detectable on decode.
"""
from dataclasses import dataclass
from fractions import Fraction

from ..errors import EncodingError

BASE = 16
# 16**-10 == 2**-40: the absolute quantisation step of a fresh encoding.
DEFAULT_EXPONENT = -10


@dataclass(frozen=True)
class EncodedNumber:
    mantissa: int
    exponent: int


def max_int_for(n: int) -> int:
    return n // 3 - 1


def scale_to_int(x, exponent: int) -> int:
    """Round ``x / BASE**exponent`` to the nearest integer, exactly."""
    if exponent <= 0:
        return round(Fraction(x) * BASE ** (-exponent))
    return round(Fraction(x) / BASE**exponent)


def encode(n: int, x, exponent: int = DEFAULT_EXPONENT) -> EncodedNumber:
    max_int = max_int_for(n)
    m = scale_to_int(x, exponent)
    if abs(m) > max_int:
        bound = float(Fraction(max_int) * Fraction(BASE) ** exponent)
        raise EncodingError(f"value {x!r} exceeds the encoding bound |x| <= {bound:.6g}")
    return EncodedNumber(m % n, exponent)


def signed_mantissa(n: int, mantissa: int) -> int:
    max_int = max_int_for(n)
    if mantissa <= max_int:
        return mantissa
    if mantissa >= n - max_int:
        return mantissa - n
    raise EncodingError("decrypted mantissa lies in the overflow band")


def decode(n: int, enc: EncodedNumber) -> float:
    m = signed_mantissa(n, enc.mantissa)
    if enc.exponent >= 0:
        return float(m * BASE**enc.exponent)
    return float(Fraction(m, BASE ** (-enc.exponent)))
