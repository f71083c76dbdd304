"""Big-integer kernels used by the Paillier backend.

The fast path delegates to gmpy2. Setting ``VFLQN_PURE_BIGINT=1`` in the
environment (before import) forces the pure-Python path, which uses only the
builtin ``pow`` and a Miller-Rabin test. Both paths return plain ``int``.
"""
import os
import secrets

try:
    import gmpy2
except ImportError:  # pragma: no cover - gmpy2 ships in the dev env
    gmpy2 = None

USE_GMPY2 = gmpy2 is not None and os.environ.get("VFLQN_PURE_BIGINT", "0") != "1"

_SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97)


def _powmod_py(base: int, exp: int, mod: int) -> int:
    return pow(base, exp, mod)


def _invert_py(a: int, mod: int) -> int:
    return pow(a, -1, mod)


def _is_probable_prime_py(n: int, rounds: int = 40) -> bool:
    if n < 2:
        return False
    if n in (2,) + _SMALL_PRIMES:
        return True
    if n % 2 == 0 or any(n % p == 0 for p in _SMALL_PRIMES):
        return False
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = 2 + secrets.randbelow(n - 3)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


if USE_GMPY2:

    def powmod(base: int, exp: int, mod: int) -> int:
        return int(gmpy2.powmod(base, exp, mod))

    def invert(a: int, mod: int) -> int:
        r = gmpy2.invert(a, mod)
        if r == 0:
            raise ZeroDivisionError("not invertible")
        return int(r)

    def is_probable_prime(n: int) -> bool:
        return bool(gmpy2.is_prime(n, 40))

else:
    powmod = _powmod_py
    invert = _invert_py
    is_probable_prime = _is_probable_prime_py


def mulmod(a: int, b: int, mod: int) -> int:
    return a * b % mod


def random_prime(bits: int, max_tries: int = 100_000) -> int:
    """Random prime of exactly ``bits`` bits with the top two bits set.

    Setting both top bits guarantees the product of two such primes has
    exactly ``2 * bits`` bits.
    """
    for _ in range(max_tries):
        candidate = secrets.randbits(bits) | (3 << (bits - 2)) | 1
        if is_probable_prime(candidate):
            return candidate
    raise RuntimeError(f"no {bits}-bit prime found after {max_tries} candidates")


def random_below(n: int) -> int:
    """Uniform random integer in [1, n)."""
    return 1 + secrets.randbelow(n - 1)
