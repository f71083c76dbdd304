"""Time the Paillier hot paths with the gmpy2 kernels and the pure-Python ones.

Each path runs in a fresh interpreter because the kernel choice is read from
VFLQN_PURE_BIGINT at import time.

    python benchmarks/bench_bigint.py [--bits 1024] [--n 200]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from vflqn.he import PaillierBackend, bigint

bits, n = int(sys.argv[1]), int(sys.argv[2])
out = {"gmpy2": bigint.USE_GMPY2}
t = time.perf_counter(); he = PaillierBackend.generate(bits); out["keygen"] = time.perf_counter() - t
rng = np.random.default_rng(0)
xs = rng.normal(size=n)
t = time.perf_counter(); cts = he.encrypt_vector(xs); out["encrypt"] = time.perf_counter() - t
t = time.perf_counter(); he.add_vectors(cts, cts); out["add"] = time.perf_counter() - t
t = time.perf_counter(); he.scale_vector(np.full(n, 0.25), cts); out["scalar_mul"] = time.perf_counter() - t
t = time.perf_counter(); he.weighted_sums(rng.normal(size=(n, 10)), cts); out["weighted_sums_x10"] = time.perf_counter() - t
t = time.perf_counter(); he.decrypt_vector(cts); out["decrypt"] = time.perf_counter() - t
print(json.dumps(out))
"""


def run(pure: bool, bits: int, n: int) -> dict:
    env = dict(os.environ, VFLQN_PURE_BIGINT="1" if pure else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(bits), str(n)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bits", type=int, default=1024)
    ap.add_argument("--n", type=int, default=200, help="ciphertexts per operation")
    args = ap.parse_args()
    fast, pure = run(False, args.bits, args.n), run(True, args.bits, args.n)
    if not fast["gmpy2"]:
        print("gmpy2 not importable: both columns use the pure-Python kernels")
    print(f"{args.bits}-bit keys, {args.n} ciphertexts per operation")
    print(f"{'operation':<20}{'gmpy2 [s]':>12}{'pure [s]':>12}{'speedup':>10}")
    for op in ("keygen", "encrypt", "add", "scalar_mul", "weighted_sums_x10", "decrypt"):
        print(f"{op:<20}{fast[op]:>12.4f}{pure[op]:>12.4f}{pure[op] / fast[op]:>9.1f}x")


if __name__ == "__main__":
    main()
