"""Compare the compiled and pure-Python monomial canonicalizers.

    python benchmarks/bench_canon.py [--reps N]

The corpus is random presentations of the E4 basis monomials.
"""

import argparse
import random
import time

from dwsg.pipeline import load_golden
from dwsg.tensor import _canon_py
from dwsg.tensor.presentations import random_presentation


def corpus(n_per: int, seed: int = 0) -> list:
    rng = random.Random(seed)
    out = []
    for m in load_golden("E4full").monomials():
        for _ in range(n_per):
            out.append(random_presentation(m, rng)[0])
    return out


def bench(fn, data, reps: int) -> float:
    best = float("inf")
    for _ in range(reps):
        t = time.perf_counter()
        for atoms in data:
            fn(atoms)
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--per", type=int, default=50)
    args = ap.parse_args()
    data = corpus(args.per)
    t_py = bench(_canon_py.canonicalize, data, args.reps)
    print(f"corpus: {len(data)} presentations")
    print(f"python : {t_py * 1e6 / len(data):8.2f} us/monomial")
    try:
        from dwsg.tensor import _canon
    except ImportError:
        print("cython : extension not built")
        return
    assert all(_canon.canonicalize(a) == _canon_py.canonicalize(a) for a in data)
    t_cy = bench(_canon.canonicalize, data, args.reps)
    print(f"cython : {t_cy * 1e6 / len(data):8.2f} us/monomial")
    print(f"speedup: {t_py / t_cy:.2f}x")


if __name__ == "__main__":
    main()
