"""Compare the compiled kernels with the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is timed on both backends with the same inputs; the outputs are
checked for equality before any timing is reported.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from implicit_ba import _kernels
from implicit_ba import committee as cm

K0, K1 = 0x0706050403020100, 0x0F0E0D0C0B0A0908


def _cases(rng: np.random.Generator) -> dict[str, tuple]:
    n = 1024
    words = rng.integers(0, 2**63, size=n, dtype=np.int64).astype(np.uint64)
    keys = [int(x) for x in rng.integers(0, 2**62, size=n)]
    size = cm.committee_size(n, cm.DESK_C)
    refs = cm.referee_sample_size(n)
    membership = np.zeros((size, n), dtype=np.uint8)
    for row in range(size):
        membership[row, rng.choice(n, size=refs, replace=False)] = 1
    honest = (rng.random(n) > 0.4).astype(np.uint8)
    return {
        "siphash24 (64-byte message)": ("siphash24", (K0, K1, bytes(range(64)))),
        "siphash24_u64 (one word)": ("siphash24_u64", (K0, K1, 0x1234_5678_9ABC_DEF0)),
        "siphash24_u64_array (1024 words)": ("siphash24_u64_array", (K0, K1, words)),
        "nearest_key (1024 keys)": ("nearest_key", (keys, 2**61)),
        f"pairwise_common_honest ({size}x{n})": ("pairwise_common_honest", (membership, honest)),
    }


def _same(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return bool(np.array_equal(np.asarray(a), np.asarray(b)))
    return a == b


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", default=None, help="also write the results here")
    args = parser.parse_args(argv)

    compiled = _kernels.compiled_backend
    python = _kernels.python_backend
    if compiled is None:
        print("compiled backend not available; build with `pip install --no-build-isolation -e .`", file=sys.stderr)
        return 1
    results = []
    print(f"{'kernel':<42} {'compiled':>12} {'python':>12} {'speedup':>9}")
    for label, (name, call_args) in _cases(np.random.default_rng(args.seed)).items():
        fc, fp = getattr(compiled, name), getattr(python, name)
        if not _same(fc(*call_args), fp(*call_args)):
            print(f"backends disagree on {label}", file=sys.stderr)
            return 1
        timer_c = timeit.Timer(lambda: fc(*call_args))
        loops, _ = timer_c.autorange()
        t_c = min(timer_c.repeat(args.repeat, loops)) / loops
        timer_p = timeit.Timer(lambda: fp(*call_args))
        loops_p, _ = timer_p.autorange()
        t_p = min(timer_p.repeat(args.repeat, loops_p)) / loops_p
        results.append({"kernel": label, "compiled_s": t_c, "python_s": t_p, "speedup": t_p / t_c})
        print(f"{label:<42} {t_c * 1e6:>10.2f}us {t_p * 1e6:>10.2f}us {t_p / t_c:>8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
