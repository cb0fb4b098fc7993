"""Compare the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py --sizes 16 32 64 128 --repeats 5
    python benchmarks/bench_kernels.py --end-to-end 256

Kernel timings call both variants in one process (``use_numba=True/False``).
The end-to-end run launches two subprocesses, one with ALMOSTCOMMUTE_NO_NUMBA=1,
since the flag is read at import time.
"""
import argparse
import csv
import os
import subprocess
import sys
import time

import numpy as np

from almostcommute import _kernels as K
from almostcommute.genbench import haar_unitary, make_rng

E2E_SNIPPET = """
import time
from almostcommute import _kernels, correct_unitary_pair, voiculescu_pair
u1, u2 = voiculescu_pair({n})
correct_unitary_pair(u1, u2)
t0 = time.perf_counter()
r = correct_unitary_pair(u1, u2)
print(_kernels.USE_NUMBA, time.perf_counter() - t0, max(r.distances))
"""


def best_of(f, repeats):
    f()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        f()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, rng):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = (g + g.conj().T) / 2
    vals = np.exp(2j * np.pi * np.sort(rng.uniform(0, 1, n)))
    t = max(2, n // 8)
    labels = np.sort(rng.integers(0, t, n)).astype(np.int64)
    q = haar_unitary(n, rng)[:, : n // 2]
    return {
        "jacobi_eigh": lambda nb: K.jacobi_eigh(h, use_numba=nb),
        "gap_threshold": lambda nb: K.gap_threshold(g, vals, 0.1, labels, t, True, use_numba=nb),
        "max_outside": lambda nb: K.max_outside(g, labels, t, K.SHAPE_CYCLIC_THREE, use_numba=nb),
        "complete_basis": lambda nb: K.complete_basis(q, use_numba=nb),
    }


def run_kernels(sizes, repeats, seed):
    rng = make_rng(seed)
    rows = []
    for n in sizes:
        for name, f in cases(n, rng).items():
            t_nb = best_of(lambda: f(True), repeats) if K.HAVE_NUMBA else float("nan")
            t_np = best_of(lambda: f(False), repeats)
            rows.append({"kernel": name, "n": n, "numba_ms": 1e3 * t_nb, "numpy_ms": 1e3 * t_np,
                         "speedup": t_np / t_nb})
    return rows


def run_end_to_end(n):
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, ALMOSTCOMMUTE_NO_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", E2E_SNIPPET.format(n=n)], env=env,
                             capture_output=True, text=True, check=True)
        _, secs, dist = res.stdout.split()
        out[label] = (float(secs), float(dist))
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64, 128])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="also write the kernel table here")
    p.add_argument("--end-to-end", type=int, metavar="N",
                   help="time correct_unitary_pair on a Voiculescu pair of size N")
    args = p.parse_args(argv)

    if not K.HAVE_NUMBA:
        print("numba is not installed; only the numpy column is meaningful")
    rows = run_kernels(args.sizes, args.repeats, args.seed)
    print(f"{'kernel':<16}{'n':>6}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for r in rows:
        print(f"{r['kernel']:<16}{r['n']:>6}{r['numba_ms']:>12.3f}{r['numpy_ms']:>12.3f}{r['speedup']:>10.2f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    if args.end_to_end:
        res = run_end_to_end(args.end_to_end)
        for label, (secs, dist) in res.items():
            print(f"end-to-end n={args.end_to_end} {label}: {secs:.3f} s (max distance {dist:.6g})")


if __name__ == "__main__":
    main()
