"""Command-line front end.

    almostcommute gen voiculescu --n 64 --out DIR
    almostcommute gen perturbed --class hermitian --n 32 --eps 1e-4 --seed 7 --out DIR
    almostcommute correct --class unitary DIR/matrix_1.cmx DIR/matrix_2.cmx --out OUT
    almostcommute sweep --class unitary --kind voiculescu --n 16 64 256 --out sweep.csv
    almostcommute selftest

Exit codes: 0 success, 1 verdict failure, 2 parse or usage error, 3 class violation.
"""
import argparse
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, suites
from .errors import (
    DimensionMismatch,
    InvalidMatrix,
    NotHermitian,
    NotNormal,
    NotPositive,
    NotUnitary,
    OpNormTooLarge,
    ReprojectionFailed,
)
from .familycorrect import correct_family
from .genbench import (
    block_witness_pair,
    hermitian_voiculescu,
    perturbed_commuting,
    verify_report,
    voiculescu_pair,
)
from .matcore import MatrixClass, commutator, normality_residual, trace_norm
from .paircorrect import (
    correct_hermitian_pair,
    correct_normal,
    correct_unitary_pair,
    correct_unitary_positive,
)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_CLASS = 3

CLASS_ERRORS = (NotUnitary, NotHermitian, NotPositive, NotNormal, OpNormTooLarge)
PARSE_ERRORS = (InvalidMatrix, DimensionMismatch)


class CmxFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# CMX v1 matrix files
# ---------------------------------------------------------------------------

def _entry(z):
    return f"{float(z.real).hex()},{float(z.imag).hex()}"


def _parse_entry(tok):
    try:
        re, im = tok.split(",")
        return complex(float.fromhex(re), float.fromhex(im))
    except ValueError as exc:
        raise CmxFormatError(f"bad entry {tok!r}") from exc


def format_cmx(m):
    m = np.asarray(m, dtype=np.complex128)
    n = m.shape[0]
    lines = [f"cmx 1 {n}"]
    lines += [" ".join(_entry(z) for z in row) for row in m]
    return "\n".join(lines) + "\n"


def parse_cmx(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CmxFormatError("empty matrix file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "cmx" or head[1] != "1":
        raise CmxFormatError(f"bad header {lines[0]!r}")
    try:
        n = int(head[2])
    except ValueError as exc:
        raise CmxFormatError(f"bad dimension {head[2]!r}") from exc
    if n < 1 or len(lines) != n + 1:
        raise CmxFormatError(f"expected {n} rows, found {len(lines) - 1}")
    m = np.empty((n, n), dtype=np.complex128)
    for i, ln in enumerate(lines[1:]):
        toks = ln.split()
        if len(toks) != n:
            raise CmxFormatError(f"row {i + 1} has {len(toks)} entries, expected {n}")
        m[i] = [_parse_entry(t) for t in toks]
    return m


def format_json_matrix(m):
    m = np.asarray(m, dtype=np.complex128)
    doc = {"format": "cmx-json", "version": 1, "n": m.shape[0],
           "rows": [[_entry(z) for z in row] for row in m]}
    return json.dumps(doc, indent=1) + "\n"


def parse_json_matrix(text):
    try:
        doc = json.loads(text)
        n = int(doc["n"])
        rows = doc["rows"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CmxFormatError("bad JSON matrix") from exc
    if len(rows) != n or any(len(r) != n for r in rows):
        raise CmxFormatError("JSON matrix has the wrong shape")
    return np.array([[_parse_entry(t) for t in r] for r in rows], dtype=np.complex128)


def read_matrix(path):
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return parse_json_matrix(text)
    return parse_cmx(text)


def write_matrix(path, m, fmt="cmx"):
    text = format_json_matrix(m) if fmt == "json" else format_cmx(m)
    Path(path).write_text(text)


def _dump_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# corrections
# ---------------------------------------------------------------------------

def run_correction(matrix_class, mats, workers=1):
    matrix_class = MatrixClass(matrix_class)
    k = len(mats)
    if matrix_class is MatrixClass.NORMAL:
        if k != 1:
            raise argparse.ArgumentTypeError("class normal takes exactly one matrix")
        return correct_normal(mats[0], workers=workers)
    if matrix_class is MatrixClass.UNITARY_POSITIVE:
        if k != 2:
            raise argparse.ArgumentTypeError("class unitary-positive takes exactly two matrices")
        return correct_unitary_positive(mats[0], mats[1], workers=workers)
    if k < 2:
        raise argparse.ArgumentTypeError(f"class {matrix_class.value} needs at least two matrices")
    if k == 2:
        pair = correct_unitary_pair if matrix_class is MatrixClass.UNITARY else correct_hermitian_pair
        return pair(mats[0], mats[1], workers=workers)
    return correct_family(mats, matrix_class, workers=workers)


def measured_eps(matrix_class, mats):
    if MatrixClass(matrix_class) is MatrixClass.NORMAL:
        return normality_residual(mats[0])
    worst = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            worst = max(worst, trace_norm(commutator(mats[i], mats[j])))
    return worst


def _voiculescu_family(matrix_class, n):
    matrix_class = MatrixClass(matrix_class)
    u1, u2 = voiculescu_pair(n)
    if matrix_class is MatrixClass.UNITARY:
        return [u1, u2]
    if matrix_class is MatrixClass.HERMITIAN:
        return list(hermitian_voiculescu(n))
    if matrix_class is MatrixClass.UNITARY_POSITIVE:
        h = (u1 + u1.conj().T) / 4 + np.eye(n) / 2
        return [u2, h]
    return [(u1 + u2) / 2]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"tool": "almostcommute", "version": __version__, "kind": args.kind}
    if args.kind == "voiculescu":
        if args.n is None:
            raise argparse.ArgumentTypeError("voiculescu needs --n")
        mats = _voiculescu_family(args.matrix_class or "unitary", args.n)
        manifest.update(n=args.n, **{"class": (args.matrix_class or "unitary")})
    elif args.kind == "block-witness":
        if args.m is None or args.d is None:
            raise argparse.ArgumentTypeError("block-witness needs --m and --d")
        mats = list(block_witness_pair(args.m, args.d))
        manifest.update(m=args.m, d=args.d, n=args.m * args.d, **{"class": "unitary"})
    else:
        if args.n is None or args.eps is None or args.matrix_class is None:
            raise argparse.ArgumentTypeError("perturbed needs --class, --n and --eps")
        mats, _ = perturbed_commuting(args.matrix_class, args.n, args.eps, args.seed, k=args.k)
        manifest.update(n=args.n, target_eps=args.eps, seed=args.seed, k=len(mats),
                        **{"class": args.matrix_class})
    ext = "json" if args.format == "json" else "cmx"
    files = []
    for i, m in enumerate(mats):
        name = f"matrix_{i + 1}.{ext}"
        write_matrix(out / name, m, args.format)
        files.append(name)
    manifest["eps"] = measured_eps(manifest["class"], mats)
    manifest["files"] = files
    _dump_json(out / "manifest.json", manifest)
    print(f"wrote {len(files)} matrices to {out} (eps = {manifest['eps']:.6g})")
    return EXIT_OK


def cmd_correct(args):
    mats = [read_matrix(p) for p in args.inputs]
    t0 = time.perf_counter()
    report = run_correction(args.matrix_class, mats, workers=args.threads)
    wall_ms = (time.perf_counter() - t0) * 1e3
    verdict = verify_report(report, mats, tol_structural=args.tol_structural,
                            tol_certify=args.tol_certify)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "json" if args.format == "json" else "cmx"
    files = []
    for i, m in enumerate(report.corrected):
        name = f"corrected_{i + 1}.{ext}"
        write_matrix(out / name, m, args.format)
        files.append(name)
    doc = {
        "tool": "almostcommute",
        "version": __version__,
        "inputs": [Path(p).name for p in args.inputs],
        "outputs": files,
        "threads": args.threads,
        "report": report.to_json(),
        "wall_ms": wall_ms,
    }
    _dump_json(out / "report.json", doc)
    _dump_json(out / "verdict.json", verdict.to_json())
    for c in verdict.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} {c.value:.3e} <= {c.threshold:.3e}")
    print(f"distances {[round(d, 6) for d in report.distances]} bound {report.certified_bound:.6g}")
    return EXIT_OK if verdict.passed else EXIT_VERDICT


def _sweep_trial(matrix_class, kind, n, eps, seed, k):
    if kind == "voiculescu":
        mats = _voiculescu_family(matrix_class, n)
    else:
        mats, _ = perturbed_commuting(matrix_class, n, eps, seed, k=k)
    t0 = time.perf_counter()
    report = run_correction(matrix_class, mats)
    wall_ms = (time.perf_counter() - t0) * 1e3
    verdict = verify_report(report, mats)
    return report, wall_ms, verdict.passed


def cmd_sweep(args):
    cls = MatrixClass(args.matrix_class)
    k = 1 if cls is MatrixClass.NORMAL else (2 if args.kind == "voiculescu" or cls is MatrixClass.UNITARY_POSITIVE else args.k)
    if args.kind == "perturbed" and not args.eps:
        raise argparse.ArgumentTypeError("perturbed sweeps need --eps")
    eps_list = args.eps if args.kind == "perturbed" else [None]
    seeds = args.seeds if args.kind == "perturbed" else [0]
    trials = [(n, e, s) for n in args.n for e in eps_list for s in seeds]

    def run(trial):
        n, e, s = trial
        return _sweep_trial(cls, args.kind, n, e, s, k)

    try:
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                results = list(pool.map(run, trials))
        else:
            results = [run(t) for t in trials]
    except ReprojectionFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERDICT

    header = ["class", "kind", "n", "seed", "eps"] + [f"dist_{i + 1}" for i in range(k)]
    header += ["bound", "ratio", "t", "a", "cuts", "wall_ms"]
    all_ok = True
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for (n, _, s), (report, wall_ms, ok) in zip(trials, results):
            all_ok &= ok
            bound = report.certified_bound
            ratio = max(report.distances) / bound if bound > 0 else 0.0
            p = report.params
            w.writerow([cls.value, args.kind, n, s, repr(report.epsilon)]
                       + [repr(d) for d in report.distances]
                       + [repr(bound), repr(ratio), p.t, p.a, len(p.cuts), f"{wall_ms:.3f}"])
    print(f"wrote {len(trials)} rows to {args.out}")
    return EXIT_OK if all_ok else EXIT_VERDICT


def cmd_selftest(args):
    results = suites.run_all(trials=args.trials, workers=args.threads)
    ok = True
    for r in results:
        ok &= r.passed
        status = "PASS" if r.passed else "FAIL"
        line = f"{status} {r.name:<26} trials={r.trials} failures={r.failures} worst_margin={r.worst_margin:.3e}"
        if r.first_failure:
            line += f" first: {r.first_failure}"
        print(line)
    return EXIT_OK if ok else EXIT_VERDICT


# ---------------------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="almostcommute", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    classes = [c.value for c in MatrixClass]

    g = sub.add_parser("gen", help="write a generated instance")
    g.add_argument("kind", choices=["voiculescu", "block-witness", "perturbed"])
    g.add_argument("--class", dest="matrix_class", choices=classes)
    g.add_argument("--n", type=_positive_int)
    g.add_argument("--m", type=_positive_int)
    g.add_argument("--d", type=_positive_int)
    g.add_argument("--k", type=_positive_int, default=2)
    g.add_argument("--eps", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=["cmx", "json"], default="cmx")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("correct", help="correct matrices read from files")
    c.add_argument("inputs", nargs="+")
    c.add_argument("--class", dest="matrix_class", choices=classes, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--tol-structural", type=float, default=1e-10)
    c.add_argument("--tol-certify", type=float, default=1e-7)
    c.add_argument("--threads", type=_positive_int, default=1)
    c.add_argument("--format", choices=["cmx", "json"], default="cmx")
    c.set_defaults(func=cmd_correct)

    s = sub.add_parser("sweep", help="run corrections over a grid and write CSV")
    s.add_argument("--class", dest="matrix_class", choices=classes, required=True)
    s.add_argument("--kind", choices=["voiculescu", "perturbed"], required=True)
    s.add_argument("--n", type=_positive_int, nargs="+", required=True)
    s.add_argument("--eps", type=float, nargs="+")
    s.add_argument("--seeds", type=int, nargs="+", default=[0])
    s.add_argument("--k", type=_positive_int, default=2)
    s.add_argument("--seed", type=int, help="alias for a single --seeds value")
    s.add_argument("--threads", type=_positive_int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("selftest", help="run the seeded property suites")
    t.add_argument("--trials", type=_positive_int, default=500)
    t.add_argument("--threads", type=_positive_int, default=1)
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is not None and args.command == "sweep":
        args.seeds = [args.seed]
    try:
        return args.func(args)
    except (CmxFormatError, argparse.ArgumentTypeError, *PARSE_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CLASS_ERRORS as exc:
        print(f"class violation: {exc}", file=sys.stderr)
        return EXIT_CLASS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
