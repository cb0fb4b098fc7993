"""Acceptance criteria, each checked at its stated tolerance.

Every criterion prints one ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary.  Run directly with ``python tests/test_acceptance.py``.
"""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from almostcommute import matcore as mc
from almostcommute import suites
from almostcommute.familycorrect import correct_family, eval_bound
from almostcommute.genbench import (
    block_witness_pair,
    brute_force_nearest_commuting,
    haar_unitary,
    make_rng,
    perturbed_commuting,
    voiculescu_pair,
)
from almostcommute.paircorrect import correct_hermitian_pair, correct_normal, correct_unitary_pair

RESULTS = {}
EPS_GRID = (1e-2, 1e-4, 1e-6)
SEEDS = range(5)


class Criterion:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.failures = []
        self.checks = 0

    def le(self, value, limit, label):
        self.checks += 1
        if not value <= limit:
            self.failures.append(f"{label}: {value:.3e} > {limit:.3e}")

    def finish(self, detail=""):
        status = "FAIL" if self.failures else "PASS"
        line = f"{status} criterion {self.number}: {self.title} [{self.checks} checks{', ' + detail if detail else ''}]"
        if self.failures:
            line += f"; first failure: {self.failures[0]}"
        RESULTS[self.number] = line
        print(line)
        return line


def _timed(f, *args):
    t0 = time.perf_counter()
    out = f(*args)
    return out, time.perf_counter() - t0


def _pair_checks(c, label, report, originals, bound, unitary):
    n = originals[0].shape[0]
    a1, a2 = report.corrected
    for i, a in enumerate((a1, a2), 1):
        if unitary:
            c.le(mc.unitarity_residual(a), 1e-9, f"{label} unitarity {i}")
        else:
            c.le(mc.hermiticity_residual(a), 1e-9, f"{label} hermiticity {i}")
            c.le(mc.op_norm(a), 1 + 1e-8, f"{label} op_norm {i}")
    c.le(mc.trace_norm(mc.commutator(a1, a2)), 1e-9 * n, f"{label} commutator")
    c.le(mc.trace_norm(mc.commutator(a1, originals[0])), 1e-9 * n, f"{label} side commutator")
    for i in range(2):
        c.le(mc.trace_norm(originals[i] - report.corrected[i]), bound + 1e-7, f"{label} distance {i + 1}")


def _pair_eps(a, b):
    return mc.trace_norm(mc.commutator(a, b))


# ---------------------------------------------------------------------------

def criterion_1():
    c = Criterion(1, "unitary pair certificate")
    slowest = 0.0
    cases = [(f"voiculescu n={n}", voiculescu_pair(n)) for n in (16, 64, 256, 1024)]
    for eps in EPS_GRID:
        for seed in SEEDS:
            mats, _ = perturbed_commuting("unitary", 128, eps, seed)
            cases.append((f"perturbed eps={eps:g} seed={seed}", tuple(mats)))
    for label, (u1, u2) in cases:
        report, secs = _timed(correct_unitary_pair, u1, u2)
        slowest = max(slowest, secs)
        _pair_checks(c, label, report, (u1, u2), 30 * _pair_eps(u1, u2) ** (1 / 9), True)
        c.le(secs, 60.0, f"{label} runtime")
    return c.finish(f"{len(cases)} instances, slowest {slowest:.2f} s")


def criterion_2():
    c = Criterion(2, "hermitian pair certificate")
    n_cases = 0
    for eps in EPS_GRID:
        for seed in SEEDS:
            (h1, h2), _ = perturbed_commuting("hermitian", 128, eps, seed)
            c.le(max(mc.op_norm(h1), mc.op_norm(h2)), 1 + 1e-12, f"input op_norm eps={eps:g} seed={seed}")
            report = correct_hermitian_pair(h1, h2)
            _pair_checks(c, f"eps={eps:g} seed={seed}", report, (h1, h2),
                         12 * _pair_eps(h1, h2) ** (1 / 6), False)
            n_cases += 1
    return c.finish(f"{n_cases} instances")


def criterion_3():
    c = Criterion(3, "normal certificate")
    n_cases = 0
    for eps in EPS_GRID:
        for seed in SEEDS:
            (m,), defect = perturbed_commuting("normal", 128, eps, seed)
            report = correct_normal(m)
            nn = report.corrected[0]
            label = f"eps={eps:g} seed={seed}"
            c.le(mc.normality_residual(nn), 1e-9 * 128, f"{label} normality")
            c.le(mc.op_norm(nn), 1 + 1e-8, f"{label} op_norm")
            c.le(mc.trace_norm(m - nn), 36 * mc.normality_residual(m) ** (1 / 18) + 1e-7, f"{label} distance")
            n_cases += 1
    return c.finish(f"{n_cases} instances")


def criterion_4():
    c = Criterion(4, "k = 3 family certificate")
    for cls in ("unitary", "hermitian"):
        for seed in SEEDS:
            mats, _ = perturbed_commuting(cls, 64, 1e-4, seed, k=3)
            eps = max(_pair_eps(mats[i], mats[j]) for i, j in ((0, 1), (0, 2), (1, 2)))
            report = correct_family(mats, cls)
            out = report.corrected
            label = f"{cls} seed={seed}"
            for i, j in ((0, 1), (0, 2), (1, 2)):
                c.le(_pair_eps(out[i], out[j]), 1e-9 * 64, f"{label} commutator {i + 1}{j + 1}")
            bound = eval_bound(eps, 3, cls)
            for i in range(3):
                c.le(mc.trace_norm(mats[i] - out[i]), bound + 1e-7, f"{label} distance {i + 1}")
    return c.finish("10 families")


def criterion_5():
    c = Criterion(5, "property suites")
    results, secs = _timed(suites.run_all, 500)
    for r in results:
        c.le(r.failures, 0, f"{r.name} ({r.first_failure})")
        c.le(500 - r.trials, 0, f"{r.name} trial count")
    c.le(len(results), 7, "suite count")
    c.le(7, len(results), "suite count")
    c.le(secs, 120.0, "total runtime")
    return c.finish(f"{len(results)} suites, {secs:.1f} s")


def criterion_6():
    c = Criterion(6, "closed forms")
    dense = set(range(2, 257)) | {300, 511, 512, 1000, 1023, 1024, 1500, 2047, 2048}
    for n in range(2, 2049):
        u1, u2 = voiculescu_pair(n)
        target = abs(1 - np.exp(2j * np.pi / n))
        if n in dense:
            value = mc.trace_norm(mc.commutator(u1, u2))
        else:
            # [D, P] has entries (d_j - d_k) P_jk, so its norm is read off the permutation
            d = u1.diagonal()
            rows, cols = np.nonzero(u2)
            c.le(abs(rows.size - n), 0, f"voiculescu n={n} shift support")
            value = math.sqrt(np.sum(np.abs(d[rows] - d[cols]) ** 2) / n)
        c.le(abs(value - target), 1e-12, f"voiculescu n={n}")
    rng = make_rng(6)
    for n in (1, 2, 5, 16, 64, 257):
        for k in sorted({0, 1, n // 3, n - 1, n}):
            q = haar_unitary(n, rng)[:, :k]
            c.le(abs(mc.trace_norm(q @ q.conj().T) - math.sqrt(k / n)), 1e-12, f"projector n={n} k={k}")
    for m, d in ((1, 1), (1, 7), (2, 2), (3, 5), (4, 8), (16, 16), (7, 40)):
        a1, a2 = block_witness_pair(m, d)
        c.le(mc.trace_norm(mc.commutator(a1, a2)), 1e-12, f"block witness m={m} d={d}")
    return c.finish("voiculescu n=2..2048, projectors, block witnesses")


def _oracle_instances():
    rng = make_rng(7)
    out = []
    for seed in range(20):
        n = 2 + seed % 2
        cls = "unitary" if seed % 4 < 2 else "hermitian"
        if seed < 2:
            mats = voiculescu_pair(n)
        elif seed % 5 == 0:
            mats, _ = perturbed_commuting(cls, n, 0.1, seed)
        elif cls == "unitary":
            mats = (haar_unitary(n, rng), haar_unitary(n, rng))
        else:
            g = [rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for _ in range(2)]
            mats = [(x + x.conj().T) / 2 for x in g]
            mats = [x / mc.op_norm(x) for x in mats]
        out.append((seed, cls, [np.asarray(x, dtype=np.complex128) for x in mats]))
    return out


def criterion_7():
    c = Criterion(7, "oracle sanity (n <= 3)")
    gaps = []
    for seed, cls, (a, b) in _oracle_instances():
        pipe = correct_unitary_pair if cls == "unitary" else correct_hermitian_pair
        report = pipe(a, b)
        oracle = brute_force_nearest_commuting(a, b, cls, seed=seed)
        pipeline = max(report.distances)
        gaps.append(pipeline - oracle.distance)
        c.le(oracle.distance - pipeline, 1e-6, f"instance {seed} ({cls}, n={a.shape[0]})")
    return c.finish(f"20 instances, min pipeline - oracle {min(gaps):.3e}")


def _cli(*args, cwd):
    cmd = [sys.executable, "-m", "almostcommute.cli", *args]
    return subprocess.run(cmd, cwd=cwd, capture_output=True, text=True)


def _strip_wall(path):
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        doc.pop("wall_ms", None)
        return json.dumps(doc, sort_keys=True).encode()
    if path.suffix == ".csv":
        lines = path.read_text().splitlines()
        return "\n".join(ln.rsplit(",", 1)[0] for ln in lines).encode()
    return path.read_bytes()


def criterion_8(tmp):
    c = Criterion(8, "CLI determinism")
    codes = []
    for run in ("a", "b"):
        root = tmp / run
        codes.append(_cli("gen", "perturbed", "--class", "unitary", "--n", "64", "--eps", "1e-4",
                          "--seed", "3", "--out", str(root / "gen"), cwd=tmp).returncode)
        ins = [str(root / "gen" / f"matrix_{i}.cmx") for i in (1, 2)]
        codes.append(_cli("correct", *ins, "--class", "unitary", "--threads", "2",
                          "--out", str(root / "correct"), cwd=tmp).returncode)
        codes.append(_cli("gen", "perturbed", "--class", "hermitian", "--n", "32", "--eps", "1e-3",
                          "--k", "3", "--seed", "4", "--format", "json", "--out", str(root / "fam"), cwd=tmp).returncode)
        fam = [str(root / "fam" / f"matrix_{i}.json") for i in (1, 2, 3)]
        codes.append(_cli("correct", *fam, "--class", "hermitian", "--threads", "2", "--format", "json",
                          "--out", str(root / "famout"), cwd=tmp).returncode)
        codes.append(_cli("sweep", "--class", "unitary", "--kind", "perturbed", "--n", "16", "32",
                          "--eps", "1e-3", "--seeds", "0", "1", "--threads", "2",
                          "--out", str(root / "sweep.csv"), cwd=tmp).returncode)
    for i, code in enumerate(codes):
        c.le(code, 0, f"invocation {i} exit code")
    files = sorted(p.relative_to(tmp / "a") for p in (tmp / "a").rglob("*") if p.is_file())
    for rel in files:
        other = tmp / "b" / rel
        same = other.exists() and _strip_wall(tmp / "a" / rel) == _strip_wall(other)
        c.le(0 if same else 1, 0, f"{rel} differs")
    return c.finish(f"{len(files)} files compared")


# ---------------------------------------------------------------------------

def _assert(line):
    assert line.startswith("PASS"), line


@pytest.mark.acceptance
def test_criterion_1_unitary_pairs():
    _assert(criterion_1())


@pytest.mark.acceptance
def test_criterion_2_hermitian_pairs():
    _assert(criterion_2())


@pytest.mark.acceptance
def test_criterion_3_normal():
    _assert(criterion_3())


@pytest.mark.acceptance
def test_criterion_4_families():
    _assert(criterion_4())


@pytest.mark.acceptance
def test_criterion_5_suites():
    _assert(criterion_5())


@pytest.mark.acceptance
def test_criterion_6_closed_forms():
    _assert(criterion_6())


@pytest.mark.acceptance
def test_criterion_7_oracle():
    _assert(criterion_7())


@pytest.mark.acceptance
def test_criterion_8_determinism(tmp_path):
    _assert(criterion_8(tmp_path))


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        lines = [criterion_1(), criterion_2(), criterion_3(), criterion_4(),
                 criterion_5(), criterion_6(), criterion_7(), criterion_8(Path(d))]
    sys.exit(0 if all(ln.startswith("PASS") for ln in lines) else 1)
