"""Seeded property suites for the norm inequalities and auxiliary estimates.

Norms are looked up through the ``matcore`` module at call time, so a patched
``trace_norm`` is seen by every suite (used by the mutation self-check).
"""
import time
from dataclasses import dataclass

import numpy as np

from . import corelemmas as cl
from . import matcore as mc
from .genbench import haar_unitary, make_rng

TOL = 1e-9
SLACK = 1e-7


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    failures: int
    worst_margin: float   # most negative (bound - value) observed; >= -tol when passing
    seconds: float
    first_failure: str = ""

    @property
    def passed(self):
        return self.failures == 0

    def to_json(self):
        return {"name": self.name, "trials": self.trials, "failures": self.failures,
                "worst_margin": self.worst_margin, "seconds": self.seconds,
                "passed": self.passed, "first_failure": self.first_failure}


class _Tally:
    def __init__(self, name):
        self.name = name
        self.failures = 0
        self.worst = np.inf
        self.first = ""

    def le(self, lhs, rhs, tol, label):
        margin = rhs - lhs
        self.worst = min(self.worst, margin)
        if not margin >= -tol:
            self.failures += 1
            if not self.first:
                self.first = f"{label}: {lhs:.6g} > {rhs:.6g}"

    def close(self, x, y, tol, label):
        self.le(abs(x - y), 0.0, tol, label)


def _ginibre(rng, n, scale=1.0):
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)


def _hermitian(rng, n):
    g = _ginibre(rng, n)
    return (g + g.conj().T) / 2


def _unit_op(rng, n):
    g = _ginibre(rng, n)
    return g / mc.op_norm(g) * rng.uniform(0.2, 1.0)


def _run(name, trials, seed, body):
    tally = _Tally(name)
    rng = make_rng(seed)
    t0 = time.perf_counter()
    for trial in range(trials):
        body(rng, tally, trial)
    return SuiteResult(name, trials, tally.failures, float(tally.worst),
                       time.perf_counter() - t0, tally.first)


# ---------------------------------------------------------------------------

def norm_inequalities(trials=500, seed=1):
    """The seven standard inequalities between the two norms."""

    def body(rng, t, trial):
        n = int(rng.integers(1, 17))
        a = _ginibre(rng, n, rng.uniform(0.1, 3))
        b = _ginibre(rng, n, rng.uniform(0.1, 3))
        tn, op = mc.trace_norm, mc.op_norm
        eye = np.eye(n)
        t.le(abs(mc.inner(a, b)), tn(a) * tn(b), TOL, "1 Cauchy-Schwarz")
        t.le(abs(mc.normalized_trace(a)), tn(a), TOL, "1 trace")
        t.le(tn(a + b), tn(a) + tn(b), TOL, "2 triangle")
        t.le(tn(a @ b), op(a) * tn(b), TOL, "3 left")
        t.le(tn(b @ a), op(a) * tn(b), TOL, "3 right")
        t.le(tn(a), op(a), TOL, "4 lower")
        t.le(op(a), np.sqrt(n) * tn(a), TOL, "4 upper")
        k = int(rng.integers(0, n + 1))
        q = haar_unitary(n, rng)[:, :k]
        p = q @ q.conj().T
        t.close(tn(p), np.sqrt(k / n), 1e-12, "5 projector")
        low = q @ _ginibre(rng, k, 1.0) @ q.conj().T if k else np.zeros((n, n))
        t.le(tn(low), np.sqrt(k / n) * op(low), TOL, "6 rank")
        t.close(op(a) ** 2, op(a.conj().T @ a), TOL * max(1.0, op(a) ** 2), "7 op square")
        t.close(tn(a) ** 2, mc.inner(eye, a.conj().T @ a).real, TOL * max(1.0, tn(a) ** 2), "7 trace identity")
        t.le(tn(a) ** 2, tn(a.conj().T @ a), TOL, "7 trace square")

    return _run("norm inequalities", trials, seed, body)


def weyl_inequality(trials=500, seed=2):
    """Descending spectra of C = A + B satisfy gamma_{j+k-1} <= alpha_j + beta_k."""

    def body(rng, t, trial):
        n = int(rng.integers(1, 9))
        a = _hermitian(rng, n)
        b = _hermitian(rng, n)
        al = np.linalg.eigvalsh(a)[::-1]
        be = np.linalg.eigvalsh(b)[::-1]
        ga = np.linalg.eigvalsh(a + b)[::-1]
        for j in range(n):
            for k in range(n - j):
                t.le(ga[j + k], al[j] + be[k], TOL, f"gamma_{j + k + 1}")

    return _run("weyl inequality", trials, seed, body)


def renormalization(trials=500, seed=3):
    """Blockwise eigenvalue renormalization: op-norm cap, distance bound, block shape."""

    def body(rng, t, trial):
        n = int(rng.integers(1, 9))
        r = int(rng.integers(1, n + 1))
        labels = np.sort(rng.integers(0, r, n))
        part = mc.Partition.from_labels(labels, r)
        a = _hermitian(rng, n)
        a = a / mc.op_norm(a)
        c = np.where(labels[:, None] == labels[None, :], a + 0.3 * _hermitian(rng, n), 0)
        c = (c + c.conj().T) / 2
        ct = cl.weyl_renormalize(c, a, part)
        t.le(mc.op_norm(ct), mc.op_norm(a), 1e-8, "op cap")
        t.le(mc.trace_norm(ct - c), mc.trace_norm(c - a), 1e-8, "distance")
        t.le(mc.max_outside(ct, mc.BlockSpec(part)), 0.0, 1e-12, "block shape")

    return _run("renormalization", trials, seed, body)


def commutator_perturbation(trials=500, seed=4):
    def body(rng, t, trial):
        n = int(rng.integers(1, 9))
        a, b = _unit_op(rng, n), _unit_op(rng, n)
        at = a + _ginibre(rng, n, rng.uniform(0, 0.3))
        bt = b + _ginibre(rng, n, rng.uniform(0, 0.3))
        at = at / max(1.0, mc.op_norm(at))
        bt = bt / max(1.0, mc.op_norm(bt))
        bound = cl.commutator_perturbation_bound(a, b, at, bt)
        t.le(mc.trace_norm(mc.commutator(at, bt)), bound, TOL, "perturbation")

    return _run("commutator perturbation", trials, seed, body)


def root_estimate(trials=500, seed=5):
    def body(rng, t, trial):
        n = int(rng.integers(1, 33))
        q = haar_unitary(n, rng)
        a = (q * rng.uniform(0, 1, n)) @ q.conj().T
        b = (q * rng.uniform(0, 1, n)) @ q.conj().T
        # conjugated diagonals commute only up to rounding; measure on the diagonals
        a = (a + a.conj().T) / 2
        b = (b + b.conj().T) / 2
        lhs, rhs = cl.sqrt_distance_check(a, b, tol=1e-8)
        t.le(lhs, rhs, 1e-8, "root estimate")

    return _run("root estimate", trials, seed, body)


def projector_cutoff(trials=500, seed=6):
    def body(rng, t, trial):
        n = int(rng.integers(1, 33))
        if trial % 2:
            q = haar_unitary(n, rng)
            a = (q * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * rng.uniform(0, 1, n) ** 3) @ q.conj().T
            normal = True
        else:
            a = _ginibre(rng, n, rng.uniform(0.01, 1))
            normal = False
        delta = rng.uniform(0.05, 2.0)
        p = cl.projector_cutoff(a, delta)
        eye = np.eye(n)
        t.le(mc.trace_norm(p @ p - p), 0.0, 1e-10, "idempotent")
        t.le(mc.trace_norm(p - p.conj().T), 0.0, 1e-10, "self-adjoint")
        t.le(mc.op_norm(p @ a), delta, TOL, "op cutoff")
        t.le(mc.trace_norm(eye - p), mc.trace_norm(a) / delta, TOL, "trace cutoff")
        co_rank = n - int(round(np.trace(p).real))
        t.le(co_rank, n * mc.trace_norm(a) ** 2 / delta ** 2, TOL, "rank count")
        if normal:
            t.le(mc.trace_norm(a @ p - p @ a), 0.0, 1e-8, "commutes")

    return _run("projector cutoff", trials, seed, body)


def unitarization(trials=500, seed=7):
    """Nearest-isometry bound, then the three bounds for the almost-unitary repair."""

    def body(rng, t, trial):
        n = int(rng.integers(1, 33))
        u = haar_unitary(n, rng)
        mode = trial % 3
        if mode == 0:
            a = u + _ginibre(rng, n, 10 ** rng.uniform(-4, -1))
        elif mode == 1:
            # a few large defects on a low-rank part
            k = min(n, int(rng.integers(1, max(2, n // 4) + 1)))
            d = np.ones(n)
            d[:k] = rng.uniform(0, 2.5, k)
            a = u @ np.diag(d) @ haar_unitary(n, rng)
        else:
            a = _ginibre(rng, n, rng.uniform(0.1, 1.5))
        if mc.op_norm(a) > 3:
            a = a * (3 / mc.op_norm(a))
        res = cl.unitarize_candidates(a)
        eps = res.epsilon
        t.le(mc.unitarity_residual(res.unitary), 0.0, TOL, "unitary output")
        t.le(mc.unitarity_residual(res.constructive), 0.0, TOL, "unitary constructive")
        t.le(res.constructive_distance, 6 * np.sqrt(eps), SLACK, "6 sqrt eps")
        t.le(res.distance, 6 * np.sqrt(eps), SLACK, "6 sqrt eps (returned)")
        if eps <= 1 / 3:
            t.le(res.constructive_distance, 5 * eps ** 0.25, SLACK, "5 eps^(1/4)")
            t.le(res.constructive_distance, (3 + mc.op_norm(a)) * np.sqrt(eps), SLACK, "(3 + op) sqrt eps")
        dev = mc.op_norm(a.conj().T @ a - np.eye(n))
        if dev <= 1 / 3:
            v = cl.unitarize_subspace(a)
            t.le(mc.op_norm(a - v), 2 * dev, TOL, "isometry")

    return _run("unitarization", trials, seed, body)


ALL_SUITES = (
    norm_inequalities,
    weyl_inequality,
    renormalization,
    commutator_perturbation,
    root_estimate,
    projector_cutoff,
    unitarization,
)


def run_all(trials=500, workers=1):
    """Run every suite with its fixed seed; results in a fixed order."""
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda f: f(trials), ALL_SUITES))
    return [f(trials) for f in ALL_SUITES]
