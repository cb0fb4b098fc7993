"""Instance generators, from-scratch verification of corrections, and a small-n
brute-force oracle for the nearest commuting pair."""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatch, ReprojectionFailed
from .familycorrect import eval_bound
from .matcore import (
    MatrixClass,
    as_matrix,
    commutator,
    hermiticity_residual,
    normality_residual,
    op_norm,
    trace_norm,
    unitarity_residual,
)
from .paircorrect import CERTIFY_TOL, pair_bound
from .spectral import polar_decompose


def make_rng(seed):
    """PCG64 stream for a 64-bit seed; ``rng.spawn`` gives independent children."""
    return np.random.default_rng(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def haar_unitary(n, rng):
    """Haar-distributed unitary: QR of a complex Ginibre matrix with phase fix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def shift_matrix(n):
    """``P[j, k] = 1`` iff ``j = k + 1 (mod n)``."""
    return np.roll(np.eye(n, dtype=np.complex128), 1, axis=0)


def voiculescu_pair(n):
    """``diag(w, w^2, ..., w^n = 1)`` with ``w = exp(2 pi i / n)``, and the cyclic shift."""
    if n < 2:
        raise ValueError("n must be at least 2")
    w = np.exp(2j * np.pi * np.arange(1, n + 1) / n)
    w[-1] = 1.0
    return np.diag(w), shift_matrix(n)


def hermitian_voiculescu(n):
    """Real parts of the Voiculescu pair: ``diag(cos(2 pi j / n))`` and ``(P + P*) / 2``."""
    u1, u2 = voiculescu_pair(n)
    return np.diag(u1.diagonal().real).astype(np.complex128), (u2 + u2.T) / 2


def block_witness_pair(m, d):
    """Exactly commuting pair of size ``m d``: ``diag(v 1_d, ..., v^m 1_d)`` with
    ``v = exp(2 pi i / m)``, and ``m`` copies of the ``d``-shift."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be positive")
    v = np.exp(2j * np.pi * np.arange(1, m + 1) / m)
    a1 = np.diag(np.repeat(v, d))
    a2 = np.kron(np.eye(m), shift_matrix(d))
    return a1, a2.astype(np.complex128)


# ---------------------------------------------------------------------------
# perturbed commuting families
# ---------------------------------------------------------------------------

def _reproject(m, kind):
    if kind == "unitary":
        return polar_decompose(m).unitary_factor
    h = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(h)
    lo = -1.0 if kind == "hermitian" else 0.0
    return (v * np.clip(w, lo, 1.0)) @ v.conj().T


def _measure(mats, matrix_class):
    if matrix_class is MatrixClass.NORMAL:
        return normality_residual(mats[0])
    worst = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            worst = max(worst, trace_norm(commutator(mats[i], mats[j])))
    return worst


def perturbed_commuting(matrix_class, n, target_eps, seed, k=2):
    """Commuting family in a random basis, perturbed to a measured ``eps`` within 20%
    of ``target_eps`` and re-projected onto the class.

    Unitary-positive families are ``[U, H]``; normal "families" are one matrix
    whose normality defect plays the role of ``eps``.  Returns ``(matrices, eps)``.
    """
    matrix_class = MatrixClass(matrix_class)
    if not 0 <= target_eps <= 2:
        raise ValueError("target_eps must lie in [0, 2]")
    rng = make_rng(seed)
    q = haar_unitary(n, rng)

    if matrix_class is MatrixClass.UNITARY:
        kinds = ["unitary"] * k
    elif matrix_class is MatrixClass.HERMITIAN:
        kinds = ["hermitian"] * k
    elif matrix_class is MatrixClass.UNITARY_POSITIVE:
        kinds = ["unitary", "positive"]
    else:
        kinds = ["normal"]

    base = []
    for kind in kinds:
        if kind == "unitary":
            d = np.exp(2j * np.pi * rng.random(n))
        elif kind == "hermitian":
            d = rng.uniform(-1, 1, n)
        elif kind == "positive":
            d = rng.uniform(0, 1, n)
        else:
            d = np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.random(n))
        base.append((q * d) @ q.conj().T)
    noise = []
    for _ in kinds:
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        noise.append(g / np.linalg.norm(g) * np.sqrt(n))  # trace_norm(g) = 1

    def build(scale):
        out = []
        for b, g, kind in zip(base, noise, kinds):
            m = b + scale * g
            if kind == "normal":
                m = m / max(1.0, op_norm(m))
            else:
                m = _reproject(m, kind)
            out.append(m)
        return out

    exact = build(0.0)
    if target_eps == 0:
        return exact, _measure(exact, matrix_class)

    lo, hi = -16.0, 1.0
    best = None
    for _ in range(100):
        mid = (lo + hi) / 2
        mats = build(10.0 ** mid)
        eps = _measure(mats, matrix_class)
        if abs(eps - target_eps) <= 0.2 * target_eps:
            best = (mats, eps)
            break
        if eps < target_eps:
            lo = mid
        else:
            hi = mid
    if best is None:
        raise ReprojectionFailed(f"could not reach eps = {target_eps:g} (class {matrix_class.value}, n = {n})")
    return best


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool

    def to_json(self):
        return {"name": self.name, "value": float(self.value),
                "threshold": float(self.threshold), "passed": bool(self.passed)}


@dataclass
class Verdict:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, value, threshold):
        value = float(value)
        self.checks.append(Check(name, value, float(threshold), bool(value <= threshold)))

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_json(self):
        return {"passed": self.passed, "checks": [c.to_json() for c in self.checks]}


def _min_eig(m):
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


def verify_report(report, originals, tol_structural=1e-9, tol_certify=CERTIFY_TOL):
    """Recompute every postcondition of a correction from its outputs and inputs.

    Commutator thresholds scale with ``n``; class residuals do not.
    """
    originals = [as_matrix(m) for m in originals]
    outputs = [as_matrix(m) for m in report.corrected]
    verdict = Verdict()
    n = originals[0].shape[0]
    if len(outputs) != len(originals) or any(m.shape != (n, n) for m in originals + outputs):
        raise DimensionMismatch("report and originals disagree in count or size")
    cls = report.matrix_class
    k = len(originals)
    comm_tol = tol_structural * n
    op_cap = 1 + 1e-8

    if cls is MatrixClass.NORMAL:
        m, nn = originals[0], outputs[0]
        eps = normality_residual(m)
        verdict.add("normality_residual", normality_residual(nn), comm_tol)
        verdict.add("op_norm", op_norm(nn), op_cap)
        bound = pair_bound(cls, eps)
        verdict.add("distance_1", trace_norm(m - nn), bound + tol_certify)
        return verdict

    for i, a in enumerate(outputs):
        role_unitary = cls is MatrixClass.UNITARY or (cls is MatrixClass.UNITARY_POSITIVE and i == 0)
        if role_unitary:
            verdict.add(f"unitarity_{i + 1}", unitarity_residual(a), tol_structural)
        else:
            verdict.add(f"hermiticity_{i + 1}", hermiticity_residual(a), tol_structural)
            verdict.add(f"op_norm_{i + 1}", op_norm(a), op_cap)
            if cls is MatrixClass.UNITARY_POSITIVE:
                verdict.add(f"negativity_{i + 1}", -_min_eig(a), tol_structural)
    for i in range(k):
        for j in range(i + 1, k):
            verdict.add(f"commutator_{i + 1}{j + 1}",
                        trace_norm(commutator(outputs[i], outputs[j])), comm_tol)
    if cls is MatrixClass.UNITARY_POSITIVE:
        verdict.add("side_commutator", trace_norm(commutator(originals[1], outputs[1])), comm_tol)
    elif k == 2:
        verdict.add("side_commutator", trace_norm(commutator(outputs[0], originals[0])), comm_tol)

    eps = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            eps = max(eps, trace_norm(commutator(originals[i], originals[j])))
    bound = pair_bound(cls, eps) if k == 2 else eval_bound(eps, k, cls)
    for i in range(k):
        verdict.add(f"distance_{i + 1}", trace_norm(originals[i] - outputs[i]), bound + tol_certify)
    return verdict


# ---------------------------------------------------------------------------
# brute-force oracle (n <= 3)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OracleResult:
    """Best commuting pair found by local search: an upper bound on the optimum."""

    x: np.ndarray
    y: np.ndarray
    distance: float
    start: int
    is_upper_bound: bool = True


def _cayley(params, n):
    # diagonal phases of the basis do not change the objective, so K has zero diagonal
    k = np.zeros((n, n), dtype=np.complex128)
    iu = np.triu_indices(n, 1)
    m = iu[0].size
    k[iu] = params[:m] + 1j * params[m:]
    k = k - k.conj().T
    eye = np.eye(n)
    return np.linalg.solve(eye + k, eye - k)


def _project_diag(z, role):
    if role == "unitary":
        mag = np.abs(z)
        return np.where(mag > 1e-15, z / np.where(mag > 0, mag, 1), 1.0)
    if role == "hermitian":
        return np.clip(z.real, -1.0, 1.0).astype(np.complex128)
    return np.clip(z.real, 0.0, 1.0).astype(np.complex128)


def _distance_in_basis(w, a, role):
    b = w.conj().T @ a @ w
    z = np.diag(b)
    d = _project_diag(z, role)
    sq = np.sum(np.abs(b) ** 2) - np.sum(np.abs(z) ** 2) + np.sum(np.abs(z - d) ** 2)
    return np.sqrt(max(sq, 0.0) / a.shape[0]), d


def _best_in_basis(w, a, role):
    d = _project_diag(np.einsum("ij,ij->j", w.conj(), a @ w), role)
    x = (w * d) @ w.conj().T
    return x, trace_norm(a - x)


def _start_bases(a, b, rng, starts):
    n = a.shape[0]
    bases = []
    for m in (a, b, a + b, a + 1j * b):
        for h in ((m + m.conj().T) / 2, (m - m.conj().T) / 2j):
            bases.append(np.linalg.eigh(h)[1])
    while len(bases) < starts:
        bases.append(haar_unitary(n, rng))
    return bases[:starts]


def brute_force_nearest_commuting(a, b, matrix_class, starts=64, seed=0, tol=1e-8):
    """Minimize ``max(trace_norm(A - X), trace_norm(B - Y))`` over commuting pairs.

    A shared eigenbasis ``W0 * cayley(K)`` is searched by SLSQP on the epigraph
    form from ``starts`` seeded starting bases; for a fixed basis the best spectra are the
    class projections of the diagonals.  Only ``n <= 3`` is supported.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    n = a.shape[0]
    if n > 3:
        raise ValueError("brute force is limited to n <= 3")
    if b.shape != a.shape:
        raise DimensionMismatch("A and B differ in size")
    matrix_class = MatrixClass(matrix_class)
    roles = {
        MatrixClass.UNITARY: ("unitary", "unitary"),
        MatrixClass.HERMITIAN: ("hermitian", "hermitian"),
        MatrixClass.UNITARY_POSITIVE: ("unitary", "positive"),
    }
    if matrix_class not in roles:
        raise ValueError(f"no oracle for class {matrix_class.value}")
    ra, rb = roles[matrix_class]
    rng = make_rng(seed)
    npar = n * (n - 1)

    best = None
    for s, w0 in enumerate(_start_bases(a, b, rng, starts)):
        def sq(p, w0=w0):
            w = w0 @ _cayley(p, n)
            return np.array([_distance_in_basis(w, a, ra)[0] ** 2,
                             _distance_in_basis(w, b, rb)[0] ** 2])

        if npar:
            # epigraph form: minimize s subject to s >= each squared distance
            x0 = np.append(np.zeros(npar), sq(np.zeros(npar)).max())
            res = minimize(lambda z: z[-1], x0, method="SLSQP",
                           constraints=[{"type": "ineq", "fun": lambda z: z[-1] - sq(z[:-1])}],
                           options={"ftol": tol, "maxiter": 500})
            w = w0 @ _cayley(res.x[:-1], n)
        else:
            w = w0
        x, dx = _best_in_basis(w, a, ra)
        y, dy = _best_in_basis(w, b, rb)
        val = max(dx, dy)
        if best is None or val < best.distance:
            best = OracleResult(x, y, val, s)
    return best
