"""Repairing one almost-commuting pair (and one almost-normal matrix).

All four pipelines share a single *stage*: diagonalize the first matrix, round
its spectrum onto a grid (roots of unity or an interval lattice), drop the
partner's entries that couple far-apart eigenvalues, cut a sparse set of weak
links so the partner becomes block diagonal on a coarse partition, make the
first matrix scalar on each coarse block, and repair the partner block by block
(unitarization or norm-preserving eigenvalue renormalization).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .corelemmas import (
    sqrt_distance_check,
    unitarize_candidates,
    weyl_renormalize,
)
from .errors import (
    DimensionMismatch,
    NotHermitian,
    NotPositive,
    NotUnitary,
    OpNormTooLarge,
    TooFewClasses,
)
from .lifting import block_lift
from .matcore import (
    MatrixClass,
    Partition,
    as_matrix,
    commutator,
    hermiticity_residual,
    normality_residual,
    normalized_trace,
    op_norm,
    trace_norm,
    unitarity_residual,
)
from .spectral import hermitian_eig, normal_eig, polar_decompose, sqrt_positive

SHORT_CIRCUIT = 1e-12
UNITARY_FALLBACK_EPS = 6.0 ** (-9 / 7)
HERMITIAN_FALLBACK_EPS = 0.25
CLASS_TOL = 1e-9
CERTIFY_TOL = 1e-7

BOUND_FORMULAS = {
    MatrixClass.UNITARY: "30*eps^(1/9)",
    MatrixClass.HERMITIAN: "12*eps^(1/6)",
    MatrixClass.UNITARY_POSITIVE: "30*eps^(1/9)",
    MatrixClass.NORMAL: "36*eps^(1/18)",
}


def pair_bound(matrix_class, eps):
    matrix_class = MatrixClass(matrix_class)
    eps = max(float(eps), 0.0)
    if matrix_class is MatrixClass.HERMITIAN:
        return 12 * eps ** (1 / 6)
    if matrix_class is MatrixClass.NORMAL:
        return 36 * eps ** (1 / 18)
    return 30 * eps ** (1 / 9)


# ---------------------------------------------------------------------------
# parameters and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrectionParams:
    """Grid and cut parameters of one stage.

    ``regime`` is ``"exact"`` (input already commuting), ``"fallback"`` (large
    commutator; a trivial certified witness), ``"single-block"`` (too few grid
    classes to cut) or ``"grid"`` (full construction).  ``fine_labels`` gives
    the grid class of each eigenvector; only occupied classes are materialized.
    """

    epsilon: float
    regime: str
    t: int = 0
    a: int = 0
    cuts: tuple = ()
    grid: str = ""
    n_fine: int = 0
    delta_grid: float | None = None
    cutoff: float | None = None
    fine_labels: np.ndarray | None = None
    coarse_partition: Partition | None = None

    @property
    def S(self):
        return list(self.cuts)

    @property
    def fine_partition(self):
        """All grid classes, empty ones included (size ``n_fine``)."""
        if self.fine_labels is None:
            return None
        return Partition.from_labels(self.fine_labels, self.n_fine)

    def to_json(self):
        return {
            "epsilon": self.epsilon,
            "regime": self.regime,
            "t": self.t,
            "a": self.a,
            "cuts": [int(s) for s in self.cuts],
            "grid": self.grid,
            "n_fine": self.n_fine,
            "delta_grid": self.delta_grid,
            "cutoff": self.cutoff,
            "coarse_sizes": None if self.coarse_partition is None else self.coarse_partition.sizes,
        }


@dataclass(eq=False)
class CorrectionReport:
    corrected: list
    conjugator: np.ndarray
    distances: list
    residual_commutators: list
    certified_bound: float
    bound_formula: str
    params: CorrectionParams
    matrix_class: MatrixClass
    epsilon: float
    side_commutators: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def certified(self):
        return all(d <= self.certified_bound + CERTIFY_TOL for d in self.distances)

    def to_json(self):
        return {
            "class": self.matrix_class.value,
            "epsilon": self.epsilon,
            "distances": [float(d) for d in self.distances],
            "residual_commutators": [float(x) for x in self.residual_commutators],
            "side_commutators": [float(x) for x in self.side_commutators],
            "certified_bound": float(self.certified_bound),
            "bound_formula": self.bound_formula,
            "certified": bool(self.certified),
            "params": self.params.to_json(),
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# ---------------------------------------------------------------------------
# grids, cut sets, coarse classes
# ---------------------------------------------------------------------------

def circle_labels(vals, t):
    """Arc class of each eigenvalue: ``j`` with ``arg`` in ``((j-1/2) 2pi/t, (j+1/2) 2pi/t]``."""
    x = np.mod(np.angle(vals), 2 * np.pi) * t / (2 * np.pi)
    return (np.ceil(x - 0.5).astype(np.int64)) % t


def interval_labels(vals, t, lo):
    """Offset interval class: ``j - lo`` with ``alpha`` in ``((2j-1)/2t, (2j+1)/2t]``."""
    j = np.ceil(np.real(vals) * t - 0.5).astype(np.int64)
    return np.clip(j, lo, t) - lo


def _window_min(occ, occ_sizes, lo, hi):
    """Index in ``[lo, hi]`` with the fewest members; ties to the smallest index."""
    i0 = np.searchsorted(occ, lo, side="left")
    i1 = np.searchsorted(occ, hi, side="right")
    inside = occ[i0:i1]
    if inside.size < hi - lo + 1:
        gaps = np.flatnonzero(inside != lo + np.arange(inside.size))
        return int(lo + (gaps[0] if gaps.size else inside.size))
    return int(inside[np.argmin(occ_sizes[i0:i1])])


def _cuts_sparse(occ, occ_sizes, nclasses, a, cyclic):
    occ = np.asarray(occ, dtype=np.int64)
    occ_sizes = np.asarray(occ_sizes, dtype=np.int64)
    if cyclic:
        if nclasses < 4 * a:
            raise TooFewClasses(f"{nclasses} classes < 4a = {4 * a}")
        s = _window_min(occ, occ_sizes, 0, a - 1)
        first = s
        cuts = [s]
        while first + nclasses - s > 3 * a:
            s = _window_min(occ, occ_sizes, s + a, s + 2 * a - 1)
            cuts.append(s)
        return cuts
    if nclasses < 2 * a:
        raise TooFewClasses(f"{nclasses} classes < 2a = {2 * a}")
    s = _window_min(occ, occ_sizes, a, 2 * a - 1)
    cuts = [s]
    while nclasses - s > 2 * a:
        s = _window_min(occ, occ_sizes, s + a, s + 2 * a - 1)
        cuts.append(s)
    return cuts


def select_cut_set(class_sizes, a, cyclic):
    """Greedy cut indices over consecutive windows of ``a`` classes.

    Each pick is the smallest class in its window, so it holds at most ``n/a``
    members.  Cyclic (needs ``4a`` classes): at least two cuts, gaps in
    ``[a, 2a-1]`` and a wrap gap in ``[a, 3a]``.
    Linear: gaps in ``[a, 2a-1]``, first cut in ``[a, 2a-1]``, and the tail after
    the last cut at most ``2a`` classes.
    """
    sizes = np.asarray(class_sizes, dtype=np.int64)
    if a < 1:
        raise ValueError("a must be a positive integer")
    occ = np.flatnonzero(sizes)
    return _cuts_sparse(occ, sizes[occ], sizes.size, int(a), bool(cyclic))


def _coarse_labels(fine, cuts, cyclic):
    cuts = np.asarray(cuts, dtype=np.int64)
    r = np.searchsorted(cuts, fine, side="right")
    if cyclic:
        r = (r - 1) % cuts.size
    return r.astype(np.int64)


def _circle_values(vals, fine, coarse, cuts, t):
    out = np.empty(fine.size, dtype=np.complex128)
    for r in np.unique(coarse):
        members = coarse == r
        start = cuts[r]
        pos = (fine[members] - start) % t
        expo = start + (pos.min() + pos.max()) / 2
        out[members] = np.exp(2j * np.pi * expo / t)
    return out


def _interval_values(fine, coarse, t, lo):
    out = np.empty(fine.size, dtype=np.complex128)
    for r in np.unique(coarse):
        members = coarse == r
        j = fine[members] + lo
        out[members] = (j.min() + j.max()) / (2 * t)
    return out


def _nearest_root_of_mean(vals, t):
    m = np.mean(vals)
    if abs(m) < 1e-12:
        return 1.0 + 0j
    j = int(np.round(np.mod(np.angle(m), 2 * np.pi) * t / (2 * np.pi))) % t
    return np.exp(2j * np.pi * j / t)


# ---------------------------------------------------------------------------
# the shared stage
# ---------------------------------------------------------------------------

def grid_parameters(kind, eps):
    """``(t, a)`` inside the admissible windows, smallest admissible integers."""
    if kind == "hermitian":
        top = eps ** (-5 / 6)
        t = min(math.ceil(top / 2), max(1, math.floor(top)))
    else:
        t = math.ceil(eps ** (-7 / 9))
    a = math.ceil(eps ** (-2 / 3))
    return int(t), int(a)


@dataclass(eq=False)
class StageResult:
    scalars: np.ndarray
    coarse_labels: np.ndarray
    coarse: Partition
    params: CorrectionParams
    thresholded: list
    cut: list
    corrected: list
    lift_bound: float | None
    diagnostics: dict


def run_stage(vals, partners, eps, kind, workers=1):
    """Stage on a diagonalized first matrix.

    ``vals`` are the first matrix's eigenvalues, ``partners`` the other matrices
    expressed in its eigenbasis.  ``kind``: ``"unitary"`` (circle grid, partners
    unitary), ``"hermitian"`` (interval grid on [-1, 1], partners Hermitian with
    op_norm <= 1), ``"positive"`` (interval grid on [0, 1], partners unitary).
    """
    vals = np.asarray(vals)
    n = vals.size
    t, a = grid_parameters(kind, eps)
    cyclic = kind == "unitary"
    if cyclic:
        fine = circle_labels(vals, t)
        n_fine = t
        delta = abs(1 - np.exp(2j * np.pi / t))
        cutoff = delta
        lo = 0
    else:
        lo = -t if kind == "hermitian" else 0
        fine = interval_labels(vals, t, lo)
        n_fine = t - lo + 1
        delta = None
        cutoff = 1.0 / t

    occ, occ_sizes = np.unique(fine, return_counts=True)
    try:
        cuts = _cuts_sparse(occ, occ_sizes, n_fine, a, cyclic)
    except TooFewClasses:
        cuts = []

    if cuts:
        coarse_lab = _coarse_labels(fine, cuts, cyclic)
    else:
        coarse_lab = np.zeros(n, dtype=np.int64)
    # renumber so that only occupied coarse classes remain
    used, coarse_lab = np.unique(coarse_lab, return_inverse=True)
    coarse_lab = coarse_lab.astype(np.int64)
    coarse = Partition.from_labels(coarse_lab, used.size)

    if cyclic:
        if cuts:
            starts = np.asarray(cuts)[used]
            scalars = _circle_values(vals, fine, coarse_lab, starts, t)
        else:
            scalars = np.full(n, _nearest_root_of_mean(vals, t))
    else:
        scalars = _interval_values(fine, coarse_lab, t, lo)

    regime = "grid" if cuts else "single-block"
    params = CorrectionParams(
        epsilon=float(eps),
        regime=regime,
        t=t,
        a=a,
        cuts=tuple(int(s) for s in cuts),
        grid="circle" if cyclic else "interval",
        n_fine=int(n_fine),
        delta_grid=None if delta is None else float(delta),
        cutoff=float(cutoff),
        fine_labels=fine,
        coarse_partition=coarse,
    )

    same = coarse_lab[:, None] == coarse_lab[None, :]
    thresholded = [
        _kernels.gap_threshold(p, vals, cutoff, fine, n_fine, cyclic) for p in partners
    ]
    cut = [np.where(same, p, 0.0) for p in thresholded]

    if kind == "hermitian":
        corrected = [weyl_renormalize(b, p, coarse) for b, p in zip(cut, partners)]
        lift_bound = None
    else:
        lift = block_lift(
            lambda blocks: [unitarize_candidates(b).unitary for b in blocks],
            cut,
            coarse,
            residual=lambda blocks: max(
                trace_norm(b.conj().T @ b - np.eye(b.shape[0])) for b in blocks
            ),
            bound=lambda x: 6 * math.sqrt(x),
            workers=workers,
        )
        corrected = lift.matrices
        lift_bound = lift.bound

    diag = _stage_diagnostics(vals, scalars, partners, thresholded, cut, corrected, params, kind)
    diag["lifted_unitarization_bound"] = lift_bound
    return StageResult(scalars, coarse_lab, coarse, params, thresholded, cut, corrected, lift_bound, diag)


def _stage_diagnostics(vals, scalars, partners, thresholded, cut, corrected, params, kind):
    """Measured intermediate distances next to the estimates they should obey."""
    t, a = params.t, params.a
    d1 = np.diag(vals)
    out = {"n_coarse": params.coarse_partition.r, "n_cuts": len(params.cuts)}
    if kind == "unitary":
        grid_pts = np.exp(2j * np.pi * params.fine_labels / t)
        out["rounding_distance"] = trace_norm(np.diag(vals - grid_pts))
        out["rounding_bound"] = params.delta_grid
        out["block_value_distance"] = trace_norm(np.diag(grid_pts - scalars))
        out["block_value_bound"] = 1.5 * a * params.delta_grid if params.cuts else None
    else:
        lo = -t if kind == "hermitian" else 0
        grid_pts = (params.fine_labels + lo) / t
        out["rounding_distance"] = trace_norm(np.diag(np.real(vals) - grid_pts))
        out["rounding_bound"] = 1 / t
        out["block_value_distance"] = trace_norm(np.diag(grid_pts - scalars))
        out["block_value_bound"] = a / t
    rows = []
    for p, th, b, c in zip(partners, thresholded, cut, corrected):
        eps_p = trace_norm(commutator(d1, p))
        row = {
            "partner_commutator": eps_p,
            "thresholded_commutator": trace_norm(commutator(d1, th)),
            "threshold_distance": trace_norm(th - p),
            "threshold_bound": eps_p / params.cutoff,
            "cut_distance": trace_norm(th - b),
            "cut_bound": (2 * t if kind == "unitary" else 2 * params.n_fine) / a ** 1.5,
            "cut_op_norm": op_norm(b),
            "repair_distance": trace_norm(c - b),
        }
        if kind != "hermitian":
            row["gram_defect"] = trace_norm(b.conj().T @ b - np.eye(b.shape[0]))
            row["gamma"] = row["threshold_distance"] + row["cut_distance"]
        rows.append(row)
    out["partners"] = rows
    return out


# ---------------------------------------------------------------------------
# helpers shared by the pair pipelines
# ---------------------------------------------------------------------------

def _diagonal_values(m, tol=1e-12):
    if np.max(np.abs(m - np.diag(np.diag(m))), initial=0.0) <= tol:
        return np.diag(m).copy()
    return None


def _diagonalize(m, hermitian):
    vals = _diagonal_values(m)
    n = m.shape[0]
    if vals is not None:
        if hermitian:
            vals = vals.real.astype(np.complex128)
        return vals, np.eye(n, dtype=np.complex128)
    form = hermitian_eig(m) if hermitian else normal_eig(m)
    return np.asarray(form.eigenvalues, dtype=np.complex128), form.basis


def _to_basis(v, m):
    return v.conj().T @ m @ v


def _from_basis(v, m):
    return v @ m @ v.conj().T


def _scalar_unit(m):
    c = normalized_trace(m)
    return c / abs(c) if abs(c) > 1e-12 else 1.0 + 0j


def _check_same(*ms):
    for m in ms[1:]:
        if m.shape != ms[0].shape:
            raise DimensionMismatch(f"{ms[0].shape} vs {m.shape}")


def _check_unitary(m, name, tol=CLASS_TOL):
    r = unitarity_residual(m)
    if r > tol:
        raise NotUnitary(f"{name}: op_norm(A*A - 1) = {r:.3e}")


def _check_hermitian(m, name, tol=CLASS_TOL):
    r = hermiticity_residual(m)
    if r > tol:
        raise NotHermitian(f"{name}: ||A - A*||_tr = {r:.3e}")


def _check_op(m, name, cap=1.0, tol=CLASS_TOL):
    r = op_norm(m)
    if r > cap + tol:
        raise OpNormTooLarge(f"{name}: op_norm = {r:.12g} > {cap}")


def _finish(matrix_class, originals, corrected, conjugator, params, eps, side, diagnostics):
    bound = pair_bound(matrix_class, eps)
    dists = [trace_norm(o - c) for o, c in zip(originals, corrected)]
    res = []
    for i in range(len(corrected)):
        for j in range(i + 1, len(corrected)):
            res.append(trace_norm(commutator(corrected[i], corrected[j])))
    return CorrectionReport(
        corrected=list(corrected),
        conjugator=conjugator,
        distances=dists,
        residual_commutators=res,
        certified_bound=bound,
        bound_formula=BOUND_FORMULAS[MatrixClass(matrix_class)],
        params=params,
        matrix_class=MatrixClass(matrix_class),
        epsilon=float(eps),
        side_commutators=side,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# unitary / unitary
# ---------------------------------------------------------------------------

def correct_unitary_pair(u1, u2, workers=1):
    """Commuting unitaries ``A1, A2`` near ``U1, U2`` with ``[A1, U1] = 0``.

    Both distances are at most ``30 * trace_norm([U1, U2]) ** (1/9)``.
    """
    u1 = as_matrix(u1)
    u2 = as_matrix(u2)
    _check_same(u1, u2)
    _check_unitary(u1, "U1")
    _check_unitary(u2, "U2")
    n = u1.shape[0]
    eps = trace_norm(commutator(u1, u2))

    def side(a1):
        return [trace_norm(commutator(a1, u1))]

    if eps <= SHORT_CIRCUIT * n:
        params = CorrectionParams(epsilon=eps, regime="exact")
        return _finish(MatrixClass.UNITARY, [u1, u2], [u1.copy(), u2.copy()],
                       np.eye(n, dtype=np.complex128), params, eps, side(u1), {})

    def fallback(reason):
        a1 = _scalar_unit(u1) * np.eye(n, dtype=np.complex128)
        params = CorrectionParams(epsilon=eps, regime="fallback")
        return _finish(MatrixClass.UNITARY, [u1, u2], [a1, u2.copy()],
                       np.eye(n, dtype=np.complex128), params, eps, side(a1), {"fallback": reason})

    if eps > UNITARY_FALLBACK_EPS:
        return fallback("epsilon above 6^(-9/7)")

    vals, v = _diagonalize(u1, hermitian=False)
    stage = run_stage(vals, [_to_basis(v, u2)], eps, "unitary", workers)
    a1 = _from_basis(v, np.diag(stage.scalars))
    a2 = _from_basis(v, stage.corrected[0])
    report = _finish(MatrixClass.UNITARY, [u1, u2], [a1, a2], v, stage.params, eps,
                     side(a1), stage.diagnostics)
    if not report.certified:
        return fallback("construction exceeded the bound")
    return report


# ---------------------------------------------------------------------------
# Hermitian / Hermitian
# ---------------------------------------------------------------------------

def correct_hermitian_pair(h1, h2, workers=1):
    """Commuting Hermitian ``A1, A2`` (op_norm <= 1) near ``H1, H2`` with ``[A1, H1] = 0``.

    Both distances are at most ``12 * trace_norm([H1, H2]) ** (1/6)``.
    """
    h1 = as_matrix(h1)
    h2 = as_matrix(h2)
    _check_same(h1, h2)
    for m, name in ((h1, "H1"), (h2, "H2")):
        _check_hermitian(m, name)
        _check_op(m, name)
    h1 = (h1 + h1.conj().T) / 2
    h2 = (h2 + h2.conj().T) / 2
    n = h1.shape[0]
    eps = trace_norm(commutator(h1, h2))

    def side(a1):
        return [trace_norm(commutator(a1, h1))]

    if eps <= SHORT_CIRCUIT * n:
        params = CorrectionParams(epsilon=eps, regime="exact")
        return _finish(MatrixClass.HERMITIAN, [h1, h2], [h1.copy(), h2.copy()],
                       np.eye(n, dtype=np.complex128), params, eps, side(h1), {})

    def fallback(reason):
        a1 = normalized_trace(h1).real * np.eye(n, dtype=np.complex128)
        params = CorrectionParams(epsilon=eps, regime="fallback")
        return _finish(MatrixClass.HERMITIAN, [h1, h2], [a1, h2.copy()],
                       np.eye(n, dtype=np.complex128), params, eps, side(a1), {"fallback": reason})

    if eps > HERMITIAN_FALLBACK_EPS:
        return fallback("epsilon above 1/4")

    vals, v = _diagonalize(h1, hermitian=True)
    stage = run_stage(vals, [_to_basis(v, h2)], eps, "hermitian", workers)
    a1 = _from_basis(v, np.diag(stage.scalars))
    a2 = _from_basis(v, stage.corrected[0])
    a1 = (a1 + a1.conj().T) / 2
    a2 = (a2 + a2.conj().T) / 2
    report = _finish(MatrixClass.HERMITIAN, [h1, h2], [a1, a2], v, stage.params, eps,
                     side(a1), stage.diagnostics)
    if not report.certified:
        return fallback("construction exceeded the bound")
    return report


# ---------------------------------------------------------------------------
# unitary / positive pairs, and single almost-normal matrices
# ---------------------------------------------------------------------------

def correct_unitary_positive(u, h, workers=1, tol=CLASS_TOL):
    """Unitary ``V`` and positive ``A`` (op_norm <= 1) with ``[V, A] = [H, A] = 0``.

    Both distances are at most ``30 * trace_norm([U, H]) ** (1/9)``.
    """
    u = as_matrix(u)
    h = as_matrix(h)
    _check_same(u, h)
    _check_unitary(u, "U", tol)
    _check_hermitian(h, "H", tol)
    _check_op(h, "H", tol=tol)
    h = (h + h.conj().T) / 2
    if np.linalg.eigvalsh(h)[0] < -tol:
        raise NotPositive("H is not positive")
    n = u.shape[0]
    eps = trace_norm(commutator(u, h))

    def side(a):
        return [trace_norm(commutator(h, a))]

    if eps <= SHORT_CIRCUIT * n:
        params = CorrectionParams(epsilon=eps, regime="exact")
        return _finish(MatrixClass.UNITARY_POSITIVE, [u, h], [u.copy(), h.copy()],
                       np.eye(n, dtype=np.complex128), params, eps, side(h), {})

    def fallback(reason):
        a = max(normalized_trace(h).real, 0.0) * np.eye(n, dtype=np.complex128)
        params = CorrectionParams(epsilon=eps, regime="fallback")
        return _finish(MatrixClass.UNITARY_POSITIVE, [u, h], [u.copy(), a],
                       np.eye(n, dtype=np.complex128), params, eps, side(a), {"fallback": reason})

    if eps > UNITARY_FALLBACK_EPS:
        return fallback("epsilon above 6^(-9/7)")

    vals, v = _diagonalize(h, hermitian=True)
    vals = np.clip(vals.real, 0.0, None).astype(np.complex128)
    stage = run_stage(vals, [_to_basis(v, u)], eps, "positive", workers)
    a = _from_basis(v, np.diag(stage.scalars))
    a = (a + a.conj().T) / 2
    vv = _from_basis(v, stage.corrected[0])
    report = _finish(MatrixClass.UNITARY_POSITIVE, [u, h], [vv, a], v, stage.params, eps,
                     side(a), stage.diagnostics)
    if not report.certified:
        return fallback("construction exceeded the bound")
    return report


def correct_normal(m, workers=1):
    """Normal ``N`` with op_norm <= 1 near ``M``; distance at most
    ``36 * trace_norm(M M* - M* M) ** (1/18)``."""
    m = as_matrix(m)
    _check_op(m, "M")
    n = m.shape[0]
    eps = normality_residual(m)

    def finish(nn, conj, params, diagnostics):
        report = _finish(MatrixClass.NORMAL, [m], [nn], conj, params, eps, [], diagnostics)
        report.residual_commutators = [normality_residual(nn)]
        return report

    if eps <= SHORT_CIRCUIT * n:
        return finish(m.copy(), np.eye(n, dtype=np.complex128),
                      CorrectionParams(epsilon=eps, regime="exact"), {})

    polar = polar_decompose(m)
    u, h = polar.unitary_factor, polar.positive_factor
    h2 = h @ h
    h2 = (h2 + h2.conj().T) / 2
    sub = correct_unitary_positive(u, h2, workers=workers, tol=1e-8)
    v, a = sub.corrected
    root = sqrt_positive(a)
    nn = v @ root
    diagnostics = {
        "unitary_positive_epsilon": sub.epsilon,
        "unitary_positive_distances": sub.distances,
        "unitary_positive_regime": sub.params.regime,
    }
    try:
        diagnostics["root_estimate"] = list(sqrt_distance_check(h, root, tol=1e-8))
    except ValueError as exc:
        diagnostics["root_estimate_error"] = str(exc)
    report = finish(nn, sub.conjugator, sub.params, diagnostics)
    if not report.certified:
        c = math.sqrt(max(normalized_trace(h2).real, 0.0))
        return finish(c * u, np.eye(n, dtype=np.complex128),
                      CorrectionParams(epsilon=eps, regime="fallback"),
                      {"fallback": "construction exceeded the bound"})
    return report
