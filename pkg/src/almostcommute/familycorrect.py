"""Repairing a family of k pairwise almost-commuting matrices.

Stage r makes matrix r scalar on every block of a partition while every later
matrix stays block diagonal on it; each stage runs the pair construction
independently inside the blocks left by the previous one.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .corelemmas import unitarize_candidates
from .lifting import LiftResult, aggregate, block_lift
from .matcore import (
    MatrixClass,
    Partition,
    as_matrix,
    commutator,
    normalized_trace,
    trace_norm,
)
from .paircorrect import (
    CERTIFY_TOL,
    HERMITIAN_FALLBACK_EPS,
    SHORT_CIRCUIT,
    UNITARY_FALLBACK_EPS,
    CorrectionParams,
    CorrectionReport,
    _check_hermitian,
    _check_op,
    _check_same,
    _check_unitary,
    _diagonalize,
    _scalar_unit,
    correct_hermitian_pair,
    correct_unitary_pair,
    run_stage,
)
from .spectral import _clusters

__all__ = [
    "BoundRecursion",
    "LiftResult",
    "aggregate",
    "block_lift",
    "correct_family",
    "eval_bound",
]

PSI = {
    MatrixClass.UNITARY: (30.0, 1 / 9),
    MatrixClass.HERMITIAN: (12.0, 1 / 6),
}


@dataclass(frozen=True)
class BoundRecursion:
    """``psi(x) = C x**p``; ``phi_0(x) = x``, ``phi_{j+1}(x) = 4 psi(phi_j(x)) + x``."""

    constant: float
    exponent: float

    @classmethod
    def for_class(cls, matrix_class):
        matrix_class = MatrixClass(matrix_class)
        if matrix_class not in PSI:
            raise ValueError(f"no family bound for class {matrix_class.value}")
        return cls(*PSI[matrix_class])

    def psi(self, x):
        return self.constant * max(float(x), 0.0) ** self.exponent

    def phi(self, j, x):
        v = float(x)
        for _ in range(j):
            v = 4 * self.psi(v) + x
        return v

    def phi_table(self, k):
        return [lambda x, j=j: self.phi(j, x) for j in range(k)]

    def delta(self, eps, k):
        return self.psi(self.phi(k - 1, eps))


def eval_bound(epsilon, k, matrix_class):
    """``psi(phi_{k-1}(epsilon))`` for the class's ``psi``."""
    if k < 2:
        raise ValueError("k must be at least 2")
    return BoundRecursion.for_class(matrix_class).delta(epsilon, k)


def _max_pairwise(mats):
    worst = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            worst = max(worst, trace_norm(commutator(mats[i], mats[j])))
    return worst


# ---------------------------------------------------------------------------
# one block of one stage
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _BlockOutcome:
    basis: np.ndarray      # local eigenbasis W of the first matrix
    scalars: np.ndarray    # first matrix in W basis, constant on each label
    labels: np.ndarray     # local sub-partition
    partners: list         # later matrices in W basis, block diagonal on labels
    epsilon: float
    regime: str
    params: dict = field(default_factory=dict)


def _repair_partner(b, hermitian):
    if hermitian:
        return (b + b.conj().T) / 2
    return unitarize_candidates(b).unitary


def _freeze(first, partners, eps, hermitian):
    """Near-exact block: cluster equal eigenvalues and pinch the partners onto them."""
    vals, w = _diagonalize(first, hermitian)
    d = vals.size
    tol = max(math.sqrt(eps), 1e-9)
    if hermitian:
        order = np.argsort(vals.real, kind="stable")
        groups = _clusters(vals.real[order], tol)
    else:
        args = np.mod(np.angle(vals), 2 * np.pi)
        order = np.argsort(args, kind="stable")
        groups = _clusters(args[order], tol)
    labels = np.empty(d, dtype=np.int64)
    for g, idx in enumerate(groups):
        labels[order[idx]] = g
    if not hermitian and len(groups) > 1:
        first_arg, last_arg = args[order[0]], args[order[-1]]
        if 2 * np.pi - last_arg + first_arg <= tol:
            labels[labels == len(groups) - 1] = 0
    scalars = np.empty(d, dtype=np.complex128)
    for g in np.unique(labels):
        members = labels == g
        m = vals[members].mean()
        if hermitian:
            m = np.clip(m.real, -1.0, 1.0)
        else:
            m = m / abs(m) if abs(m) > 1e-12 else 1.0
        scalars[members] = m
    same = labels[:, None] == labels[None, :]
    out = []
    for p in partners:
        pw = np.where(same, w.conj().T @ p @ w, 0.0)
        q = np.zeros_like(pw)
        for g in np.unique(labels):
            idx = np.flatnonzero(labels == g)
            sub = np.ix_(idx, idx)
            q[sub] = _repair_partner(pw[sub], hermitian)
        out.append(q)
    _, labels = np.unique(labels, return_inverse=True)
    return _BlockOutcome(w, scalars, labels.astype(np.int64), out, eps, "frozen")


def _fallback(first, partners, eps, hermitian):
    d = first.shape[0]
    if hermitian:
        s = normalized_trace(first).real
    else:
        s = _scalar_unit(first)
    return _BlockOutcome(
        np.eye(d, dtype=np.complex128),
        np.full(d, s, dtype=np.complex128),
        np.zeros(d, dtype=np.int64),
        [p.copy() for p in partners],
        eps,
        "fallback",
    )


def _solve_block(first, partners, recursion, hermitian):
    d = first.shape[0]
    mats = [first] + list(partners)
    eps = _max_pairwise(mats)
    if d == 1 or eps <= SHORT_CIRCUIT * d:
        return _freeze(first, partners, eps, hermitian)
    limit = HERMITIAN_FALLBACK_EPS if hermitian else UNITARY_FALLBACK_EPS
    if eps > limit:
        return _fallback(first, partners, eps, hermitian)
    vals, w = _diagonalize(first, hermitian)
    kind = "hermitian" if hermitian else "unitary"
    stage = run_stage(vals, [w.conj().T @ p @ w for p in partners], eps, kind)
    outcome = _BlockOutcome(
        w,
        stage.scalars,
        stage.coarse_labels,
        stage.corrected,
        eps,
        stage.params.regime,
        stage.params.to_json(),
    )
    # blockwise certificate against the pair bound; otherwise the trivial witness
    bound = recursion.psi(eps) + CERTIFY_TOL
    new = [_to_old(w, np.diag(outcome.scalars))] + [_to_old(w, c) for c in outcome.partners]
    if any(trace_norm(a - b) > bound for a, b in zip(new, mats)):
        return _fallback(first, partners, eps, hermitian)
    return outcome


def _to_old(w, m):
    return w @ m @ w.conj().T


# ---------------------------------------------------------------------------
# the recursion
# ---------------------------------------------------------------------------

def _check_family(mats, matrix_class):
    _check_same(*mats)
    for i, m in enumerate(mats):
        name = f"matrix {i + 1}"
        if matrix_class is MatrixClass.UNITARY:
            _check_unitary(m, name)
        else:
            _check_hermitian(m, name)
            _check_op(m, name)


def correct_family(matrices, matrix_class, workers=1):
    """Pairwise commuting ``A_1..A_k`` of the same class near the inputs.

    Each distance is at most ``eval_bound(eps, k, class)`` where ``eps`` is the
    largest pairwise commutator.  Classes: unitary, or Hermitian with op_norm <= 1.
    """
    matrix_class = MatrixClass(matrix_class)
    if matrix_class not in PSI:
        raise ValueError(f"family correction supports unitary and hermitian, not {matrix_class.value}")
    mats = [as_matrix(m) for m in matrices]
    k = len(mats)
    if k < 2:
        raise ValueError("need at least two matrices")
    _check_family(mats, matrix_class)
    hermitian = matrix_class is MatrixClass.HERMITIAN
    if hermitian:
        mats = [(m + m.conj().T) / 2 for m in mats]

    if k == 2:
        pair = correct_hermitian_pair if hermitian else correct_unitary_pair
        report = pair(mats[0], mats[1], workers=workers)
        report.diagnostics["family_bound"] = eval_bound(report.epsilon, 2, matrix_class)
        return report

    n = mats[0].shape[0]
    eps = _max_pairwise(mats)
    recursion = BoundRecursion.for_class(matrix_class)
    bound = recursion.delta(eps, k)

    def finish(corrected, conj, regime, diagnostics):
        dists = [trace_norm(a - b) for a, b in zip(mats, corrected)]
        res = [
            trace_norm(commutator(corrected[i], corrected[j]))
            for i in range(k)
            for j in range(i + 1, k)
        ]
        return CorrectionReport(
            corrected=corrected,
            conjugator=conj,
            distances=dists,
            residual_commutators=res,
            certified_bound=bound,
            bound_formula=f"psi(phi_{k - 1}(eps)), psi = {recursion.constant:g}*x^{recursion.exponent:.6g}",
            params=CorrectionParams(epsilon=eps, regime=regime),
            matrix_class=matrix_class,
            epsilon=eps,
            diagnostics=diagnostics,
        )

    if eps <= SHORT_CIRCUIT * n:
        return finish([m.copy() for m in mats], np.eye(n, dtype=np.complex128), "exact", {})

    v = np.eye(n, dtype=np.complex128)
    part = Partition.single(n)
    diag_vals = []          # processed matrices, diagonal in the v basis
    current = list(mats)    # unprocessed matrices in the v basis
    stages = []

    for r in range(k - 1):
        measured = _max_pairwise(current)
        phi_r = recursion.phi(r, eps)

        def solver(blocks):
            out = _solve_block(blocks[0], blocks[1:], recursion, hermitian)
            old = [_to_old(out.basis, np.diag(out.scalars))]
            old += [_to_old(out.basis, c) for c in out.partners]
            return old, out

        lift = block_lift(solver, current, part, workers=workers, extras=True)

        w_global = np.zeros((n, n), dtype=np.complex128)
        scal = np.empty(n, dtype=np.complex128)
        new_current = [np.zeros((n, n), dtype=np.complex128) for _ in current[1:]]
        labels = np.empty(n, dtype=np.int64)
        offset = 0
        block_info = []
        for idx, out in zip(part.classes, lift.extras):
            if out is None:
                continue
            sub = np.ix_(idx, idx)
            w_global[sub] = out.basis
            scal[idx] = out.scalars
            for i, c in enumerate(out.partners):
                new_current[i][sub] = c
            labels[idx] = offset + out.labels
            offset += int(out.labels.max()) + 1
            block_info.append({
                "size": int(idx.size),
                "epsilon": out.epsilon,
                "regime": out.regime,
                "params": out.params,
            })
        new_part = Partition.from_labels(labels, offset)
        v = v @ w_global
        diag_vals.append(scal)
        current = new_current
        scalar_ok = all(
            all(np.all(vec[c] == vec[c][0]) for c in new_part.classes if c.size)
            for vec in diag_vals
        )
        stages.append({
            "stage": r + 1,
            "measured_epsilon": measured,
            "phi_bound": phi_r,
            "within_phi": measured <= phi_r + CERTIFY_TOL,
            "classes_before": part.r,
            "classes_after": new_part.r,
            "refines": new_part.refines(part),
            "scalar_blocks_exact": scalar_ok,
            "lift_distances": [float(x) for x in lift.distances],
            "blocks": block_info,
        })
        part = new_part

    corrected = [_to_old(v, np.diag(s)) for s in diag_vals]
    corrected.append(_to_old(v, current[0]))
    if hermitian:
        corrected = [(a + a.conj().T) / 2 for a in corrected]
    diagnostics = {"stages": stages, "final_classes": part.r}
    report = finish(corrected, v, "family", diagnostics)
    if not report.certified:
        fb = [_scalar_unit(m) * np.eye(n, dtype=np.complex128) if not hermitian
              else normalized_trace(m).real * np.eye(n, dtype=np.complex128)
              for m in mats[:-1]]
        fb.append(mats[-1].copy())
        diagnostics["fallback"] = "construction exceeded the bound"
        return finish(fb, np.eye(n, dtype=np.complex128), "fallback", diagnostics)
    return report
