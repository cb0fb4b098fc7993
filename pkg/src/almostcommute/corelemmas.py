"""Auxiliary estimates: spectral cutoffs, almost-unitary repair, norm-preserving
eigenvalue renormalization, and two commutator/root inequalities."""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    NotBlockDiagonal,
    NotCommuting,
    NotHermitian,
    NotPositive,
    OpNormTooLarge,
    PreconditionViolated,
)
from .matcore import (
    BlockShape,
    BlockSpec,
    as_matrix,
    commutator,
    conformance,
    op_norm,
    trace_norm,
)
from .spectral import hermitian_eig, inv_sqrt_positive, polar_decompose


def projector_cutoff(a, delta):
    """Orthogonal projector onto the eigenvectors of ``A A*`` with eigenvalue < delta**2.

    Guarantees ``op_norm(P A) <= delta`` and ``trace_norm(1 - P) <= trace_norm(A)/delta``.
    For normal ``A`` the projector commutes with ``A``.
    """
    v = _cutoff_basis(a, delta)
    return v @ v.conj().T


def _cutoff_basis(a, delta):
    if not delta > 0:
        raise ValueError("delta must be positive")
    a = as_matrix(a)
    form = hermitian_eig(a @ a.conj().T)
    return form.basis[:, form.eigenvalues < delta ** 2]


def _isometry_part(b):
    # B (B*B)^(-1/2): the isometry closest to B
    gram = b.conj().T @ b
    return b @ inv_sqrt_positive((gram + gram.conj().T) / 2)


def unitarize_subspace(b, check=True):
    """Nearest isometry ``V = B (B*B)^(-1/2)``; ``op_norm(B - V) <= 2 op_norm(B*B - 1)``.

    ``b`` may be rectangular (n x k), mapping a k-dimensional space into C^n.
    """
    b = np.asarray(b, dtype=np.complex128)
    k = b.shape[1]
    dev = op_norm(b.conj().T @ b - np.eye(k))
    if check and dev > 1 / 3:
        raise PreconditionViolated(f"op_norm(B*B - 1) = {dev:.3g} exceeds 1/3")
    return _isometry_part(b)


@dataclass(frozen=True, eq=False)
class Unitarization:
    """Both unitary candidates for an almost-unitary matrix and their distances."""

    unitary: np.ndarray
    constructive: np.ndarray
    polar: np.ndarray
    epsilon: float
    constructive_distance: float
    polar_distance: float
    kept_rank: int

    @property
    def distance(self):
        return min(self.constructive_distance, self.polar_distance)


def unitarize_candidates(a):
    """Cutoff-and-complete construction plus the polar factor, for ``op_norm(A) <= 3``."""
    a = as_matrix(a)
    n = a.shape[0]
    if op_norm(a) > 3 + 1e-9:
        raise OpNormTooLarge(f"op_norm(A) = {op_norm(a):.6g} > 3")
    gram_dev = a.conj().T @ a - np.eye(n)
    eps = trace_norm(gram_dev)
    polar = polar_decompose(a).unitary_factor

    if eps == 0.0:
        constructive, rank = polar, n
    elif eps > 1 / 3:
        # polar distance <= eps since |s - 1| <= |s^2 - 1|, and eps <= 6*sqrt(eps) here
        constructive, rank = polar, -1
    else:
        qx = _cutoff_basis(gram_dev, np.sqrt(eps))
        rank = qx.shape[1]
        if rank == 0:
            constructive = polar
        else:
            # exact inverse square root: the isometry bound holds for any deviation < 1
            v = unitarize_subspace(a @ qx, check=False)
            if rank == n:
                constructive = v @ qx.conj().T
            else:
                x_perp = _kernels.complete_basis(qx)
                y_perp = _kernels.complete_basis(v)
                constructive = v @ qx.conj().T + y_perp @ x_perp.conj().T

    d_con = trace_norm(a - constructive)
    d_pol = trace_norm(a - polar)
    best = polar if d_pol < d_con else constructive
    return Unitarization(best, constructive, polar, eps, d_con, d_pol, rank)


def unitarize_tr(a):
    """A unitary within ``6 sqrt(trace_norm(A*A - 1))`` of ``A`` (closer of two candidates)."""
    return unitarize_candidates(a).unitary


def weyl_renormalize(c, a, part, tol=1e-10):
    """Block-diagonal Hermitian ``C~`` with op_norm <= op_norm(A) and
    ``trace_norm(C~ - C) <= trace_norm(C - A)``.

    Per block of ``part``: keep the eigenbasis of the C-block and replace its
    descending eigenvalues by (descending eigenvalues of the C-block) minus
    (descending eigenvalues of the (C - A)-block).
    """
    c = as_matrix(c)
    a = as_matrix(a)
    for name, m in (("C", c), ("A", a)):
        if trace_norm(m - m.conj().T) > tol:
            raise NotHermitian(f"{name} is not Hermitian")
    if not conformance(c, BlockSpec(part, BlockShape.DIAGONAL), tol):
        raise NotBlockDiagonal("C is not block diagonal on the partition")
    out = np.zeros_like(c)
    for idx in part.classes:
        if idx.size == 0:
            continue
        sub = np.ix_(idx, idx)
        cb = c[sub]
        form_c = hermitian_eig(cb)
        gamma = form_c.eigenvalues[::-1]
        beta = np.linalg.eigvalsh(((cb - a[sub]) + (cb - a[sub]).conj().T) / 2)[::-1]
        v = form_c.basis[:, ::-1]
        blk = (v * (gamma - beta)) @ v.conj().T
        out[sub] = (blk + blk.conj().T) / 2
    return out


def commutator_perturbation_bound(a, b, a_t, b_t, tol=1e-9):
    """``trace_norm([A,B]) + 2 (trace_norm(A - A~) + trace_norm(B - B~))``.

    Upper-bounds ``trace_norm([A~, B~])`` when all four have op_norm <= 1.
    """
    for m in (a, b, a_t, b_t):
        if op_norm(m) > 1 + tol:
            raise OpNormTooLarge(f"op_norm = {op_norm(m):.6g} > 1")
    return trace_norm(commutator(a, b)) + 2 * (trace_norm(a - a_t) + trace_norm(b - b_t))


def sqrt_distance_check(a, b, tol=1e-9):
    """``(trace_norm(A - B), sqrt(trace_norm(A^2 - B^2)))`` for commuting positives."""
    a = as_matrix(a)
    b = as_matrix(b)
    if trace_norm(commutator(a, b)) > tol:
        raise NotCommuting(f"||[A,B]||_tr = {trace_norm(commutator(a, b)):.3e}")
    for m in (a, b):
        if trace_norm(m - m.conj().T) > tol:
            raise NotHermitian("input is not Hermitian")
        if np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -tol:
            raise NotPositive("input is not positive")
    return trace_norm(a - b), float(np.sqrt(trace_norm(a @ a - b @ b)))

