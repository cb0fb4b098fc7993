"""Eigendecompositions of Hermitian and normal matrices, polar factors, square roots."""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import NotHermitian, NotNormal, NotPositive, SingularInput
from .matcore import as_matrix, op_norm, trace_norm

# Jacobi is the default solver up to this size; LAPACK takes over above it.
JACOBI_MAX_N = 64
JACOBI_TOL = 1e-13
CLAMP = 1e-10


class Ordering(Enum):
    ASCENDING_REAL = "ascending-real"
    BY_ARGUMENT = "by-argument"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class SpectralForm:
    eigenvalues: np.ndarray
    basis: np.ndarray
    ordering: Ordering

    def reconstruct(self):
        b = self.basis
        return (b * self.eigenvalues) @ b.conj().T


@dataclass(frozen=True, eq=False)
class PolarForm:
    unitary_factor: np.ndarray
    positive_factor: np.ndarray

    def reconstruct(self):
        return self.unitary_factor @ self.positive_factor


def _eigh(h, method):
    n = h.shape[0]
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_N else "lapack"
    if method == "jacobi":
        w, v, _ = _kernels.jacobi_eigh(h, tol=JACOBI_TOL)
    elif method == "lapack":
        w, v = np.linalg.eigh(h)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    order = np.argsort(w, kind="stable")
    return w[order], np.ascontiguousarray(v[:, order])


def hermitian_eig(h, method="auto", tol=1e-10):
    """Eigenvalues (ascending) and an orthonormal eigenbasis of a Hermitian matrix.

    ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi for n <= 64).
    """
    h = as_matrix(h)
    if trace_norm(h - h.conj().T) > tol:
        raise NotHermitian(f"||H - H*||_tr = {trace_norm(h - h.conj().T):.3e}")
    h = (h + h.conj().T) / 2
    w, v = _eigh(h, method)
    return SpectralForm(w, v, Ordering.ASCENDING_REAL)


def _clusters(sorted_vals, thr):
    """Split ascending values into runs whose consecutive gaps are <= thr."""
    if sorted_vals.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(sorted_vals) > thr) + 1
    edges = np.concatenate([[0], breaks, [sorted_vals.size]])
    return [np.arange(edges[i], edges[i + 1]) for i in range(edges.size - 1)]


def normal_eig(m, method="auto", tol=1e-8):
    """Unitary diagonalization of a normal matrix.

    Diagonalizes the Hermitian part first, then the skew part compressed to each
    cluster of (numerically) equal real parts.  Unitary inputs come back ordered
    by argument in ``[0, 2*pi)``.
    """
    m = as_matrix(m)
    defect = trace_norm(m @ m.conj().T - m.conj().T @ m)
    if defect > tol:
        raise NotNormal(f"||NN* - N*N||_tr = {defect:.3e}")
    n = m.shape[0]
    h1 = (m + m.conj().T) / 2
    h2 = (m - m.conj().T) / 2j
    w1, q = _eigh(h1, method)
    thr = 1e-7 * (1 + op_norm(m))
    basis = np.empty_like(q)
    for idx in _clusters(w1, thr):
        qc = q[:, idx]
        if idx.size == 1:
            basis[:, idx] = qc
            continue
        c = qc.conj().T @ h2 @ qc
        _, r = _eigh((c + c.conj().T) / 2, method)
        basis[:, idx] = qc @ r
    vals = np.einsum("ij,ij->j", basis.conj(), m @ basis)
    if np.max(np.abs(np.abs(vals) - 1)) <= tol and op_norm(m.conj().T @ m - np.eye(n)) <= tol:
        args = np.mod(np.angle(vals), 2 * np.pi)
        order = np.argsort(args, kind="stable")
        return SpectralForm(vals[order], np.ascontiguousarray(basis[:, order]), Ordering.BY_ARGUMENT)
    return SpectralForm(vals, basis, Ordering.NONE)


def polar_decompose(m):
    """``M = U H`` with ``U`` unitary and ``H = (M*M)^(1/2)``.

    Computed from the SVD, which fixes the unitary factor on the kernel of a
    rank-deficient ``M`` deterministically.
    """
    m = as_matrix(m)
    w, s, zh = np.linalg.svd(m)
    u = w @ zh
    h = (zh.conj().T * s) @ zh
    return PolarForm(u, (h + h.conj().T) / 2)


def _positive_spectrum(p, method, floor_err):
    p = as_matrix(p)
    form = hermitian_eig(p, method=method)
    w = form.eigenvalues
    if w[0] < floor_err:
        raise NotPositive(f"min eigenvalue {w[0]:.3e}")
    return np.clip(w, 0.0, None), form.basis


def sqrt_positive(p, method="auto"):
    w, v = _positive_spectrum(p, method, -1e-6)
    r = (v * np.sqrt(w)) @ v.conj().T
    return (r + r.conj().T) / 2


def inv_sqrt_positive(p, method="auto", floor=1e-8):
    p = as_matrix(p)
    form = hermitian_eig(p, method=method)
    w = form.eigenvalues
    if w[0] < floor:
        raise SingularInput(f"min eigenvalue {w[0]:.3e} below {floor:g}")
    v = form.basis
    r = (v / np.sqrt(w)) @ v.conj().T
    return (r + r.conj().T) / 2
