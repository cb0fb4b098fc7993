"""Hot inner loops, in two flavours.

Each kernel exists as a numba ``@njit`` loop version (``*_nb``) and a pure-numpy
version (``*_np``).  The public name is bound at import time: numba unless the
environment variable ``ALMOSTCOMMUTE_NO_NUMBA`` is set to a non-empty value other
than ``0``, or numba is not importable.  Both flavours stay importable so the
benchmark and the parity tests can call them side by side.
"""
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_flag = os.environ.get("ALMOSTCOMMUTE_NO_NUMBA", "")
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0")

# block-shape codes shared with matcore.BlockShape
SHAPE_DIAGONAL = 0
SHAPE_CYCLIC_THREE = 1
SHAPE_THREE = 2


# ---------------------------------------------------------------------------
# cyclic Jacobi eigensolver for complex Hermitian matrices
# ---------------------------------------------------------------------------

def _jacobi_np(H, tol, max_sweeps):
    a = np.array(H, dtype=np.complex128, copy=True)
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = np.sqrt(np.sum(np.abs(a) ** 2))
    if n == 1 or scale == 0.0:
        return a.diagonal().real.copy(), v, 0
    thresh = tol * scale
    for sweep in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off < thresh:
            return a.diagonal().real.copy(), v, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = abs(apq)
                if g < 1e-300:
                    continue
                e = apq / g
                app = a[p, p].real
                aqq = a[q, q].real
                zeta = (aqq - app) / (2.0 * g)
                t = 1.0 / (abs(zeta) + np.sqrt(zeta * zeta + 1.0))
                if zeta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                gpp, gpq, gqp, gqq = e * c, e * s, -s, c
                colp = a[:, p].copy()
                colq = a[:, q]
                a[:, p] = colp * gpp + colq * gqp
                a[:, q] = colp * gpq + colq * gqq
                rowp = a[p, :].copy()
                rowq = a[q, :]
                a[p, :] = np.conj(gpp) * rowp + np.conj(gqp) * rowq
                a[q, :] = np.conj(gpq) * rowp + np.conj(gqq) * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = app - t * g
                a[q, q] = aqq + t * g
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = vp * gpp + vq * gqp
                v[:, q] = vp * gpq + vq * gqq
    return a.diagonal().real.copy(), v, max_sweeps


def _jacobi_loops(H, tol, max_sweeps):
    a = H.copy()
    n = a.shape[0]
    v = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        v[i, i] = 1.0
    w = np.empty(n, dtype=np.float64)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += a[i, j].real ** 2 + a[i, j].imag ** 2
    scale = np.sqrt(total)
    if n == 1 or scale == 0.0:
        for i in range(n):
            w[i] = a[i, i].real
        return w, v, 0
    thresh = tol * scale
    sweeps = max_sweeps
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j].real ** 2 + a[i, j].imag ** 2
        if np.sqrt(off) < thresh:
            sweeps = sweep
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = abs(apq)
                if g < 1e-300:
                    continue
                e = apq / g
                app = a[p, p].real
                aqq = a[q, q].real
                zeta = (aqq - app) / (2.0 * g)
                t = 1.0 / (abs(zeta) + np.sqrt(zeta * zeta + 1.0))
                if zeta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                gpp = e * c
                gpq = e * s
                gqp = -s
                gqq = c
                cgpp = np.conj(gpp)
                cgpq = np.conj(gpq)
                for k in range(n):
                    xp = a[k, p]
                    xq = a[k, q]
                    a[k, p] = xp * gpp + xq * gqp
                    a[k, q] = xp * gpq + xq * gqq
                for k in range(n):
                    xp = a[p, k]
                    xq = a[q, k]
                    a[p, k] = cgpp * xp + gqp * xq
                    a[q, k] = cgpq * xp + gqq * xq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = app - t * g
                a[q, q] = aqq + t * g
                for k in range(n):
                    xp = v[k, p]
                    xq = v[k, q]
                    v[k, p] = xp * gpp + xq * gqp
                    v[k, q] = xp * gpq + xq * gqq
    for i in range(n):
        w[i] = a[i, i].real
    return w, v, sweeps


# ---------------------------------------------------------------------------
# spectral-gap thresholding: keep m[j, k] only when |vals[j] - vals[k]| < cutoff
# and the class labels of j and k are equal or adjacent
# ---------------------------------------------------------------------------

def _adjacent_np(labels, nclasses, cyclic):
    d = np.abs(labels[:, None] - labels[None, :])
    if cyclic:
        d = np.minimum(d, nclasses - d)
    return d <= 1


def _gap_threshold_np(m, vals, cutoff, labels, nclasses, cyclic):
    keep = np.abs(vals[:, None] - vals[None, :]) < cutoff
    keep &= _adjacent_np(labels, nclasses, cyclic)
    return np.where(keep, m, 0.0).astype(np.complex128)


def _gap_threshold_loops(m, vals, cutoff, labels, nclasses, cyclic):
    n = m.shape[0]
    out = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        for k in range(n):
            if abs(vals[j] - vals[k]) >= cutoff:
                continue
            d = abs(labels[j] - labels[k])
            if cyclic and nclasses - d < d:
                d = nclasses - d
            if d <= 1:
                out[j, k] = m[j, k]
    return out


# ---------------------------------------------------------------------------
# largest entry modulus outside the blocks a BlockSpec allows
# ---------------------------------------------------------------------------

def _max_outside_np(a, labels, nclasses, shape):
    d = np.abs(labels[:, None] - labels[None, :])
    if shape == SHAPE_DIAGONAL:
        allowed = d == 0
    else:
        if shape == SHAPE_CYCLIC_THREE:
            d = np.minimum(d, nclasses - d)
        allowed = d <= 1
    outside = np.abs(a)[~allowed]
    return float(outside.max()) if outside.size else 0.0


def _max_outside_loops(a, labels, nclasses, shape):
    n = a.shape[0]
    worst = 0.0
    for j in range(n):
        for k in range(n):
            d = abs(labels[j] - labels[k])
            if shape == 0:
                ok = d == 0
            else:
                if shape == 1 and nclasses - d < d:
                    d = nclasses - d
                ok = d <= 1
            if not ok:
                x = abs(a[j, k])
                if x > worst:
                    worst = x
    return worst


# ---------------------------------------------------------------------------
# deterministic orthonormal completion: Gram-Schmidt of e_0, e_1, ... against
# the columns of q, keeping a candidate when its residual norm exceeds tol
# ---------------------------------------------------------------------------

def _complete_basis_np(q, tol):
    n, k = q.shape
    need = n - k
    basis = np.zeros((n, n), dtype=np.complex128)
    basis[:, :k] = q
    have = k
    for i in range(n):
        if have == n:
            break
        x = np.zeros(n, dtype=np.complex128)
        x[i] = 1.0
        for _ in range(2):
            b = basis[:, :have]
            x = x - b @ (b.conj().T @ x)
        nrm = np.linalg.norm(x)
        if nrm > tol:
            basis[:, have] = x / nrm
            have += 1
    return basis[:, k:have], have - k == need


def _complete_basis_loops(q, tol):
    n, k = q.shape
    need = n - k
    basis = np.zeros((n, n), dtype=np.complex128)
    for j in range(k):
        for i in range(n):
            basis[i, j] = q[i, j]
    have = k
    x = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        if have == n:
            break
        for r in range(n):
            x[r] = 0.0
        x[i] = 1.0
        for _ in range(2):
            for j in range(have):
                dot = 0.0 + 0.0j
                for r in range(n):
                    dot += np.conj(basis[r, j]) * x[r]
                for r in range(n):
                    x[r] -= dot * basis[r, j]
        nrm = 0.0
        for r in range(n):
            nrm += x[r].real ** 2 + x[r].imag ** 2
        nrm = np.sqrt(nrm)
        if nrm > tol:
            for r in range(n):
                basis[r, have] = x[r] / nrm
            have += 1
    return basis[:, k:have].copy(), have - k == need


if HAVE_NUMBA:
    _jacobi_nb = njit(cache=True, nogil=True)(_jacobi_loops)
    _gap_threshold_nb = njit(cache=True, nogil=True)(_gap_threshold_loops)
    _max_outside_nb = njit(cache=True, nogil=True)(_max_outside_loops)
    _complete_basis_nb = njit(cache=True, nogil=True)(_complete_basis_loops)
else:  # pragma: no cover
    _jacobi_nb = _jacobi_np
    _gap_threshold_nb = _gap_threshold_np
    _max_outside_nb = _max_outside_np
    _complete_basis_nb = _complete_basis_np


def jacobi_eigh(h, tol=1e-13, max_sweeps=60, use_numba=None):
    """Cyclic Jacobi on a complex Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors, sweeps)`` in the order the rotations
    leave them (unsorted).
    """
    h = np.ascontiguousarray(h, dtype=np.complex128)
    if use_numba is None:
        use_numba = USE_NUMBA
    fn = _jacobi_nb if use_numba else _jacobi_np
    return fn(h, float(tol), int(max_sweeps))


def gap_threshold(m, vals, cutoff, labels, nclasses, cyclic, use_numba=None):
    m = np.ascontiguousarray(m, dtype=np.complex128)
    vals = np.ascontiguousarray(vals, dtype=np.complex128)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if use_numba is None:
        use_numba = USE_NUMBA
    fn = _gap_threshold_nb if use_numba else _gap_threshold_np
    return fn(m, vals, float(cutoff), labels, int(nclasses), bool(cyclic))


def max_outside(a, labels, nclasses, shape, use_numba=None):
    a = np.ascontiguousarray(a, dtype=np.complex128)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if use_numba is None:
        use_numba = USE_NUMBA
    fn = _max_outside_nb if use_numba else _max_outside_np
    return float(fn(a, labels, int(nclasses), int(shape)))


def complete_basis(q, tol=None, use_numba=None):
    """Orthonormal basis of the orthogonal complement of the columns of ``q``.

    ``q`` must have orthonormal columns.  With ``tol < 1/sqrt(n)`` the greedy
    pass over canonical vectors always finds ``n - k`` vectors.
    """
    q = np.ascontiguousarray(q, dtype=np.complex128)
    n = q.shape[0]
    if tol is None:
        tol = 0.5 / np.sqrt(n)
    if use_numba is None:
        use_numba = USE_NUMBA
    fn = _complete_basis_nb if use_numba else _complete_basis_np
    basis, ok = fn(q, float(tol))
    if not ok:
        raise RuntimeError("orthonormal completion fell short")
    return basis
