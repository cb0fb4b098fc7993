"""Dense complex matrices, the normalized trace norm, and block structure.

Matrices are plain ``numpy`` complex arrays.  The two norms used throughout:

* ``trace_norm(A) = sqrt((1/n) * sum |A_jk|^2)``, the Frobenius norm scaled so the
  identity has norm 1 in every dimension;
* ``op_norm(A)``, the largest singular value.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, InvalidMatrix


class MatrixClass(str, Enum):
    UNITARY = "unitary"
    HERMITIAN = "hermitian"
    UNITARY_POSITIVE = "unitary-positive"
    NORMAL = "normal"


class BlockShape(Enum):
    DIAGONAL = _kernels.SHAPE_DIAGONAL
    CYCLIC_THREE_DIAGONAL = _kernels.SHAPE_CYCLIC_THREE
    THREE_DIAGONAL = _kernels.SHAPE_THREE


def as_matrix(a):
    """Validate and convert to a square complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InvalidMatrix(f"expected a nonempty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("matrix has non-finite entries")
    return m


def _same_dim(a, b):
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")


def trace_norm(a):
    a = np.asarray(a)
    n = a.shape[0]
    return float(np.linalg.norm(a) / np.sqrt(n))


def op_norm(a):
    # sqrt of the top eigenvalue of A*A
    a = np.asarray(a, dtype=np.complex128)
    top = np.linalg.eigvalsh(a.conj().T @ a)[-1]
    return float(np.sqrt(max(top, 0.0)))


def normalized_trace(a):
    a = np.asarray(a)
    return complex(np.trace(a) / a.shape[0])


def inner(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    _same_dim(a, b)
    return complex(np.vdot(a, b) / a.shape[0])


def commutator(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    _same_dim(a, b)
    return a @ b - b @ a


def dagger(a):
    return np.asarray(a).conj().T


# ---------------------------------------------------------------------------
# class-membership residuals
# ---------------------------------------------------------------------------

def unitarity_residual(a):
    """``op_norm(A*A - 1)``."""
    a = np.asarray(a)
    return op_norm(a.conj().T @ a - np.eye(a.shape[0]))


def hermiticity_residual(a):
    a = np.asarray(a)
    return trace_norm(a - a.conj().T)


def normality_residual(a):
    a = np.asarray(a)
    return trace_norm(a @ a.conj().T - a.conj().T @ a)


def min_hermitian_eigenvalue(a):
    a = np.asarray(a)
    return float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0])


# ---------------------------------------------------------------------------
# partitions and block structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Partition:
    """Ordered partition of ``{0, ..., n-1}`` into index classes.

    Classes are explicit index arrays; contiguity is not assumed.  Empty classes
    are allowed when ``allow_empty`` is set, which the spectral grids use to keep
    one class per grid point.
    """

    n: int
    classes: tuple
    allow_empty: bool = False

    def __post_init__(self):
        classes = tuple(np.asarray(c, dtype=np.int64).reshape(-1) for c in self.classes)
        object.__setattr__(self, "classes", classes)
        seen = np.zeros(self.n, dtype=np.int64)
        for c in classes:
            if c.size == 0 and not self.allow_empty:
                raise ValueError("empty class")
            if c.size and (c.min() < 0 or c.max() >= self.n):
                raise ValueError("class index out of range")
            np.add.at(seen, c, 1)
        if not np.all(seen == 1):
            raise ValueError("classes must be disjoint and cover 0..n-1")

    @classmethod
    def from_labels(cls, labels, nclasses=None):
        labels = np.asarray(labels, dtype=np.int64)
        if nclasses is None:
            nclasses = int(labels.max()) + 1 if labels.size else 0
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(nclasses + 1))
        classes = [order[bounds[i]:bounds[i + 1]] for i in range(nclasses)]
        return cls(labels.size, tuple(classes), allow_empty=True)

    @classmethod
    def contiguous(cls, sizes):
        edges = np.concatenate([[0], np.cumsum(sizes)])
        return cls(int(edges[-1]), tuple(np.arange(edges[i], edges[i + 1]) for i in range(len(sizes))))

    @classmethod
    def single(cls, n):
        return cls(n, (np.arange(n),))

    @property
    def r(self):
        return len(self.classes)

    @property
    def sizes(self):
        return [int(c.size) for c in self.classes]

    def labels(self):
        lab = np.empty(self.n, dtype=np.int64)
        for j, c in enumerate(self.classes):
            lab[c] = j
        return lab

    def nonempty(self):
        return Partition(self.n, tuple(c for c in self.classes if c.size))

    def refines(self, coarser):
        """True when every class of ``self`` lies inside one class of ``coarser``."""
        lab = coarser.labels()
        return all(c.size == 0 or np.all(lab[c] == lab[c[0]]) for c in self.classes)

    def to_json(self):
        return [c.tolist() for c in self.classes]


@dataclass(frozen=True)
class BlockSpec:
    partition: Partition
    shape: BlockShape = BlockShape.DIAGONAL


def extract_block(a, part, p, q):
    if not (0 <= p < part.r and 0 <= q < part.r):
        raise IndexError(f"class index ({p}, {q}) out of range for {part.r} classes")
    a = np.asarray(a)
    return a[np.ix_(part.classes[p], part.classes[q])]


def assemble_block_diagonal(blocks, part):
    if len(blocks) != part.r:
        raise DimensionMismatch(f"{len(blocks)} blocks for {part.r} classes")
    out = np.zeros((part.n, part.n), dtype=np.complex128)
    for blk, idx in zip(blocks, part.classes):
        blk = np.asarray(blk)
        if blk.shape != (idx.size, idx.size):
            raise DimensionMismatch(f"block of shape {blk.shape} for class of size {idx.size}")
        out[np.ix_(idx, idx)] = blk
    return out


def conformance(a, spec, tol=1e-10):
    """True iff every entry outside the blocks ``spec`` allows has modulus <= tol."""
    part = spec.partition
    a = np.asarray(a)
    if a.shape != (part.n, part.n):
        raise DimensionMismatch(f"matrix {a.shape} vs partition of {part.n}")
    return max_outside(a, spec) <= tol


def max_outside(a, spec):
    part = spec.partition
    return _kernels.max_outside(a, part.labels(), part.r, spec.shape.value)
