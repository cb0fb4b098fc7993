"""Blockwise solving on a partition, with the squared-norm aggregation rule.

For a block-diagonal matrix the squared normalized trace norm is the
size-weighted average of the squared block norms.  ``block_lift`` runs a
per-block solver and reports the aggregate distance; when the solver's
guarantee ``delta`` is concave with ``delta(0) = 0`` the aggregate distance is
bounded by ``delta`` at the aggregate residual.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BlockSolverError, DimensionMismatch, NotBlockDiagonal
from .matcore import BlockShape, BlockSpec, conformance, trace_norm


@dataclass(frozen=True, eq=False)
class LiftResult:
    matrices: list
    block_outputs: list          # per class: list of output blocks (None for empty classes)
    block_distances: np.ndarray  # shape (classes, k)
    distances: np.ndarray        # aggregate per matrix
    residual: float | None = None
    bound: float | None = None
    extras: list | None = None


def aggregate(values, sizes):
    """``sqrt(sum (d_l / n) * values_l**2)``."""
    values = np.asarray(values, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    return float(np.sqrt(np.sum(sizes / sizes.sum() * values ** 2)))


def block_lift(solver, inputs, part, residual=None, bound=None, workers=1, tol=1e-10,
               extras=False):
    """Apply ``solver(list_of_blocks) -> list_of_blocks`` on every class of ``part``.

    ``residual(blocks) -> float`` and ``bound(eps) -> float`` are optional; when
    given, the result carries the aggregate residual and the bound evaluated there.
    With ``extras=True`` the solver returns ``(blocks, extra)`` and the extras are
    collected per class (``None`` for empty classes).
    """
    inputs = [np.asarray(m, dtype=np.complex128) for m in inputs]
    spec = BlockSpec(part, BlockShape.DIAGONAL)
    for m in inputs:
        if m.shape != (part.n, part.n):
            raise DimensionMismatch(f"matrix {m.shape} vs partition of {part.n}")
        if not conformance(m, spec, tol):
            raise NotBlockDiagonal("input is not block diagonal on the partition")

    def run(j):
        idx = part.classes[j]
        if idx.size == 0:
            return None
        blocks = [m[np.ix_(idx, idx)] for m in inputs]
        try:
            out = solver(blocks)
        except Exception as exc:
            raise BlockSolverError(j, exc) from exc
        extra = None
        if extras:
            out, extra = out
        return blocks, [np.asarray(b, dtype=np.complex128) for b in out], extra

    if workers > 1 and part.r > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(part.r)))
    else:
        results = [run(j) for j in range(part.r)]

    k = len(inputs)
    outputs = [np.zeros((part.n, part.n), dtype=np.complex128) for _ in range(k)]
    dists = np.zeros((part.r, k))
    eps_blocks = np.zeros(part.r)
    for j, res in enumerate(results):
        if res is None:
            continue
        blocks, out, _ = res
        idx = part.classes[j]
        sub = np.ix_(idx, idx)
        for i in range(k):
            outputs[i][sub] = out[i]
            dists[j, i] = trace_norm(out[i] - blocks[i])
        if residual is not None:
            eps_blocks[j] = residual(blocks)

    sizes = np.array(part.sizes)
    nonempty = sizes > 0
    agg = np.array([aggregate(dists[nonempty, i], sizes[nonempty]) for i in range(k)])
    eps_agg = lifted = None
    if residual is not None:
        eps_agg = aggregate(eps_blocks[nonempty], sizes[nonempty])
        if bound is not None:
            lifted = float(bound(eps_agg))
    return LiftResult(
        outputs,
        [None if r is None else r[1] for r in results],
        dists,
        agg,
        eps_agg,
        lifted,
        [None if r is None else r[2] for r in results] if extras else None,
    )
