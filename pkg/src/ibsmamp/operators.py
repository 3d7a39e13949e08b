"""Matrix-free linear operators and the combinators used to assemble transforms.

An operator is a (rows, cols, forward, adjoint) quadruple acting on 1-d
complex vectors.  Operators are immutable after construction, so a single
instance can be shared freely across threads and trials.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import MaterializationLimitError
from .rng import Permutation

_DENSE_LIMIT = 4096


def _freeze(obj, **fields):
    for name, value in fields.items():
        object.__setattr__(obj, name, value)


class LinearOperator:
    """Immutable matrix-free linear map C^cols -> C^rows."""

    __slots__ = ("rows", "cols", "_fwd", "_adj")

    def __init__(self, rows: int, cols: int,
                 forward: Callable[[np.ndarray], np.ndarray],
                 adjoint: Callable[[np.ndarray], np.ndarray]):
        if rows < 1 or cols < 1:
            raise ValueError(f"operator shape ({rows}, {cols}) must be positive")
        _freeze(self, rows=int(rows), cols=int(cols), _fwd=forward, _adj=adjoint)

    def __setattr__(self, name, value):
        raise AttributeError("LinearOperator is immutable")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Forward map: returns the length-rows image of a length-cols vector."""
        if v.ndim != 1 or v.shape[0] != self.cols:
            raise ValueError(f"expected vector of length {self.cols}, got shape {v.shape}")
        return self._fwd(v)

    def apply_adjoint(self, v: np.ndarray) -> np.ndarray:
        """Adjoint (conjugate-transpose) map: length-rows -> length-cols."""
        if v.ndim != 1 or v.shape[0] != self.rows:
            raise ValueError(f"expected vector of length {self.rows}, got shape {v.shape}")
        return self._adj(v)

    def __repr__(self):
        return f"{type(self).__name__}(rows={self.rows}, cols={self.cols})"


class DiagonalOperator(LinearOperator):
    """Square diagonal operator with the given (possibly complex) weights."""

    __slots__ = ("weights",)

    def __init__(self, weights: np.ndarray):
        w = np.asarray(weights)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("diagonal weights must be a non-empty 1-d array")
        w = w.copy()
        w.setflags(write=False)
        wc = np.conj(w)
        super().__init__(w.size, w.size, lambda v: w * v, lambda v: wc * v)
        _freeze(self, weights=w)


class PermutationOperator(LinearOperator):
    """Square operator applying a fixed permutation: out[i] = v[indices[i]]."""

    __slots__ = ("permutation",)

    def __init__(self, permutation: Permutation):
        super().__init__(permutation.size, permutation.size,
                         permutation.apply, permutation.apply_inverse)
        _freeze(self, permutation=permutation)


def identity(n: int) -> LinearOperator:
    return LinearOperator(n, n, lambda v: v.copy(), lambda v: v.copy())


def adjoint(op: LinearOperator) -> LinearOperator:
    """The adjoint of op as a standalone operator."""
    return LinearOperator(op.cols, op.rows, op.apply_adjoint, op.apply)


def compose(outer: LinearOperator, inner: LinearOperator) -> LinearOperator:
    """Operator product outer @ inner (inner acts first)."""
    if inner.rows != outer.cols:
        raise ValueError(
            f"cannot compose {outer.shape} with {inner.shape}: inner rows != outer cols")
    return LinearOperator(
        outer.rows, inner.cols,
        lambda v: outer.apply(inner.apply(v)),
        lambda v: inner.apply_adjoint(outer.apply_adjoint(v)))


def row_select(op: LinearOperator, indices: np.ndarray) -> LinearOperator:
    """Restrict op to the given output rows (distinct, in range).

    The adjoint scatters into the selected rows and zero-fills the rest,
    so row_select(op, idx) of a row-orthonormal op stays row-orthonormal.
    """
    idx = np.asarray(indices, dtype=np.int64).copy()
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("row indices must be a non-empty 1-d array")
    if idx.min() < 0 or idx.max() >= op.rows:
        raise ValueError(f"row indices out of range for operator with {op.rows} rows")
    if np.unique(idx).size != idx.size:
        raise ValueError("row indices must be distinct")
    idx.setflags(write=False)
    rows = op.rows

    def fwd(v):
        return op.apply(v)[idx]

    def adj(v):
        z = np.zeros(rows, dtype=np.result_type(v.dtype, np.complex128))
        z[idx] = v
        return op.apply_adjoint(z)

    return LinearOperator(idx.size, op.cols, fwd, adj)


def block_diag_union(ops: Sequence[LinearOperator]) -> LinearOperator:
    """Direct sum of the given operators, acting on the concatenated segments."""
    if not ops:
        raise ValueError("block_diag_union needs at least one operator")
    ops = tuple(ops)
    col_splits = np.cumsum([op.cols for op in ops])[:-1]
    row_splits = np.cumsum([op.rows for op in ops])[:-1]
    rows = sum(op.rows for op in ops)
    cols = sum(op.cols for op in ops)

    def fwd(v):
        return np.concatenate([op.apply(seg) for op, seg in zip(ops, np.split(v, col_splits))])

    def adj(v):
        return np.concatenate(
            [op.apply_adjoint(seg) for op, seg in zip(ops, np.split(v, row_splits))])

    return LinearOperator(rows, cols, fwd, adj)


def materialize_dense(op: LinearOperator, limit: int = _DENSE_LIMIT) -> np.ndarray:
    """Dense complex matrix of op, by applying it to the standard basis.

    Refuses operators with any dimension above ``limit`` so accidental
    materialization of production-size transforms fails fast.
    """
    if max(op.rows, op.cols) > limit:
        raise MaterializationLimitError(
            f"operator of shape {op.shape} exceeds dense limit {limit}")
    dense = np.empty((op.rows, op.cols), dtype=np.complex128)
    basis = np.zeros(op.cols, dtype=np.complex128)
    for j in range(op.cols):
        basis[j] = 1.0
        dense[:, j] = op.apply(basis)
        basis[j] = 0.0
    return dense
