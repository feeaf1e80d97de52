"""Reverse-mode automatic differentiation over an explicit operation tape.

Values are 64-bit float scalars, vectors, or matrices.  Primitives in
:mod:`lht.ops` record one backward closure per application on the innermost
active :class:`Tape`; replaying the records in reverse order accumulates the
gradient of a scalar loss with respect to every tensor that influenced it.
Outside any ``with Tape()`` block the primitives run forward-only.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericalError, ShapeMismatch

__all__ = ["Tensor", "Tape", "Gradients", "active_tape"]


class Tensor:
    """A scalar, vector, or matrix of 64-bit floats tracked by identity."""

    __slots__ = ("data",)

    def __init__(self, data) -> None:
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 2:
            raise ShapeMismatch(f"tensors are at most 2-dimensional, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericalError("tensor entries must be finite")
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatch(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.shape})"


# One backward closure per primitive application: receives the gradient of the
# loss with respect to the output and returns one gradient (or None) per input.
BackwardFn = Callable[[np.ndarray], tuple]

_ACTIVE: list["Tape"] = []


def active_tape() -> "Tape | None":
    """The innermost tape currently recording, or None outside any context."""
    return _ACTIVE[-1] if _ACTIVE else None


class Tape:
    """An ordered record of primitive applications for one backward pass."""

    __slots__ = ("_records",)

    def __init__(self) -> None:
        self._records: list[tuple[Tensor, tuple[Tensor, ...], BackwardFn]] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        popped = _ACTIVE.pop()
        if popped is not self:
            raise RuntimeError("tape contexts must nest strictly")
        return False

    def __len__(self) -> int:
        return len(self._records)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: BackwardFn) -> None:
        self._records.append((out, inputs, backward))

    def gradients(self, loss: Tensor) -> "Gradients":
        """Accumulate d(loss)/d(tensor) for every tensor recorded on this tape.

        The loss must be a scalar.  Records are replayed most recent first, so
        each output's gradient is fully accumulated before its own backward
        closure runs.  The reduction order is fixed, making results
        bit-reproducible.
        """
        if loss.data.ndim != 0:
            raise ShapeMismatch(f"gradients need a scalar loss, got shape {loss.shape}")
        table: dict[int, np.ndarray] = {id(loss): np.ones(())}
        for out, inputs, backward in reversed(self._records):
            g_out = table.get(id(out))
            if g_out is None:
                continue
            for tensor, grad in zip(inputs, backward(g_out)):
                if grad is None:
                    continue
                prev = table.get(id(tensor))
                table[id(tensor)] = grad if prev is None else prev + grad
        return Gradients(table)


class Gradients:
    """Gradient lookup keyed by tensor identity; zeros for uninvolved tensors."""

    __slots__ = ("_table",)

    def __init__(self, table: dict[int, np.ndarray]) -> None:
        self._table = table

    def wrt(self, tensor: Tensor) -> np.ndarray:
        grad = self._table.get(id(tensor))
        return np.zeros_like(tensor.data) if grad is None else grad
