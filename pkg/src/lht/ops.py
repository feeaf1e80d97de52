"""Differentiable primitives: forward values plus tape-recorded backward rules.

Every primitive accepts :class:`~lht.autodiff.Tensor` operands (raw arrays are
wrapped as constants), validates shapes, checks outputs for non-finite values,
and registers a vector-Jacobian product on the active tape.  Vector primitives
also accept batches: a 2-D argument is treated as one row per sample.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, active_tape
from .errors import (
    IndexOutOfRange,
    NotOneHot,
    NotOnSimplex,
    NumericalError,
    ShapeMismatch,
)

__all__ = [
    "LOG_EPS",
    "SIMPLEX_TOL",
    "affine",
    "relu",
    "softmax",
    "column_softmax",
    "batched_column_softmax",
    "apply_transition",
    "apply_constant_transition",
    "matvec",
    "reshape",
    "slice_cols",
    "add",
    "multiply",
    "scale",
    "reduce_sum",
    "reduce_mean",
    "cross_entropy",
    "cross_entropy_rows",
    "neg_entropy",
    "xlogx_sum",
]

LOG_EPS = 1e-12      # floor inside every log so exact zeros stay finite
SIMPLEX_TOL = 1e-6   # tolerance when validating probability vectors


def _tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward) -> Tensor:
    tape = active_tape()
    if tape is not None:
        tape.record(out, inputs, backward)
    return out


def _finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} produced non-finite values")
    return arr


def _check_simplex(arr: np.ndarray, context: str) -> None:
    sums = arr.sum(axis=-1)
    if arr.min() < -SIMPLEX_TOL or np.max(np.abs(sums - 1.0)) > SIMPLEX_TOL:
        raise NotOnSimplex(
            f"{context}: expected probability rows (nonnegative, summing to 1 "
            f"within {SIMPLEX_TOL}), got sums in [{sums.min():.9g}, {sums.max():.9g}] "
            f"and min entry {arr.min():.3g}"
        )


def _check_onehot(y: np.ndarray) -> int:
    if y.ndim != 1 or not np.all((y == 0.0) | (y == 1.0)) or y.sum() != 1.0:
        raise NotOneHot(f"expected a one-hot vector, got shape {y.shape}")
    return int(np.argmax(y))


# -- linear algebra -----------------------------------------------------------

def affine(x, w, b) -> Tensor:
    """w @ x + b for a vector x, or row-wise x @ w.T + b for a batch."""
    x, w, b = _tensor(x), _tensor(w), _tensor(b)
    if w.ndim != 2 or b.ndim != 1:
        raise ShapeMismatch(f"affine needs a matrix and a bias vector, got {w.shape} and {b.shape}")
    m, n = w.shape
    if b.shape[0] != m:
        raise ShapeMismatch(f"bias length {b.shape[0]} does not match {m} output rows")
    if x.ndim == 1:
        if x.shape[0] != n:
            raise ShapeMismatch(f"affine input length {x.shape[0]} does not match {n} columns")
        out = Tensor(_finite("affine", w.data @ x.data + b.data))

        def backward(g):
            return (w.data.T @ g, np.outer(g, x.data), g.copy())

    elif x.ndim == 2:
        if x.shape[1] != n:
            raise ShapeMismatch(f"affine input width {x.shape[1]} does not match {n} columns")
        out = Tensor(_finite("affine", x.data @ w.data.T + b.data))

        def backward(g):
            return (g @ w.data, g.T @ x.data, g.sum(axis=0))

    else:
        raise ShapeMismatch("affine input must be a vector or a batch of rows")
    return _record(out, (x, w, b), backward)


def relu(x) -> Tensor:
    """Elementwise max(0, x); the subgradient at 0 is taken as 0."""
    x = _tensor(x)
    mask = x.data > 0.0
    out = Tensor(np.where(mask, x.data, 0.0))

    def backward(g):
        return (np.where(mask, g, 0.0),)

    return _record(out, (x,), backward)


def matvec(m, v) -> Tensor:
    """Matrix times vector."""
    m, v = _tensor(m), _tensor(v)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeMismatch(f"matvec got shapes {m.shape} and {v.shape}")
    out = Tensor(_finite("matvec", m.data @ v.data))

    def backward(g):
        return (np.outer(g, v.data), m.data.T @ g)

    return _record(out, (m, v), backward)


def reshape(x, shape) -> Tensor:
    """View the same entries under a new shape (at most 2 dimensions)."""
    x = _tensor(x)
    try:
        arr = x.data.reshape(shape)
    except ValueError as err:
        raise ShapeMismatch(f"cannot reshape {x.shape} to {shape}") from err
    out = Tensor(arr)

    def backward(g):
        return (g.reshape(x.shape),)

    return _record(out, (x,), backward)


def slice_cols(x, start: int, stop: int) -> Tensor:
    """Contiguous slice of the last axis; the backward pass zero-pads."""
    x = _tensor(x)
    width = x.shape[-1] if x.ndim >= 1 else 0
    if not 0 <= start < stop <= width:
        raise IndexOutOfRange(f"slice [{start}:{stop}] outside width {width}")
    if x.ndim == 1:
        out = Tensor(x.data[start:stop].copy())

        def backward(g):
            gx = np.zeros_like(x.data)
            gx[start:stop] = g
            return (gx,)

    elif x.ndim == 2:
        out = Tensor(x.data[:, start:stop].copy())

        def backward(g):
            gx = np.zeros_like(x.data)
            gx[:, start:stop] = g
            return (gx,)

    else:
        raise ShapeMismatch("slice_cols needs a vector or a batch of rows")
    return _record(out, (x,), backward)


# -- elementwise and reductions -------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _tensor(a), _tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"add got shapes {a.shape} and {b.shape}")
    out = Tensor(_finite("add", a.data + b.data))

    def backward(g):
        return (g, g)

    return _record(out, (a, b), backward)


def multiply(a, b) -> Tensor:
    a, b = _tensor(a), _tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"multiply got shapes {a.shape} and {b.shape}")
    out = Tensor(_finite("multiply", a.data * b.data))

    def backward(g):
        return (g * b.data, g * a.data)

    return _record(out, (a, b), backward)


def scale(x, c: float) -> Tensor:
    x = _tensor(x)
    c = float(c)
    out = Tensor(_finite("scale", x.data * c))

    def backward(g):
        return (g * c,)

    return _record(out, (x,), backward)


def reduce_sum(x) -> Tensor:
    x = _tensor(x)
    out = Tensor(_finite("reduce_sum", np.asarray(x.data.sum())))

    def backward(g):
        return (np.full(x.shape, float(g)),)

    return _record(out, (x,), backward)


def reduce_mean(x) -> Tensor:
    x = _tensor(x)
    if x.data.size == 0:
        raise ShapeMismatch("reduce_mean of an empty tensor")
    size = x.data.size
    out = Tensor(_finite("reduce_mean", np.asarray(x.data.mean())))

    def backward(g):
        return (np.full(x.shape, float(g) / size),)

    return _record(out, (x,), backward)


# -- normalizers -----------------------------------------------------------------

def softmax(z) -> Tensor:
    """Stable softmax of a vector, or of each row of a batch."""
    z = _tensor(z)
    if z.ndim not in (1, 2):
        raise ShapeMismatch(f"softmax expects a vector or batch of rows, got shape {z.shape}")
    if not np.all(np.isfinite(z.data)):
        raise NumericalError("softmax input must be finite")
    shifted = z.data - z.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(_finite("softmax", s))

    if z.ndim == 1:
        def backward(g):
            return (s * (g - np.dot(g, s)),)
    else:
        def backward(g):
            return (s * (g - np.sum(g * s, axis=1, keepdims=True)),)

    return _record(out, (z,), backward)


def column_softmax(z) -> Tensor:
    """Softmax applied independently to each column of a matrix."""
    z = _tensor(z)
    if z.ndim != 2:
        raise ShapeMismatch(f"column_softmax expects a matrix, got shape {z.shape}")
    if not np.all(np.isfinite(z.data)):
        raise NumericalError("column_softmax input must be finite")
    shifted = z.data - z.data.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=0, keepdims=True)
    out = Tensor(_finite("column_softmax", s))

    def backward(g):
        return (s * (g - np.sum(g * s, axis=0, keepdims=True)),)

    return _record(out, (z,), backward)


def batched_column_softmax(flat, rows: int, cols: int) -> Tensor:
    """Column softmax of per-sample matrices stored flat.

    ``flat`` has shape [N, rows*cols], each row a row-major matrix; the result
    keeps that layout with every column of every per-sample matrix summing
    to 1.
    """
    flat = _tensor(flat)
    if flat.ndim != 2 or flat.shape[1] != rows * cols:
        raise ShapeMismatch(
            f"batched_column_softmax expects [N, {rows * cols}] for {rows}x{cols}, got {flat.shape}"
        )
    if not np.all(np.isfinite(flat.data)):
        raise NumericalError("batched_column_softmax input must be finite")
    t = flat.data.reshape(-1, rows, cols)
    shifted = t - t.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)
    out = Tensor(_finite("batched_column_softmax", s.reshape(-1, rows * cols)))

    def backward(g):
        g3 = g.reshape(-1, rows, cols)
        return ((s * (g3 - np.sum(g3 * s, axis=1, keepdims=True))).reshape(-1, rows * cols),)

    return _record(out, (flat,), backward)


# -- transition application --------------------------------------------------------

def apply_transition(flat, p, rows: int, cols: int) -> Tensor:
    """Per-sample matrix-vector products: out[i] = mat_i @ p[i].

    ``flat`` holds one row-major [rows, cols] matrix per sample; ``p`` holds
    one length-``cols`` vector per sample.
    """
    flat, p = _tensor(flat), _tensor(p)
    if flat.ndim != 2 or flat.shape[1] != rows * cols:
        raise ShapeMismatch(
            f"apply_transition expects matrices [N, {rows * cols}], got {flat.shape}"
        )
    if p.ndim != 2 or p.shape[1] != cols or p.shape[0] != flat.shape[0]:
        raise ShapeMismatch(
            f"apply_transition expects vectors [{flat.shape[0]}, {cols}], got {p.shape}"
        )
    t3 = flat.data.reshape(-1, rows, cols)
    out = Tensor(_finite("apply_transition", np.einsum("nij,nj->ni", t3, p.data)))

    def backward(g):
        g_flat = np.einsum("ni,nj->nij", g, p.data).reshape(-1, rows * cols)
        g_p = np.einsum("ni,nij->nj", g, t3)
        return (g_flat, g_p)

    return _record(out, (flat, p), backward)


def apply_constant_transition(p, matrix: np.ndarray) -> Tensor:
    """Multiply probabilities by a fixed matrix shared across the batch."""
    p = _tensor(p)
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatch(f"constant transition must be a matrix, got shape {m.shape}")
    if p.ndim == 1:
        if p.shape[0] != m.shape[1]:
            raise ShapeMismatch(f"transition {m.shape} cannot consume vector {p.shape}")
        out = Tensor(_finite("apply_constant_transition", m @ p.data))

        def backward(g):
            return (m.T @ g,)

    elif p.ndim == 2:
        if p.shape[1] != m.shape[1]:
            raise ShapeMismatch(f"transition {m.shape} cannot consume batch {p.shape}")
        out = Tensor(_finite("apply_constant_transition", p.data @ m.T))

        def backward(g):
            return (g @ m,)

    else:
        raise ShapeMismatch("apply_constant_transition needs a vector or a batch of rows")
    return _record(out, (p,), backward)


# -- losses ---------------------------------------------------------------------

def cross_entropy(p, y, validate: bool = True) -> Tensor:
    """-log p[class] for a probability vector and a one-hot target.

    The probability is floored at ``LOG_EPS`` before the log; inside that
    clamp the gradient is 0.  ``validate=False`` skips the simplex and
    one-hot checks (used by gradient checkers that perturb off the simplex).
    """
    p = _tensor(p)
    y_arr = np.asarray(y, dtype=np.float64)
    if p.ndim != 1 or y_arr.shape != p.shape:
        raise ShapeMismatch(f"cross_entropy got probability shape {p.shape} and target shape {y_arr.shape}")
    if validate:
        _check_simplex(p.data, "cross_entropy")
        idx = _check_onehot(y_arr)
    else:
        idx = int(np.argmax(y_arr))
    picked = float(p.data[idx])
    out = Tensor(np.asarray(-np.log(max(picked, LOG_EPS))))

    def backward(g):
        gp = np.zeros_like(p.data)
        if picked > LOG_EPS:
            gp[idx] = -float(g) / picked
        return (gp,)

    return _record(out, (p,), backward)


def cross_entropy_rows(p, labels, validate: bool = True) -> Tensor:
    """Per-row -log p[i, labels[i]] for a batch of probability rows."""
    p = _tensor(p)
    if p.ndim != 2:
        raise ShapeMismatch(f"cross_entropy_rows expects a batch of rows, got shape {p.shape}")
    idx = np.asarray(labels, dtype=np.int64)
    n, c = p.shape
    if idx.shape != (n,):
        raise ShapeMismatch(f"expected {n} labels, got shape {idx.shape}")
    if idx.min(initial=0) < 0 or idx.max(initial=0) >= c:
        raise IndexOutOfRange(f"labels outside [0, {c})")
    if validate:
        _check_simplex(p.data, "cross_entropy_rows")
    picked = p.data[np.arange(n), idx]
    out = Tensor(-np.log(np.maximum(picked, LOG_EPS)))

    def backward(g):
        gp = np.zeros_like(p.data)
        live = picked > LOG_EPS
        rows = np.arange(n)[live]
        gp[rows, idx[live]] = -g[live] / picked[live]
        return (gp,)

    return _record(out, (p,), backward)


def neg_entropy(p, validate: bool = True) -> Tensor:
    """Sum of p_i * log p_i over a probability vector, with 0*log(0) = 0."""
    p = _tensor(p)
    if p.ndim != 1:
        raise ShapeMismatch(f"neg_entropy expects a vector, got shape {p.shape}")
    if validate:
        _check_simplex(p.data, "neg_entropy")
    pos = p.data > 0.0
    logs = np.log(np.maximum(p.data, LOG_EPS))
    out = Tensor(np.asarray(np.where(pos, p.data * logs, 0.0).sum()))

    def backward(g):
        return (np.where(pos, (logs + 1.0) * float(g), 0.0),)

    return _record(out, (p,), backward)


def xlogx_sum(x) -> Tensor:
    """Sum of x * log x over all entries of a nonnegative tensor.

    The convention 0*log(0) = 0 makes one-hot columns contribute exactly 0;
    no simplex validation is applied, so flattened stacks of transition
    matrices can be reduced in one call.
    """
    x = _tensor(x)
    if x.data.size and x.data.min() < 0.0:
        raise NumericalError("xlogx_sum needs nonnegative entries")
    pos = x.data > 0.0
    logs = np.log(np.maximum(x.data, LOG_EPS))
    out = Tensor(np.asarray(np.where(pos, x.data * logs, 0.0).sum()))

    def backward(g):
        return (np.where(pos, (logs + 1.0) * float(g), 0.0),)

    return _record(out, (x,), backward)
