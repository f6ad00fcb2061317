"""Dense tensors with reverse-mode automatic differentiation on top of numpy.

Ops executed while a :class:`Tape` is active are recorded; ``Tape.backward``
replays the record in reverse and accumulates gradients into every reachable
tensor with ``requires_grad``.  Outside a tape nothing is recorded, so
inference pays no bookkeeping cost.

Conventions:
  * a tape is single-threaded; independent tapes may run concurrently,
  * parameters are plain ``Tensor(requires_grad=True)`` leaves,
  * hard max/min ops route the gradient to the first (leftmost) extremum,
  * dtype follows the operands (float64 for tests, float32 for training).
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, ShapeError

_TAPES: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_grad_borrowed")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._grad_borrowed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


class Tape:
    """Ordered record of executed ops with references to inputs/outputs."""

    def __init__(self):
        self._nodes = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False

    def backward(self, loss: Tensor):
        """Accumulate d(loss)/d(x) into x.grad for every reachable tensor."""
        if loss.data.size != 1:
            raise NumericalError(
                f"backward requires a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for out, _inputs, bw in reversed(self._nodes):
            if out.grad is not None:
                bw(out.grad)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def constant(x, dtype=None) -> Tensor:
    """A tensor that never tracks gradients (detached constant)."""
    return Tensor(np.asarray(x.data if isinstance(x, Tensor) else x, dtype=dtype))


def _tracking(*tensors) -> bool:
    return bool(_TAPES) and any(t.requires_grad for t in tensors)


def _record(out, inputs, bw):
    _TAPES[-1]._nodes.append((out, inputs, bw))


def _accum(t: Tensor, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        if g.shape == t.data.shape:
            # borrow the buffer; copy-on-write below keeps aliases safe
            t.grad = g
            t._grad_borrowed = True
        else:
            t.grad = np.array(np.broadcast_to(g, t.data.shape), dtype=t.data.dtype)
            t._grad_borrowed = False
    elif t._grad_borrowed:
        t.grad = t.grad + g
        t._grad_borrowed = False
    else:
        t.grad += g


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to `shape`."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcast_check(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("add", a, b)
    out = Tensor(a.data + b.data, requires_grad=_tracking(a, b))
    if out.requires_grad:
        def bw(g):
            _accum(a, _unbroadcast(g, a.shape))
            _accum(b, _unbroadcast(g, b.shape))
        _record(out, (a, b), bw)
    return out


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("sub", a, b)
    out = Tensor(a.data - b.data, requires_grad=_tracking(a, b))
    if out.requires_grad:
        def bw(g):
            _accum(a, _unbroadcast(g, a.shape))
            _accum(b, _unbroadcast(-g, b.shape))
        _record(out, (a, b), bw)
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("mul", a, b)
    out = Tensor(a.data * b.data, requires_grad=_tracking(a, b))
    if out.requires_grad:
        def bw(g):
            _accum(a, _unbroadcast(g * b.data, a.shape))
            _accum(b, _unbroadcast(g * a.data, b.shape))
        _record(out, (a, b), bw)
    return out


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("div", a, b)
    out = Tensor(a.data / b.data, requires_grad=_tracking(a, b))
    if out.requires_grad:
        def bw(g):
            _accum(a, _unbroadcast(g / b.data, a.shape))
            _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))
        _record(out, (a, b), bw)
    return out


def neg(a):
    a = as_tensor(a)
    out = Tensor(-a.data, requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, -g)
        _record(out, (a,), bw)
    return out


def minimum(a, b):
    """Elementwise min; on ties the gradient goes to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("minimum", a, b)
    out = Tensor(np.minimum(a.data, b.data), requires_grad=_tracking(a, b))
    if out.requires_grad:
        take_a = a.data <= b.data
        def bw(g):
            _accum(a, _unbroadcast(g * take_a, a.shape))
            _accum(b, _unbroadcast(g * ~take_a, b.shape))
        _record(out, (a, b), bw)
    return out


def maximum(a, b):
    """Elementwise max; on ties the gradient goes to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("maximum", a, b)
    out = Tensor(np.maximum(a.data, b.data), requires_grad=_tracking(a, b))
    if out.requires_grad:
        take_a = a.data >= b.data
        def bw(g):
            _accum(a, _unbroadcast(g * take_a, a.shape))
            _accum(b, _unbroadcast(g * ~take_a, b.shape))
        _record(out, (a, b), bw)
    return out


def clip_min(a, floor):
    """max(a, floor) with a constant floor; gradient passes where a > floor."""
    a = as_tensor(a)
    out = Tensor(np.maximum(a.data, floor), requires_grad=_tracking(a))
    if out.requires_grad:
        keep = a.data > floor
        def bw(g):
            _accum(a, g * keep)
        _record(out, (a,), bw)
    return out


# ---------------------------------------------------------------------------
# nonlinearities

def _sigmoid_data(x):
    # exp of a non-positive argument never overflows and maps +-inf to 1/0
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid(a):
    a = as_tensor(a)
    y = _sigmoid_data(a.data)
    out = Tensor(y, requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, g * y * (1.0 - y))
        _record(out, (a,), bw)
    return out


def tanh(a):
    a = as_tensor(a)
    y = np.tanh(a.data)
    out = Tensor(y, requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, g * (1.0 - y * y))
        _record(out, (a,), bw)
    return out


def relu(a):
    a = as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), requires_grad=_tracking(a))
    if out.requires_grad:
        pos = a.data > 0
        def bw(g):
            _accum(a, g * pos)
        _record(out, (a,), bw)
    return out


def exp(a):
    a = as_tensor(a)
    y = np.exp(a.data)
    out = Tensor(y, requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, g * y)
        _record(out, (a,), bw)
    return out


def log(a):
    a = as_tensor(a)
    out = Tensor(np.log(a.data), requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, g / a.data)
        _record(out, (a,), bw)
    return out


def sqrt(a):
    a = as_tensor(a)
    y = np.sqrt(a.data)
    out = Tensor(y, requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, g / (2.0 * y))
        _record(out, (a,), bw)
    return out


def softplus(a):
    """log(1 + exp(a)), computed stably; derivative is sigmoid(a)."""
    a = as_tensor(a)
    out = Tensor(np.logaddexp(0.0, a.data), requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, g * _sigmoid_data(a.data))
        _record(out, (a,), bw)
    return out


def softmax(a, axis=-1):
    """Normalized exponentials along `axis`; rows sum to 1."""
    a = as_tensor(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            dot = (g * y).sum(axis=axis, keepdims=True)
            _accum(a, y * (g - dot))
        _record(out, (a,), bw)
    return out


# ---------------------------------------------------------------------------
# shape plumbing

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be >=2-d, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    try:
        data = a.data @ b.data
    except ValueError:
        raise ShapeError(f"matmul: batch dims do not broadcast, {a.shape} vs {b.shape}") from None
    out = Tensor(data, requires_grad=_tracking(a, b))
    if out.requires_grad:
        def bw(g):
            if a.requires_grad:
                _accum(a, _unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape))
            if b.requires_grad:
                if b.ndim == 2 and g.ndim > 2:
                    # batched activations against a shared weight: one flat
                    # GEMM instead of a per-item outer-product tensor
                    a2 = a.data.reshape(-1, a.shape[-1])
                    _accum(b, a2.T @ g.reshape(-1, g.shape[-1]))
                else:
                    _accum(b, _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape))
        _record(out, (a, b), bw)
    return out


def swapaxes(a, ax1, ax2):
    a = as_tensor(a)
    out = Tensor(a.data.swapaxes(ax1, ax2), requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, g.swapaxes(ax1, ax2))
        _record(out, (a,), bw)
    return out


def reshape(a, shape):
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape), requires_grad=_tracking(a))
    if out.requires_grad:
        orig = a.shape
        def bw(g):
            _accum(a, g.reshape(orig))
        _record(out, (a,), bw)
    return out


def _basic_key(key):
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(p, (int, np.integer, slice, type(None), type(Ellipsis))) for p in parts)


def getitem(a, key):
    a = as_tensor(a)
    out = Tensor(a.data[key], requires_grad=_tracking(a))
    if out.requires_grad:
        basic = _basic_key(key)
        def bw(g):
            gx = np.zeros_like(a.data)
            if basic:
                gx[key] += g
            else:
                np.add.at(gx, key, g)
            _accum(a, gx)
        _record(out, (a,), bw)
    return out


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = Tensor(data, requires_grad=_tracking(*tensors))
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)
        def bw(g):
            for t, s, e in zip(tensors, offsets[:-1], offsets[1:]):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(s, e)
                _accum(t, g[tuple(idx)])
        _record(out, tensors, bw)
    return out


def pad_axis(a, axis, before, after, value=0.0):
    """Constant-pad one axis; gradient slices the interior back out."""
    a = as_tensor(a)
    widths = [(0, 0)] * a.ndim
    widths[axis] = (before, after)
    data = np.pad(a.data, widths, constant_values=value)
    out = Tensor(data, requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(before, g.shape[axis] - after)
            _accum(a, g[tuple(idx)])
        _record(out, (a,), bw)
    return out


def broadcast_to(a, shape):
    a = as_tensor(a)
    try:
        data = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError(f"broadcast_to: cannot broadcast {a.shape} to {shape}") from None
    out = Tensor(data, requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, _unbroadcast(g, a.shape))
        _record(out, (a,), bw)
    return out


def masked_fill(a, mask, value):
    """Replace entries where `mask` (a constant bool array) is True."""
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    out = Tensor(np.where(mask, value, a.data), requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            _accum(a, _unbroadcast(g * ~mask, a.shape))
        _record(out, (a,), bw)
    return out


def take_along_last(a, idx):
    """Gather along the last axis with a constant integer index array."""
    a = as_tensor(a)
    idx = np.asarray(idx)
    idx_b = np.broadcast_to(idx, a.shape[:-1] + (idx.shape[-1],))
    out = Tensor(np.take_along_axis(a.data, idx_b, axis=-1), requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            gx = np.zeros_like(a.data)
            flat = gx.reshape(-1, gx.shape[-1])
            rows = np.arange(flat.shape[0])[:, None]
            np.add.at(flat, (rows, idx_b.reshape(flat.shape[0], -1)),
                      g.reshape(flat.shape[0], -1))
            _accum(a, gx)
        _record(out, (a,), bw)
    return out


# ---------------------------------------------------------------------------
# reductions and scans

def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(g, a.shape).copy())
        _record(out, (a,), bw)
    return out


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod([a.shape[x] for x in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def tmax(a, axis, keepdims=False):
    """Hard max along one axis; subgradient goes to the first argmax."""
    a = as_tensor(a)
    data = a.data.max(axis=axis, keepdims=keepdims)
    out = Tensor(data, requires_grad=_tracking(a))
    if out.requires_grad:
        am = np.argmax(a.data, axis=axis)
        def bw(g):
            if not keepdims:
                g = np.expand_dims(g, axis)
            gx = np.zeros_like(a.data)
            np.put_along_axis(gx, np.expand_dims(am, axis), g, axis)
            _accum(a, gx)
        _record(out, (a,), bw)
    return out


def _scan_prep(data, axis, reverse):
    x = np.moveaxis(data, axis, -1)
    if reverse:
        x = np.flip(x, axis=-1)
    return x


def _scan_restore(x, axis, reverse):
    if reverse:
        x = np.flip(x, axis=-1)
    return np.moveaxis(x, -1, axis)


def running_max(a, axis=-1, reverse=False):
    """Windowed running maximum along `axis` (prefix windows; suffix when
    `reverse`).  The subgradient of each window routes entirely to its first
    (leftmost in scan order) argmax element."""
    a = as_tensor(a)
    x = _scan_prep(a.data, axis, reverse)
    cm = np.maximum.accumulate(x, axis=-1)
    out = Tensor(_scan_restore(cm, axis, reverse), requires_grad=_tracking(a))
    if out.requires_grad:
        n = x.shape[-1]
        shifted = np.concatenate(
            [np.full(x.shape[:-1] + (1,), -np.inf, dtype=x.dtype), cm[..., :-1]], axis=-1)
        isnew = x > shifted
        idx = np.maximum.accumulate(
            np.where(isnew, np.arange(n), -1), axis=-1)
        def bw(g):
            gs = _scan_prep(g, axis, reverse)
            lead = int(np.prod(x.shape[:-1])) if x.ndim > 1 else 1
            g2 = gs.reshape(lead, n)
            idx2 = idx.reshape(lead, n)
            gx2 = np.zeros((lead, n), dtype=g2.dtype)
            valid = idx2 >= 0
            rows = np.arange(lead)[:, None]
            np.add.at(gx2, (rows, np.where(valid, idx2, 0)), np.where(valid, g2, 0.0))
            _accum(a, _scan_restore(gx2.reshape(x.shape), axis, reverse))
        _record(out, (a,), bw)
    return out


def cumsum(a, axis=-1, reverse=False):
    a = as_tensor(a)
    x = _scan_prep(a.data, axis, reverse)
    out = Tensor(_scan_restore(np.cumsum(x, axis=-1), axis, reverse),
                 requires_grad=_tracking(a))
    if out.requires_grad:
        def bw(g):
            gs = _scan_prep(g, axis, reverse)
            acc = np.flip(np.cumsum(np.flip(gs, axis=-1), axis=-1), axis=-1)
            _accum(a, _scan_restore(acc, axis, reverse))
        _record(out, (a,), bw)
    return out


# ---------------------------------------------------------------------------
# neural-net fused ops

def layer_norm(a, gain, bias, eps=1e-5):
    """Normalize the last axis to mean 0 / variance 1, then rescale."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    if gain.shape != a.shape[-1:] or bias.shape != a.shape[-1:]:
        raise ShapeError(
            f"layer_norm: affine shapes {gain.shape}/{bias.shape} do not match input {a.shape}")
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    out = Tensor(xhat * gain.data + bias.data, requires_grad=_tracking(a, gain, bias))
    if out.requires_grad:
        def bw(g):
            lead = tuple(range(g.ndim - 1))
            _accum(gain, (g * xhat).sum(axis=lead))
            _accum(bias, g.sum(axis=lead))
            gy = g * gain.data
            gx = inv * (gy - gy.mean(axis=-1, keepdims=True)
                        - xhat * (gy * xhat).mean(axis=-1, keepdims=True))
            _accum(a, gx)
        _record(out, (a, gain, bias), bw)
    return out


def dropout(a, rate, rng, training=True):
    """Inverted dropout; identity when rate == 0 or not training."""
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout: rate must be in [0, 1), got {rate}")
    a = as_tensor(a)
    if not training or rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.dtype) / (1.0 - rate)
    return mul(a, Tensor(keep))


def embedding(table, ids):
    """Row lookup into `table` with an integer id array."""
    table = as_tensor(table)
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError(f"embedding: ids must be integers, got dtype {ids.dtype}")
    out = Tensor(table.data[ids], requires_grad=_tracking(table))
    if out.requires_grad:
        def bw(g):
            gt = np.zeros_like(table.data)
            np.add.at(gt, ids, g)
            _accum(table, gt)
        _record(out, (table,), bw)
    return out


def conv1d_seq(a, weight, bias=None):
    """1-d convolution over the sequence axis (second-to-last).

    `a` is (..., n, d_in), `weight` is (k, d_in, d_out) with odd k; the input
    is zero-padded on both sides so the output keeps length n.
    """
    a, weight = as_tensor(a), as_tensor(weight)
    if weight.ndim != 3:
        raise ShapeError(f"conv1d: kernel must be (k, d_in, d_out), got {weight.shape}")
    k, d_in, d_out = weight.shape
    if k % 2 == 0:
        raise ShapeError(f"conv1d: kernel width must be odd, got {k}")
    if a.ndim < 2 or a.shape[-1] != d_in:
        raise ShapeError(f"conv1d: input {a.shape} does not match kernel {weight.shape}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (d_out,):
            raise ShapeError(f"conv1d: bias {bias.shape} does not match kernel {weight.shape}")
    n = a.shape[-2]
    pad = k // 2
    widths = [(0, 0)] * (a.ndim - 2) + [(pad, pad), (0, 0)]
    xp = np.pad(a.data, widths)
    data = np.zeros(a.shape[:-1] + (d_out,), dtype=a.dtype)
    taps = []
    for o in range(k):
        sl = xp[..., o:o + n, :]
        taps.append(sl)
        data += sl @ weight.data[o]
    if bias is not None:
        data += bias.data
    inputs = (a, weight) if bias is None else (a, weight, bias)
    out = Tensor(data, requires_grad=_tracking(*inputs))
    if out.requires_grad:
        def bw(g):
            g2 = g.reshape(-1, d_out)
            gxp = np.zeros_like(xp)
            gw = np.zeros_like(weight.data)
            for o in range(k):
                gw[o] = taps[o].reshape(-1, d_in).T @ g2
                gxp[..., o:o + n, :] += g @ weight.data[o].T
            _accum(a, gxp[..., pad:pad + n, :])
            _accum(weight, gw)
            if bias is not None:
                _accum(bias, g2.sum(axis=0))
        _record(out, inputs, bw)
    return out


def cross_entropy(logits, targets):
    """Mean negative log-likelihood of integer `targets` under row softmax."""
    logits = as_tensor(logits)
    targets = np.asarray(targets)
    if logits.ndim != 2 or targets.ndim != 1 or logits.shape[0] != targets.shape[0]:
        raise ShapeError(
            f"cross_entropy: logits {logits.shape} incompatible with targets {targets.shape}")
    m = logits.shape[0]
    if m == 0:
        raise ShapeError("cross_entropy: no target positions")
    mx = logits.data.max(axis=-1, keepdims=True)
    lse = mx + np.log(np.exp(logits.data - mx).sum(axis=-1, keepdims=True))
    rows = np.arange(m)
    nll = lse[:, 0] - logits.data[rows, targets]
    out = Tensor(np.asarray(nll.mean(), dtype=logits.dtype), requires_grad=_tracking(logits))
    if out.requires_grad:
        def bw(g):
            p = np.exp(logits.data - lse)
            p[rows, targets] -= 1.0
            _accum(logits, p * (g / m))
        _record(out, (logits,), bw)
    return out
