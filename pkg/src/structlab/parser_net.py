"""Convolutional network that predicts split scores and token heights from
shared word embeddings, plus the calibration that keeps constituents from
being informationally isolated.

The stack is a few layers of tanh(conv) over the sequence (zero-padded, so
length is preserved).  The split-score head looks at each adjacent pair of
outputs through a bottleneck with no biases; the height head looks at single
positions and carries biases on both layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .dependency import BIG, _pairwise_running_max
from .tensor import Tensor, as_tensor


@dataclass
class ParserParams:
    """Weights of the parsing network; all entries are trainable tensors."""

    convs: list = field(default_factory=list)       # [(kernel, bias), ...]
    pair_hidden: Tensor = None                      # (2d, hidden)
    pair_out: Tensor = None                         # (hidden, 1)
    height_hidden: Tensor = None                    # (d, hidden)
    height_hidden_bias: Tensor = None               # (hidden,)
    height_out: Tensor = None                       # (hidden, 1)
    height_out_bias: Tensor = None                  # (1,)

    def named(self, prefix="parser"):
        for i, (w, b) in enumerate(self.convs):
            yield f"{prefix}.conv{i}.weight", w
            yield f"{prefix}.conv{i}.bias", b
        yield f"{prefix}.pair_hidden", self.pair_hidden
        yield f"{prefix}.pair_out", self.pair_out
        yield f"{prefix}.height_hidden", self.height_hidden
        yield f"{prefix}.height_hidden_bias", self.height_hidden_bias
        yield f"{prefix}.height_out", self.height_out
        yield f"{prefix}.height_out_bias", self.height_out_bias


def init_parser_params(rng, d_model, hidden, layers, kernel, dtype=np.float64):
    def w(*shape):
        scale = 1.0 / np.sqrt(np.prod(shape[:-1]))
        return Tensor((rng.standard_normal(shape) * scale).astype(dtype),
                      requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)

    return ParserParams(
        convs=[(w(kernel, d_model, d_model), zeros(d_model)) for _ in range(layers)],
        pair_hidden=w(2 * d_model, hidden),
        pair_out=w(hidden, 1),
        height_hidden=w(d_model, hidden),
        height_hidden_bias=zeros(hidden),
        height_out=w(hidden, 1),
        height_out_bias=zeros(1),
    )


def conv_stack(params: ParserParams, x, dropout_rate=0.0, rng=None, training=False):
    """Apply the tanh(conv) layers; x is (..., n, d)."""
    for w, b in params.convs:
        x = T.tanh(T.conv1d_seq(x, w, b))
        if training and dropout_rate > 0.0:
            x = T.dropout(x, dropout_rate, rng, training)
    return x


def predict_distances(params: ParserParams, s):
    """Split scores for each adjacent position pair; (..., n, d) -> (..., n-1).

    Callers treat the scores just outside the sentence as infinite.
    """
    s = as_tensor(s)
    pairs = T.concat([s[..., :-1, :], s[..., 1:, :]], axis=-1)
    h = T.tanh(T.matmul(pairs, params.pair_hidden))
    out = T.matmul(h, params.pair_out)
    return T.reshape(out, out.shape[:-1])


def predict_heights(params: ParserParams, s):
    """Per-token heights; (..., n, d) -> (..., n)."""
    s = as_tensor(s)
    h = T.tanh(T.add(T.matmul(s, params.height_hidden), params.height_hidden_bias))
    out = T.add(T.matmul(h, params.height_out), params.height_out_bias)
    return T.reshape(out, out.shape[:-1])


def isolation_slack(tau, delta):
    """Per-span slack: how far both boundary scores of span [l, r] exceed the
    tallest height inside (ReLU-clipped), for every proper span including
    single tokens and excluding the whole sentence.  Shape (B, n, n)."""
    tau, delta = as_tensor(tau), as_tensor(delta)
    bsz, n = delta.shape
    span_max = _pairwise_running_max(delta)                       # (B, n, n)
    tau_pad = T.pad_axis(tau, -1, 1, 1, value=BIG)
    left = T.reshape(tau_pad[:, :n], (bsz, n, 1))
    right = T.reshape(tau_pad[:, 1:], (bsz, 1, n))
    slack = T.relu(T.minimum(T.sub(left, span_max), T.sub(right, span_max)))
    invalid = ~np.triu(np.ones((n, n), dtype=bool))
    invalid[0, n - 1] = True
    return T.masked_fill(slack, invalid, 0.0)


def calibrate(tau, delta, target="distance"):
    """Subtract the largest isolation slack so that no proper span keeps both
    boundary scores strictly above its internal maximum height.

    Subtracting from the split scores (default) preserves their rank order,
    hence the induced tree; `target="height"` applies the shift to the
    heights instead (provided for comparison, it deepens isolation rather
    than fixing it).
    """
    if target not in ("distance", "height"):
        raise ValueError(f"calibrate: unknown target {target!r}")
    tau, delta = as_tensor(tau), as_tensor(delta)
    single = delta.ndim == 1
    if single:
        tau = T.reshape(tau, (1,) + tau.shape)
        delta = T.reshape(delta, (1,) + delta.shape)
    bsz, n = delta.shape
    if n > 1:
        slack = isolation_slack(tau, delta)
        shift = T.tmax(T.reshape(slack, (bsz, n * n)), axis=-1, keepdims=True)
        if target == "distance":
            tau = T.sub(tau, shift)
        else:
            delta = T.sub(delta, shift)
    if single:
        tau = T.reshape(tau, tau.shape[1:])
        delta = T.reshape(delta, delta.shape[1:])
    return tau, delta
