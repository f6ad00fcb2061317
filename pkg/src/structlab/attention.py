"""Dependency-constrained multi-head self-attention.

Each head mixes the parent distribution with its transpose (a learned
two-way choice between looking at parents and looking at dependents), gates
every token pair with an independent sigmoid of the scaled query-key score,
and takes the plain weighted sum of values.  There is no row normalization:
a row of effective weights lies in [0, 1] elementwise, and zero propagation
probability provably blocks information flow from that token.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor, as_tensor

RELATION_CHOICES = ("parent+dep", "parent", "dep")


@dataclass
class HeadRelationWeights:
    """Per-head scalars scoring the parent and dependent relations."""

    w_parent: Tensor   # (heads,)
    w_dep: Tensor      # (heads,)

    def named(self, prefix):
        yield f"{prefix}.w_parent", self.w_parent
        yield f"{prefix}.w_dep", self.w_dep


@dataclass
class MultiHeadParams:
    """Projections for all heads stacked into single matrices."""

    heads: int
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    relation: HeadRelationWeights

    @property
    def d_k(self):
        return self.wq.shape[1] // self.heads

    def named(self, prefix):
        for n in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"):
            yield f"{prefix}.{n}", getattr(self, n)
        yield from self.relation.named(prefix)


def init_multi_head_params(rng, d_model, heads, dtype=np.float64):
    if d_model % heads:
        raise ValueError(f"d_model {d_model} not divisible by {heads} heads")

    def w():
        return Tensor((rng.standard_normal((d_model, d_model))
                       / np.sqrt(d_model)).astype(dtype), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)

    return MultiHeadParams(
        heads=heads, wq=w(), bq=zeros(d_model), wk=w(), bk=zeros(d_model),
        wv=w(), bv=zeros(d_model), wo=w(), bo=zeros(d_model),
        relation=HeadRelationWeights(zeros(heads), zeros(heads)))


def relation_mix(weights: HeadRelationWeights, relations="parent+dep"):
    """Two-way softmax over the relation scores; the restricted settings pin
    the mix to a single relation for every head."""
    if relations not in RELATION_CHOICES:
        raise ValueError(f"unknown relation subset {relations!r}")
    heads = weights.w_parent.shape[0]
    dtype = weights.w_parent.dtype
    if relations == "parent":
        return Tensor(np.ones(heads, dtype=dtype)), Tensor(np.zeros(heads, dtype=dtype))
    if relations == "dep":
        return Tensor(np.zeros(heads, dtype=dtype)), Tensor(np.ones(heads, dtype=dtype))
    p_parent = T.sigmoid(T.sub(weights.w_parent, weights.w_dep))
    return p_parent, T.sub(1.0, p_parent)


def propagation_probs(p, mix):
    """Convex head-wise mix of the parent matrix and its transpose.

    p is (B, n, n); the result is (B, heads, n, n) with
    out[b, h, i, j] = p_parent[h] * p[b, i, j] + p_dep[h] * p[b, j, i].
    """
    p = as_tensor(p)
    p_parent, p_dep = mix
    heads = p_parent.shape[0]
    bsz, n, _ = p.shape
    p4 = T.reshape(p, (bsz, 1, n, n))
    pt4 = T.swapaxes(p4, -1, -2)
    shape = (1, heads, 1, 1)
    return T.add(T.mul(T.reshape(p_parent, shape), p4),
                 T.mul(T.reshape(p_dep, shape), pt4))


def attention_gate(q, k, d_k):
    """Elementwise sigmoid of the scaled dot-product scores; values in
    (0, 1), rows deliberately unnormalized."""
    q, k = as_tensor(q), as_tensor(k)
    scores = T.div(T.matmul(q, T.swapaxes(k, -1, -2)), float(np.sqrt(d_k)))
    return T.sigmoid(scores)


def constrained_attention(q, k, v, p, mix):
    """Single-head attention output (prop * gate) @ v, same rank as v.

    mix is a (p_parent, p_dep) pair of scalars for this head.
    """
    q, v, p = as_tensor(q), as_tensor(v), as_tensor(p)
    pp, pd = mix
    prop = T.add(T.mul(pp, p), T.mul(pd, T.swapaxes(p, -1, -2)))
    gate = attention_gate(q, k, q.shape[-1])
    return T.matmul(T.mul(prop, gate), v)


def multi_head_attention(params: MultiHeadParams, x, p=None,
                         relations="parent+dep", mode="structured"):
    """Full multi-head layer over x (B, n, d_model).

    mode "structured" uses the dependency-constrained weights (requires p);
    mode "softmax" is the standard row-normalized attention and ignores p,
    giving the baseline encoder the exact same code path otherwise.
    """
    x = as_tensor(x)
    bsz, n, d_model = x.shape
    heads, d_k = params.heads, params.d_k

    def project(w, b):
        y = T.add(T.matmul(x, w), b)
        return T.swapaxes(T.reshape(y, (bsz, n, heads, d_k)), 1, 2)

    q = project(params.wq, params.bq)
    k = project(params.wk, params.bk)
    v = project(params.wv, params.bv)
    scores = T.div(T.matmul(q, T.swapaxes(k, -1, -2)), float(np.sqrt(d_k)))
    if mode == "structured":
        if p is None:
            raise ValueError("structured attention needs a parent distribution")
        mix = relation_mix(params.relation, relations)
        weights = T.mul(propagation_probs(p, mix), T.sigmoid(scores))
    elif mode == "softmax":
        weights = T.softmax(scores, axis=-1)
    else:
        raise ValueError(f"unknown attention mode {mode!r}")
    ctx = T.matmul(weights, v)                                   # (B, h, n, d_k)
    ctx = T.reshape(T.swapaxes(ctx, 1, 2), (bsz, n, d_model))
    return T.add(T.matmul(ctx, params.wo), params.bo)
