"""Differentiable estimate of the parent distribution from split scores and
token heights, plus its hard argmax decoding.

For token i, the smallest legal constituent is the span reaching until the
first split score above the token's height on each side.  That containment
event is relaxed with a temperature-scaled sigmoid of (height - running max
of split scores), so the span endpoints get proper probability distributions
(the running-max telescoping makes them sum to 1).  A second temperature
turns "tallest token in the span" into a softmax.  Marginalizing the span
out yields P[i, j] = probability that token j is token i's parent.

Cost: the full matrix is assembled in O(n^3) time and memory (a naive sum
over spans and parents would be O(n^4)); rows carry at most unit mass, the
diagonal is exactly zero, and the missing mass is the probability that the
sampled span's tallest token is i itself.

Boundary sentinels: the split scores just outside the sentence are treated
as infinite, so a height never crosses them.  Internally they are stored as
a large finite constant: the sigmoid saturates to exactly 0/1 there anyway,
while a literal inf would poison the temperature gradients with 0 * inf.
All functions accept plain arrays or tensors and run on the tape when one
is active.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor, as_tensor

INF = np.inf
BIG = 1e30  # finite stand-in for the infinite boundary scores


def _floor_for(dtype):
    # keeps 1/Z, its square (division backward), and O(n^2) partial sums
    # finite in either precision
    return 1e-12 if dtype == np.float32 else 1e-150


def prob_height_exceeds(delta_i, tau_k, mu1):
    """Probability that a relaxed height exceeds a split score:
    sigmoid((delta - tau) / mu1).  A +inf score gives exactly 0."""
    delta_i, tau_k = as_tensor(delta_i), as_tensor(tau_k)
    return T.sigmoid(T.div(T.sub(delta_i, tau_k), mu1))


def left_boundary_probs(i, tau, delta_i, mu1):
    """Distribution over the left endpoint l = 0..i of token i's span.

    Entry l is the telescoped difference of containment probabilities, so
    the vector sums to 1 exactly.
    """
    tau = as_tensor(tau)
    tau_pad = T.pad_axis(tau, -1, 1, 1, value=BIG)
    # incl[l] = max of split scores between tokens l-1 and i; shifting by one
    # gives the maxima between l and i, with an empty window at l = i
    incl = T.running_max(tau_pad[: i + 1], reverse=True)
    excl = T.concat([incl[1:], Tensor(np.full(1, -BIG, dtype=tau.dtype))], axis=-1)
    inside = prob_height_exceeds(delta_i, excl, mu1)
    outside = prob_height_exceeds(delta_i, incl, mu1)
    return T.sub(inside, outside)


def right_boundary_probs(i, tau, delta_i, mu1):
    """Mirror image of :func:`left_boundary_probs` over r = i..n-1."""
    tau = as_tensor(tau)
    n = tau.shape[-1] + 1
    tau_pad = T.pad_axis(tau, -1, 1, 1, value=BIG)
    incl = T.running_max(tau_pad[i + 1: n + 1])
    excl = T.concat([Tensor(np.full(1, -BIG, dtype=tau.dtype)), incl[:-1]], axis=-1)
    inside = prob_height_exceeds(delta_i, excl, mu1)
    outside = prob_height_exceeds(delta_i, incl, mu1)
    return T.sub(inside, outside)


def constituent_probs(i, tau, delta, mu1):
    """Joint distribution over spans (l, r) containing token i, as an n x n
    matrix; zero whenever i lies outside [l, r]."""
    tau, delta = as_tensor(tau), as_tensor(delta)
    n = delta.shape[-1]
    pl = T.pad_axis(left_boundary_probs(i, tau, delta[i], mu1), -1, 0, n - 1 - i)
    pr = T.pad_axis(right_boundary_probs(i, tau, delta[i], mu1), -1, i, 0)
    return T.matmul(T.reshape(pl, (n, 1)), T.reshape(pr, (1, n)))


def span_parent_probs(l, r, delta, mu2):
    """Softmax of height/mu2 over tokens l..r, embedded in an n-vector."""
    delta = as_tensor(delta)
    n = delta.shape[-1]
    sm = T.softmax(T.div(delta[l: r + 1], mu2), axis=-1)
    return T.pad_axis(sm, -1, l, n - 1 - r)


def _pairwise_running_max(padded):
    """M[a, k] = max(padded[a..k]) for k >= a, -inf below the diagonal."""
    m = padded.shape[-1]
    lead = padded.shape[:-1]
    tiled = T.broadcast_to(T.reshape(padded, lead + (1, m)), lead + (m, m))
    below = ~np.triu(np.ones((m, m), dtype=bool))
    return T.running_max(T.masked_fill(tiled, below, -BIG), axis=-1)


def boundary_matrices(tau, delta, mu1):
    """Batched left/right endpoint distributions.

    tau (B, n-1) and delta (B, n) give PL, PR of shape (B, n, n) where
    PL[b, i, l] = p(l | i) and PR[b, i, r] = p(r | i); entries outside
    l <= i <= r are exactly zero.
    """
    tau, delta = as_tensor(tau), as_tensor(delta)
    bsz, n = delta.shape
    tau_pad = T.pad_axis(tau, -1, 1, 1, value=BIG)
    bet = _pairwise_running_max(tau_pad)            # (B, n+1, n+1)
    d = T.reshape(delta, (bsz, n, 1))
    hi = bet[:, 1:, :n]                             # [a-1, k] -> max(pad[a..k])
    lo = bet[:, :n, :n]
    hi_next = bet[:, 1:, 1:]
    pl = T.sub(prob_height_exceeds(d, T.swapaxes(hi, -1, -2), mu1),
               prob_height_exceeds(d, T.swapaxes(lo, -1, -2), mu1))
    pr = T.sub(prob_height_exceeds(d, hi, mu1),
               prob_height_exceeds(d, hi_next, mu1))
    return pl, pr


def parent_distribution(tau, delta, mu1, mu2):
    """Parent probability matrix P[i, j]; accepts a single sentence
    (tau (n-1,), delta (n,)) or a batch ((B, n-1), (B, n))."""
    tau, delta = as_tensor(tau), as_tensor(delta)
    single = delta.ndim == 1
    if single:
        tau = T.reshape(tau, (1,) + tau.shape)
        delta = T.reshape(delta, (1,) + delta.shape)
    bsz, n = delta.shape
    pl, pr = boundary_matrices(tau, delta, mu1)

    # per-sentence max shift keeps the exponentials in range without
    # changing any span softmax
    shift = T.constant(delta.data.max(axis=-1, keepdims=True))
    e = T.exp(T.div(T.sub(delta, shift), mu2))      # (B, n)
    prefix = T.pad_axis(T.cumsum(e, axis=-1), -1, 1, 0)
    z = T.sub(T.reshape(prefix[:, 1:], (bsz, 1, n)),
              T.reshape(prefix[:, :n], (bsz, n, 1)))  # z[l, r] = sum e[l..r]
    # the prefix-sum difference cancels catastrophically for spans whose
    # exponentials are all far below the sentence maximum; the sum is always
    # at least its largest term, which a per-span running max of the heights
    # reconstructs without cancellation
    span_max = _pairwise_running_max(delta)          # (B, n, n) over [l, r]
    espan = T.exp(T.div(T.sub(span_max, T.reshape(shift, (bsz, 1, 1))), mu2))
    inv = T.div(1.0, T.clip_min(T.maximum(z, espan), _floor_for(delta.dtype)))

    w = T.mul(T.mul(T.reshape(pl, (bsz, n, n, 1)), T.reshape(pr, (bsz, n, 1, n))),
              T.reshape(inv, (bsz, 1, n, n)))
    acc = T.cumsum(w, axis=2)                       # sum over l <= a
    acc = T.cumsum(acc, axis=3, reverse=True)       # sum over r >= b
    ij = np.arange(n)
    lo_idx = np.minimum(ij[:, None], ij[None, :])
    hi_idx = np.maximum(ij[:, None], ij[None, :])
    flat_idx = lo_idx * n + hi_idx                  # (n, n), row i picks (min, max)
    picked = T.take_along_last(T.reshape(acc, (bsz, n, n * n)), flat_idx)
    p = T.mul(picked, T.reshape(e, (bsz, 1, n)))
    p = T.masked_fill(p, np.eye(n, dtype=bool), 0.0)
    if single:
        p = T.reshape(p, (n, n))
    return p


def decode_parents(p) -> np.ndarray:
    """Hard decoding: each token's parent is argmax over the other tokens,
    ties broken leftmost.  A 1-token sentence decodes to itself."""
    data = p.data if isinstance(p, Tensor) else np.asarray(p)
    n = data.shape[0]
    if n == 1:
        return np.zeros(1, dtype=int)
    masked = np.where(np.eye(n, dtype=bool), -INF, data)
    return np.argmax(masked, axis=1)


def decode_parents_rooted(p, delta) -> np.ndarray:
    """Decoded parents with the tallest token marked as root (-1): the hard
    decode assigns every token a parent, but a well-formed graph has n-1
    arcs, so the root's self-prediction is discarded."""
    parents = decode_parents(p)
    delta = delta.data if isinstance(delta, Tensor) else np.asarray(delta)
    parents[int(np.argmax(delta))] = -1
    return parents


def row_entropy(p) -> np.ndarray:
    """Shannon entropy (nats) of each parent row, for inspection dumps."""
    data = p.data if isinstance(p, Tensor) else np.asarray(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(data > 0, data * np.log(data), 0.0)
    return -t.sum(axis=-1)
