"""Masked-language-model training: corruption, batching, Adam with warmup,
and masked perplexity evaluation.

Corruption is plain replacement: every token (including unknowns) is
independently swapped for the mask symbol with the configured rate, and
exactly the replaced positions are predicted.  Batches group sentences of
equal length, so no padding ever enters the model.  All randomness is
seeded from the model config; two runs with the same seed produce
bit-identical parameters.
"""

from __future__ import annotations

import json
import time

import numpy as np

from . import tensor as T
from .errors import NumericalError
from .tensor import Tape


def mlm_corrupt(ids, mask_rate, rng, mask_id):
    """Independent per-token masking; returns (corrupted ids, target mask)."""
    if not 0.0 < mask_rate < 1.0:
        raise ValueError(f"mask_rate must lie in (0, 1), got {mask_rate}")
    ids = np.asarray(ids)
    mask = rng.random(ids.shape) < mask_rate
    corrupted = np.where(mask, mask_id, ids)
    return corrupted, mask


def length_bucketed_batches(corpus, batch_size, rng=None):
    """Split sentence indices into batches of equal-length sentences.

    Returns a list of integer index arrays; shuffled when rng is given.
    """
    buckets = {}
    for idx, sent in enumerate(corpus):
        buckets.setdefault(len(sent), []).append(idx)
    batches = []
    for length in sorted(buckets):
        members = np.asarray(buckets[length])
        if rng is not None:
            members = rng.permutation(members)
        for s in range(0, len(members), batch_size):
            batches.append(members[s: s + batch_size])
    if rng is not None:
        order = rng.permutation(len(batches))
        batches = [batches[i] for i in order]
    return batches


def batch_array(corpus, indices):
    return np.asarray([corpus[i] for i in indices], dtype=np.int64)


def masked_loss(model, ids, mask_rate, mask_id, mask_rng, dropout_rng=None,
                training=False):
    """Cross-entropy over masked positions of one equal-length batch.

    Redraws the mask until at least one position is selected (the draw is
    deterministic given the rng state).
    """
    while True:
        corrupted, mask = mlm_corrupt(ids, mask_rate, mask_rng, mask_id)
        if mask.any():
            break
    out = model.forward(corrupted, training=training, rng=dropout_rng)
    vocab = out.logits.shape[-1]
    flat = T.reshape(out.logits, (-1, vocab))
    rows = np.flatnonzero(mask.reshape(-1))
    picked = flat[rows]
    targets = ids.reshape(-1)[rows]
    return T.cross_entropy(picked, targets), int(rows.size)


class Adam:
    """Adaptive moment estimation over a parameter list."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def lr_at(step, base, warmup):
    """Linear warmup then inverse-square-root decay."""
    if step < 1:
        return 0.0
    return base * min(step / warmup, float(np.sqrt(warmup / step)))


def clip_global_norm(params, max_norm):
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                # not in-place: gradient buffers may alias after backward
                p.grad = p.grad * scale
    return norm


def train(model, corpus, steps, batch_size=32, lr=1e-3, warmup=1000,
          clip=1.0, mask_id=2, log_every=50, log_path=None):
    """Run the MLM loop; returns the per-step history (step, loss, ppl, lr).

    Aborts with NumericalError on a NaN loss.  The metrics file (when given)
    receives JSON lines {step, loss, ppl, lr, wall_time}.
    """
    cfg = model.config
    batch_rng = np.random.default_rng([cfg.seed, 1])
    mask_rng = np.random.default_rng([cfg.seed, 2])
    dropout_rng = np.random.default_rng([cfg.seed, 3])
    params = model.parameters()
    opt = Adam(params)
    history = []
    log_fh = open(log_path, "w") if log_path else None
    t0 = time.monotonic()
    queue = []
    try:
        for step in range(1, steps + 1):
            if not queue:
                queue = length_bucketed_batches(corpus, batch_size, batch_rng)
            ids = batch_array(corpus, queue.pop())
            opt.zero_grad()
            with Tape() as tape:
                loss, _ = masked_loss(model, ids, cfg.mask_rate, mask_id,
                                      mask_rng, dropout_rng, training=True)
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise NumericalError(
                    f"training diverged: loss {loss_val} at step {step} "
                    f"(batch shape {ids.shape})")
            tape.backward(loss)
            clip_global_norm(params, clip)
            step_lr = lr_at(step, lr, warmup)
            opt.step(step_lr)
            history.append({"step": step, "loss": loss_val,
                            "ppl": float(np.exp(loss_val)), "lr": step_lr})
            if log_fh and (step % log_every == 0 or step == steps):
                rec = dict(history[-1], wall_time=time.monotonic() - t0)
                log_fh.write(json.dumps(rec) + "\n")
                log_fh.flush()
    finally:
        if log_fh:
            log_fh.close()
    return history


def evaluate_ppl(model, corpus, mask_id=2, seed=1234, batch_size=64,
                 mask_rate=None):
    """Masked perplexity: exp of the mean cross-entropy over masked
    positions, with a deterministic evaluation masking seed."""
    mask_rate = mask_rate if mask_rate is not None else model.config.mask_rate
    mask_rng = np.random.default_rng([seed, 7])
    total_nll = 0.0
    total_count = 0
    for batch in length_bucketed_batches(corpus, batch_size):
        ids = batch_array(corpus, batch)
        loss, count = masked_loss(model, ids, mask_rate, mask_id, mask_rng,
                                  training=False)
        total_nll += loss.item() * count
        total_count += count
    if total_count == 0:
        raise NumericalError("evaluate_ppl: no masked positions drawn")
    return float(np.exp(total_nll / total_count))
