"""Shared test helpers: finite-difference oracles and gradient checking."""

import numpy as np

from structlab.tensor import Tape


def rel_close(analytic, fd, rtol=1e-4, atol=1e-7):
    return abs(analytic - fd) <= atol + rtol * max(abs(analytic), abs(fd))


def fd_value(f):
    return float(f().data)


def gradcheck(f, params, eps=1e-5, rtol=1e-4, atol=1e-7, max_entries=None, rng=None):
    """Compare tape gradients of scalar f() against central finite differences.

    `f` must recompute the loss from the current `params` data on every call;
    the finite-difference side perturbs the raw arrays directly and never
    touches the tape, so it stays independent of the code path under test.
    """
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    for p in params:
        assert p.grad is not None, f"no gradient reached parameter {p.name or p.shape}"
        flat = p.data.reshape(-1)
        gflat = p.grad.reshape(-1)
        idxs = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idxs = rng.choice(flat.size, size=max_entries, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            fp = fd_value(f)
            flat[i] = orig - eps
            fm = fd_value(f)
            flat[i] = orig
            fd = (fp - fm) / (2.0 * eps)
            a = float(gflat[i])
            assert rel_close(a, fd, rtol=rtol, atol=atol), (
                f"gradient mismatch for {p.name or p.shape}[{i}]: "
                f"analytic {a:.10g} vs finite-difference {fd:.10g}")


def distinct_values(rng, n, low=-3.0, high=3.0):
    """Random values with guaranteed pairwise gaps (>= 10% of the average
    spacing), keeping hard-max subgradients away from ties where finite
    differences are meaningless.  Built as a permuted jittered grid."""
    if n == 0:
        return np.zeros(0)
    step = (high - low) / n
    vals = low + (np.arange(n) + rng.uniform(0.05, 0.95, size=n)) * step
    return rng.permutation(vals)


def consistent_structure(rng, n):
    """Random (tau, delta) whose ranks encode one coherent joint structure.

    Draw a random merge order over the n-1 split points (equivalently a
    random binary tree) and pick a random winner at every merge; the k-th
    merge's losing head gets height k and the split score sits just below
    it, so the loser can cross its own attachment split while everything
    attached earlier cannot.  Independent uniform draws routinely violate
    this coherence (e.g. both neighbouring split scores above a token's
    height), and there the soft parent distribution legitimately disagrees
    with the discrete algorithms.
    """
    delta = np.zeros(n)
    if n == 1:
        return np.zeros(0), delta + 1.0 + rng.uniform(0.0, 0.2)
    tau = np.zeros(n - 1)
    rep = list(range(n))          # union-find over contiguous token groups
    head = list(range(n))         # current head token per representative

    def find(x):
        while rep[x] != x:
            rep[x] = rep[rep[x]]
            x = rep[x]
        return x

    for c, k in enumerate(rng.permutation(n - 1), start=1):
        ra, rb = find(k), find(k + 1)
        ha, hb = head[ra], head[rb]
        winner, loser = (ha, hb) if rng.random() < 0.5 else (hb, ha)
        delta[loser] = c + rng.uniform(-0.15, 0.15)
        tau[k] = c - 0.5 + rng.uniform(-0.15, 0.15)
        rep[ra] = rb
        head[rb] = winner
    delta[head[find(0)]] = n + rng.uniform(-0.15, 0.15)
    return tau, delta
