"""Parent-distribution math against brute-force oracles and the discrete
parsing algorithms."""

import math
import time

import numpy as np
import pytest

from _utils import consistent_structure, distinct_values, gradcheck
from structlab import tensor as T
from structlab.dependency import (
    boundary_matrices,
    constituent_probs,
    decode_parents,
    decode_parents_rooted,
    left_boundary_probs,
    parent_distribution,
    prob_height_exceeds,
    right_boundary_probs,
    span_parent_probs,
)
from structlab.structures import joint_parse
from structlab.tensor import Tensor
from test_structures import DESK_TAU, DESK_DELTA

INF = np.inf


# ---------------------------------------------------------------------------
# brute-force oracles: every running max materialized independently,
# plain python floats throughout


def sig(x):
    if x == INF:
        return 1.0
    if x == -INF:
        return 0.0
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def oracle_inside(i, l, tau, delta_i, mu1):
    """P(token l belongs to token i's span), materializing the max of the
    split scores strictly between them."""
    pad = [INF] + [float(t) for t in tau] + [INF]
    lo, hi = (l + 1, i) if l <= i else (i + 1, l)
    window = pad[lo: hi + 1]
    m = max(window) if window else -INF
    return sig((delta_i - m) / mu1)


def oracle_left(i, tau, delta_i, mu1):
    out = []
    for l in range(i + 1):
        prev = oracle_inside(i, l - 1, tau, delta_i, mu1) if l > 0 else sig(-INF)
        if l == 0:
            pad = [INF] + [float(t) for t in tau] + [INF]
            m = max(pad[0: i + 1])
            prev = sig((delta_i - m) / mu1)
        out.append(oracle_inside(i, l, tau, delta_i, mu1) - prev)
    return np.array(out)


def oracle_right(i, tau, delta_i, mu1):
    n = len(tau) + 1
    pad = [INF] + [float(t) for t in tau] + [INF]
    out = []
    for r in range(i, n):
        cur = oracle_inside(i, r, tau, delta_i, mu1)
        m = max(pad[i + 1: r + 2])
        nxt = sig((delta_i - m) / mu1)
        out.append(cur - nxt)
    return np.array(out)


def oracle_span_parent(l, r, delta, mu2):
    sub = [float(d) for d in delta[l: r + 1]]
    m = max(sub)
    es = [math.exp((d - m) / mu2) for d in sub]
    z = sum(es)
    return [e / z for e in es]


def oracle_parent_matrix(tau, delta, mu1, mu2):
    n = len(delta)
    p = np.zeros((n, n))
    for i in range(n):
        pl = oracle_left(i, tau, float(delta[i]), mu1)
        pr = oracle_right(i, tau, float(delta[i]), mu1)
        for l in range(i + 1):
            for r in range(i, n):
                pc = pl[l] * pr[r - i]
                if pc == 0.0:
                    continue
                sp = oracle_span_parent(l, r, delta, mu2)
                for j in range(l, r + 1):
                    if j != i:
                        p[i, j] += pc * sp[j - l]
    return p


def random_case(rng, n):
    return distinct_values(rng, n - 1), distinct_values(rng, n)


# ---------------------------------------------------------------------------
# height-versus-split CDF


def test_cdf_half_at_equality():
    assert prob_height_exceeds(2.0, 2.0, 0.7).item() == pytest.approx(0.5, abs=1e-12)


def test_cdf_zero_at_infinite_boundary():
    assert prob_height_exceeds(3.0, INF, 1.0).item() == 0.0


def test_cdf_frozen_value():
    # sigmoid(-5) with heights/scores from the 8-token desk fixture regime
    got = prob_height_exceeds(3.5, 4.0, 0.1).item()
    assert got == pytest.approx(0.006692850924284856, rel=1e-9)


# ---------------------------------------------------------------------------
# endpoint distributions


def test_left_first_token_is_certain():
    out = left_boundary_probs(0, np.array([0.3, 1.2]), 0.5, 1.0)
    np.testing.assert_allclose(out.data, [1.0])


def test_right_last_token_is_certain():
    out = right_boundary_probs(2, np.array([0.3, 1.2]), 0.5, 1.0)
    np.testing.assert_allclose(out.data, [1.0])


def test_boundary_probs_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        tau, delta = random_case(rng, n)
        i = int(rng.integers(0, n))
        assert abs(left_boundary_probs(i, tau, delta[i], 0.7).data.sum() - 1) <= 1e-9
        assert abs(right_boundary_probs(i, tau, delta[i], 0.7).data.sum() - 1) <= 1e-9


def test_boundary_probs_match_bruteforce():
    rng = np.random.default_rng(1)
    for _ in range(50):
        tau, delta = random_case(rng, 5)
        mu = float(rng.uniform(0.2, 2.0))
        for i in range(5):
            np.testing.assert_allclose(
                left_boundary_probs(i, tau, delta[i], mu).data,
                oracle_left(i, tau, delta[i], mu), atol=1e-12)
            np.testing.assert_allclose(
                right_boundary_probs(i, tau, delta[i], mu).data,
                oracle_right(i, tau, delta[i], mu), atol=1e-12)


def test_boundary_matrices_agree_with_per_token_ops():
    rng = np.random.default_rng(2)
    tau, delta = random_case(rng, 6)
    pl, pr = boundary_matrices(tau[None, :], delta[None, :], 0.9)
    for i in range(6):
        np.testing.assert_allclose(
            pl.data[0, i, : i + 1],
            left_boundary_probs(i, tau, delta[i], 0.9).data, atol=1e-12)
        np.testing.assert_allclose(
            pr.data[0, i, i:],
            right_boundary_probs(i, tau, delta[i], 0.9).data, atol=1e-12)
        assert np.all(pl.data[0, i, i + 1:] == 0.0)
        assert np.all(pr.data[0, i, :i] == 0.0)


# ---------------------------------------------------------------------------
# constituent distribution


def test_constituent_sums_to_one():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 8))
        tau, delta = random_case(rng, n)
        i = int(rng.integers(0, n))
        pc = constituent_probs(i, tau, delta, 0.8).data
        assert abs(pc.sum() - 1.0) <= 1e-9
        # zero whenever the token is outside the span
        for l in range(n):
            for r in range(n):
                if not l <= i <= r:
                    assert pc[l, r] == 0.0


def test_desk_fixture_sharp_constituent_mass():
    spread = max(max(DESK_TAU), max(DESK_DELTA)) - min(min(DESK_TAU), min(DESK_DELTA))
    mu1 = 1e-3 * spread
    pc = constituent_probs(3, np.array(DESK_TAU), np.array(DESK_DELTA), mu1).data
    assert pc[3, 7] >= 0.99


def test_desk_fixture_sharp_span_parent():
    spread = max(DESK_DELTA) - min(DESK_DELTA)
    mu2 = 1e-3 * spread
    sp = span_parent_probs(3, 7, np.array(DESK_DELTA), mu2).data
    assert sp[5] >= 0.99


# ---------------------------------------------------------------------------
# span parent distribution


def test_span_parent_uniform_heights():
    sp = span_parent_probs(1, 3, np.array([9.0, 2.0, 2.0, 2.0, 9.0]), 0.5).data
    np.testing.assert_allclose(sp, [0, 1 / 3, 1 / 3, 1 / 3, 0], atol=1e-12)


def test_span_parent_single_token():
    sp = span_parent_probs(2, 2, np.array([1.0, 2.0, 3.0]), 0.5).data
    np.testing.assert_allclose(sp, [0, 0, 1])


def test_span_parent_matches_oracle():
    rng = np.random.default_rng(4)
    for _ in range(50):
        delta = distinct_values(rng, 6)
        l = int(rng.integers(0, 6))
        r = int(rng.integers(l, 6))
        got = span_parent_probs(l, r, delta, 0.4).data
        np.testing.assert_allclose(got[l: r + 1], oracle_span_parent(l, r, delta, 0.4),
                                   atol=1e-12)


# ---------------------------------------------------------------------------
# full parent distribution


def test_single_token_sentence_gives_zero_matrix():
    p = parent_distribution(np.zeros(0), np.array([1.3]), 1.0, 1.0)
    np.testing.assert_allclose(p.data, [[0.0]])


def test_parent_matrix_matches_quadruple_loop_oracle():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(2, 8))
        tau, delta = random_case(rng, n)
        mu1 = float(rng.uniform(0.3, 1.5))
        mu2 = float(rng.uniform(0.3, 1.5))
        got = parent_distribution(tau, delta, mu1, mu2).data
        np.testing.assert_allclose(got, oracle_parent_matrix(tau, delta, mu1, mu2),
                                   atol=1e-10)


def test_row_sums_equal_one_minus_self_parent_mass():
    rng = np.random.default_rng(6)
    for _ in range(25):
        n = int(rng.integers(2, 8))
        tau, delta = random_case(rng, n)
        p = parent_distribution(tau, delta, 0.7, 0.9).data
        for i in range(n):
            pl = oracle_left(i, tau, delta[i], 0.7)
            pr = oracle_right(i, tau, delta[i], 0.7)
            self_mass = 0.0
            for l in range(i + 1):
                for r in range(i, n):
                    sp = oracle_span_parent(l, r, delta, 0.9)
                    self_mass += pl[l] * pr[r - i] * sp[i - l]
            assert abs(p[i].sum() - (1.0 - self_mass)) <= 1e-8


def test_rows_bounded_and_diagonal_zero():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(1, 10))
        tau, delta = random_case(rng, n)
        p = parent_distribution(tau, delta, 0.5, 0.5).data
        assert np.all(p >= 0.0) and np.all(p <= 1.0)
        assert np.all(np.diag(p) == 0.0)
        assert np.all(p.sum(axis=1) <= 1.0 + 1e-6)


def test_batched_matches_per_sentence():
    rng = np.random.default_rng(8)
    taus = np.stack([distinct_values(rng, 5) for _ in range(4)])
    deltas = np.stack([distinct_values(rng, 6) for _ in range(4)])
    batched = parent_distribution(taus, deltas, 0.6, 0.8).data
    for b in range(4):
        single = parent_distribution(taus[b], deltas[b], 0.6, 0.8).data
        np.testing.assert_allclose(batched[b], single, atol=1e-13)


def test_sharp_decode_matches_joint_parse():
    rng = np.random.default_rng(9)
    total = wrong = 0
    for _ in range(300):
        n = int(rng.integers(2, 13))
        tau, delta = consistent_structure(rng, n)
        spread = max(tau.max(), delta.max()) - min(tau.min(), delta.min())
        # sharpest temperature whose exponent range stays inside float64;
        # argmax margins are still on the order of e^20
        mu = spread / 400.0
        p = parent_distribution(tau, delta, mu, mu).data
        decoded = decode_parents(p)
        _, gold = joint_parse(range(n), tau, delta)
        want = gold.parent_array()
        for i in range(n):
            if i == gold.root:
                continue
            total += 1
            wrong += int(decoded[i] != want[i])
    assert wrong / total <= 0.01


def test_decode_rank_invariance_under_joint_affine_rescale():
    rng = np.random.default_rng(10)
    for _ in range(50):
        n = int(rng.integers(2, 10))
        tau, delta = consistent_structure(rng, n)
        spread = max(tau.max(), delta.max()) - min(tau.min(), delta.min())
        mu = spread / 400.0
        base = decode_parents(parent_distribution(tau, delta, mu, mu).data)
        a, b = float(rng.uniform(0.5, 3.0)), float(rng.uniform(-2.0, 2.0))
        scaled = decode_parents(parent_distribution(
            a * tau + b, a * delta + b, mu * a, mu * a).data)
        np.testing.assert_array_equal(base, scaled)


def test_budget_at_n64():
    rng = np.random.default_rng(11)
    tau = distinct_values(rng, 63)
    delta = distinct_values(rng, 64)
    start = time.monotonic()
    p = parent_distribution(tau, delta, 1.0, 1.0).data
    assert time.monotonic() - start < 5.0
    assert p.shape == (64, 64)
    assert np.all(p.sum(axis=1) <= 1.0 + 1e-6)


# ---------------------------------------------------------------------------
# decoding


def test_decode_one_hot_recovery():
    p = np.zeros((4, 4))
    want = [2, 0, 3, 1]
    for i, j in enumerate(want):
        p[i, j] = 1.0
    np.testing.assert_array_equal(decode_parents(p), want)


def test_decode_uniform_row_takes_leftmost_other():
    p = np.full((3, 3), 1 / 3)
    np.fill_diagonal(p, 0.0)
    np.testing.assert_array_equal(decode_parents(np.full((3, 3), 0.0)), [1, 0, 0])
    np.testing.assert_array_equal(decode_parents(p), [1, 0, 0])


def test_decode_rooted_marks_tallest_token():
    p = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(decode_parents_rooted(p, np.array([2.0, 1.0])),
                                  [-1, 0])


# ---------------------------------------------------------------------------
# gradients


def test_parent_distribution_gradients():
    rng = np.random.default_rng(12)
    for _ in range(10):
        n = int(rng.integers(2, 7))
        tau = Tensor(distinct_values(rng, n - 1), requires_grad=True)
        delta = Tensor(distinct_values(rng, n), requires_grad=True)
        mu1 = Tensor(np.array(rng.uniform(0.4, 1.2)), requires_grad=True)
        mu2 = Tensor(np.array(rng.uniform(0.4, 1.2)), requires_grad=True)
        weights = Tensor(rng.standard_normal((n, n)))

        def f():
            p = parent_distribution(tau, delta, mu1, mu2)
            return T.tsum(T.mul(p, weights))

        gradcheck(f, [tau, delta, mu1, mu2], rtol=1e-3, atol=1e-6)


def test_boundary_and_span_op_gradients():
    rng = np.random.default_rng(13)
    for _ in range(10):
        n = 5
        tau = Tensor(distinct_values(rng, n - 1), requires_grad=True)
        delta = Tensor(distinct_values(rng, n), requires_grad=True)
        i = int(rng.integers(0, n))
        w = Tensor(rng.standard_normal(n))
        w2 = Tensor(rng.standard_normal((n, n)))
        gradcheck(lambda: T.tsum(T.mul(constituent_probs(i, tau, delta, 0.8), w2)),
                  [tau, delta], rtol=1e-3, atol=1e-6)
        gradcheck(lambda: T.tsum(T.mul(span_parent_probs(1, 3, delta, 0.6), w)),
                  [delta], rtol=1e-3, atol=1e-6)
