import math

import numpy as np
import pytest

from igokit import (
    Bernoulli,
    BernoulliParams,
    CapacityError,
    FiniteDist,
    InvalidInputError,
    TabulatedScheme,
    TruncationScheme,
    bernoulli_support,
    enumerate_bernoulli,
    exact_H,
    exact_J,
    exact_blockwise_coordinate_step,
    exact_expected_fitness,
    exact_infinite_population_step,
    exact_quantile,
    make_objective,
)

UNIFORM = TabulatedScheme((1.0,))


def sum_fitness(d):
    return bernoulli_support(d).sum(axis=1)


class TestEnumerate:
    def test_single_bit(self):
        dist = enumerate_bernoulli(BernoulliParams([0.3]))
        assert np.array_equal(dist.support, [[0.0], [1.0]])
        assert np.allclose(dist.prob, [0.7, 0.3], atol=1e-15)

    def test_uniform_two_bits(self):
        dist = enumerate_bernoulli(BernoulliParams([0.5, 0.5]))
        assert dist.size == 4
        assert np.allclose(dist.prob, 0.25, atol=1e-15)

    def test_lexicographic_products(self):
        dist = enumerate_bernoulli(BernoulliParams([0.25, 0.5]))
        assert np.array_equal(
            dist.support, [[0, 0], [0, 1], [1, 0], [1, 1]]
        )
        assert np.allclose(dist.prob, [0.375, 0.375, 0.125, 0.125], atol=1e-15)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            bernoulli_support(17)

    def test_finitedist_validation(self):
        with pytest.raises(InvalidInputError):
            FiniteDist(np.zeros((2, 1)), [0.6, 0.3])
        with pytest.raises(InvalidInputError):
            FiniteDist(np.zeros((2, 1)), [1.2, -0.2])


def brute_force_quantile(prob, fitness, q):
    """Directly scan every attained value against the sup definition."""
    values = sorted(set(fitness))
    best = None
    for m in values:
        lower = sum(p for p, f in zip(prob, fitness) if f <= m)
        upper = sum(p for p, f in zip(prob, fitness) if f >= m)
        if lower >= q and upper >= 1.0 - q:
            best = m
    return best


class TestExactQuantile:
    def test_median_two_bits(self):
        dist = enumerate_bernoulli(BernoulliParams([0.5, 0.5]))
        rep = exact_quantile(dist, sum_fitness(2), 0.5)
        assert rep.value == 1.0
        assert rep.lower_mass == pytest.approx(0.75, abs=1e-15)
        assert rep.upper_mass == pytest.approx(0.75, abs=1e-15)

    def test_sup_rule_quartile(self):
        # m=2 fails the upper-mass requirement, so the sup lands on 1
        dist = enumerate_bernoulli(BernoulliParams([0.5, 0.5]))
        assert exact_quantile(dist, sum_fitness(2), 0.25).value == 1.0

    def test_point_mass(self):
        dist = FiniteDist(bernoulli_support(2), [0.0, 0.0, 1.0, 0.0])
        f = np.array([3.0, 5.0, 4.0, 6.0])
        for q in (0.1, 0.5, 0.9):
            assert exact_quantile(dist, f, q).value == 4.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(321)
        for _ in range(40):
            d = int(rng.integers(1, 7))
            dist = enumerate_bernoulli(BernoulliParams(rng.uniform(0.05, 0.95, d)))
            f = rng.integers(0, 5, dist.size).astype(float)
            q = float(rng.uniform(0.05, 0.95))
            got = exact_quantile(dist, f, q)
            assert got.value == brute_force_quantile(dist.prob, f, q)

    def test_q_validation(self):
        dist = enumerate_bernoulli(BernoulliParams([0.5]))
        with pytest.raises(InvalidInputError):
            exact_quantile(dist, [0.0, 1.0], 1.0)


class TestExactStep:
    def test_full_step(self):
        eta = exact_infinite_population_step(
            [0.5, 0.5], sum_fitness(2), TruncationScheme(0.5), 1.0
        )
        assert np.allclose(eta, [0.25, 0.25], atol=1e-15)

    def test_half_step(self):
        eta = exact_infinite_population_step(
            [0.5, 0.5], sum_fitness(2), TruncationScheme(0.5), 0.5
        )
        assert np.allclose(eta, [0.375, 0.375], atol=1e-15)

    def test_uniform_scheme_is_stationary(self):
        start = np.array([0.3, 0.6])
        for dt in (0.1, 1.0):
            eta = exact_infinite_population_step(start, sum_fitness(2), UNIFORM, dt)
            assert np.max(np.abs(eta - start)) <= 1e-15

    def test_blockwise_equal_rates_match_joint_step(self):
        # coordinate blocks do not interact: equal per-block rates reproduce
        # the joint update up to rounding
        rng = np.random.default_rng(10)
        for _ in range(10):
            d = int(rng.integers(2, 7))
            eta = rng.uniform(0.2, 0.8, d)
            f = make_objective("random-table", d, seed=5).batch(bernoulli_support(d))
            scheme = TruncationScheme(0.25)
            dt = float(rng.uniform(0.1, 1.0))
            joint = exact_infinite_population_step(eta, f, scheme, dt)
            blocked = exact_blockwise_coordinate_step(eta, f, scheme, np.full(d, dt))
            assert np.max(np.abs(joint - blocked)) <= 1e-14

    def test_blockwise_zero_rates(self):
        eta = np.array([0.4, 0.6])
        out = exact_blockwise_coordinate_step(
            eta, sum_fitness(2), TruncationScheme(0.5), [0.0, 0.0]
        )
        assert np.array_equal(out, eta)

    def test_blockwise_respects_order_arg(self):
        eta = np.array([0.4, 0.6])
        f = sum_fitness(2)
        a = exact_blockwise_coordinate_step(eta, f, TruncationScheme(0.5), [0.5, 0.5])
        b = exact_blockwise_coordinate_step(
            eta, f, TruncationScheme(0.5), [0.5, 0.5], order=[1, 0]
        )
        assert np.allclose(a, b, atol=1e-15)  # blocks are independent here


class TestExactFunctionals:
    def test_j_at_base_is_one(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            d = int(rng.integers(1, 8))
            eta = rng.uniform(0.1, 0.9, d)
            f = rng.integers(0, 4, 2**d).astype(float)
            q = float(rng.uniform(0.1, 0.9))
            assert exact_J(eta, eta, f, TruncationScheme(q)) == pytest.approx(
                1.0, abs=1e-12
            )

    def test_j_worked_instance(self):
        j = exact_J([0.375, 0.375], [0.5, 0.5], sum_fitness(2), TruncationScheme(0.5))
        assert j == pytest.approx(2 * 0.390625 + 0.46875, abs=1e-15)
        assert j == pytest.approx(1.25, abs=1e-15)

    def test_j_concentrated_near_best(self):
        eps = 1e-6
        j = exact_J(
            [eps, eps], [0.5, 0.5], sum_fitness(2), TruncationScheme(0.5)
        )
        assert j == pytest.approx(2.0, abs=1e-5)

    def test_h_reduces_to_negative_entropy_under_uniform_weights(self):
        eta = np.array([0.25])
        h = exact_H(eta, eta, np.array([0.0, 1.0]), UNIFORM)
        expected = 0.75 * math.log(0.75) + 0.25 * math.log(0.25)
        assert h == pytest.approx(expected, abs=1e-14)

    def test_h_single_term(self):
        h = exact_H([0.25], [0.5], np.array([0.0, 1.0]), TruncationScheme(0.5))
        assert h == pytest.approx(math.log(0.75), abs=1e-14)

    def test_jensen_bound(self):
        # ln J >= H(next) - H(base) on random instances
        rng = np.random.default_rng(51)
        scheme_pool = [TruncationScheme(q) for q in (0.1, 0.3, 0.5, 0.8)]
        for _ in range(30):
            d = int(rng.integers(1, 7))
            base = rng.uniform(0.15, 0.85, d)
            other = rng.uniform(0.15, 0.85, d)
            f = rng.integers(0, 5, 2**d).astype(float)
            scheme = scheme_pool[int(rng.integers(0, len(scheme_pool)))]
            lhs = math.log(exact_J(other, base, f, scheme))
            rhs = exact_H(other, base, f, scheme) - exact_H(base, base, f, scheme)
            assert lhs >= rhs - 1e-10

    def test_expected_fitness(self):
        assert exact_expected_fitness([0.5, 0.5], sum_fitness(2)) == pytest.approx(
            1.0, abs=1e-15
        )
        assert exact_expected_fitness([0.25, 0.25], sum_fitness(2)) == pytest.approx(
            0.5, abs=1e-15
        )
        # reward r(x) = 1 + x on one bit
        assert exact_expected_fitness([0.5], np.array([1.0, 2.0])) == pytest.approx(
            1.5, abs=1e-15
        )


class TestImprovementMiniRun:
    def test_thirty_exact_steps_never_worsen(self):
        rng = np.random.default_rng(2025)
        eta = rng.uniform(0.2, 0.8, 6)
        obj = make_objective("binval", 6)
        f = obj.batch(bernoulli_support(6))
        scheme = TruncationScheme(0.25)
        model = Bernoulli(6)
        dist = enumerate_bernoulli(model.from_eta(eta))
        q_prev = exact_quantile(dist, f, 0.25).value
        for _ in range(30):
            eta = exact_infinite_population_step(eta, f, scheme, 0.5)
            dist = enumerate_bernoulli(model.from_eta(eta))
            q_now = exact_quantile(dist, f, 0.25).value
            assert q_now <= q_prev + 1e-12
            if abs(q_now - q_prev) <= 1e-12:
                # stalls on a discrete space must leave mass at the level
                assert dist.prob[f == q_prev].sum() > 0.0
            q_prev = q_now
