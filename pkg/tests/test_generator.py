"""Generator validation, carre du champ, and the structural conditions."""

import numpy as np
import pytest

import oracles
from dvsemigroup import (
    DimensionMismatch,
    GraphDisconnected,
    NegativeOffDiagonal,
    RowSumNonzero,
    carre_du_champ,
    check_condition_A,
    check_condition_D,
    gamma_sandwich_check,
    validate_generator,
)


class TestValidateGenerator:
    def test_two_state_accepted(self):
        Q = validate_generator([[-1.0, 1.0], [2.0, -2.0]])
        assert Q.dim == 2
        assert np.array_equal(Q.rates.sum(axis=1), [0.0, 0.0])

    def test_zero_matrix_disconnected(self):
        with pytest.raises(GraphDisconnected) as exc:
            validate_generator([[0.0, 0.0], [0.0, 0.0]])
        assert exc.value.components == [[0], [1]]

    def test_negative_off_diagonal(self):
        with pytest.raises(NegativeOffDiagonal) as exc:
            validate_generator([[-0.5, 0.5], [-1.0, 1.0]])
        assert (exc.value.i, exc.value.j) == (1, 0)

    def test_row_sum_repair_inside_tolerance(self):
        eps = 1e-14
        Q = validate_generator([[-1.0 + eps, 1.0], [2.0, -2.0 - eps]])
        assert Q.rates.sum(axis=1).tolist() == [0.0, 0.0]

    def test_row_sum_error_outside_tolerance(self):
        with pytest.raises(RowSumNonzero) as exc:
            validate_generator([[-1.0, 1.5], [2.0, -2.0]])
        assert exc.value.i == 0

    def test_single_state(self):
        assert validate_generator([[0.0]]).dim == 1

    def test_not_square(self):
        with pytest.raises(DimensionMismatch):
            validate_generator([[0.0, 0.0]])

    def test_rates_are_read_only(self):
        Q = validate_generator([[-1.0, 1.0], [2.0, -2.0]])
        with pytest.raises(ValueError):
            Q.rates[0, 0] = 5.0


class TestCarreDuChamp:
    def test_two_state_example(self, two_state):
        # direct arithmetic: L(g^2) - 2 g Lg with g = (0, 1)
        g = np.array([0.0, 1.0])
        L = two_state.rates
        expected = L @ g ** 2 - 2.0 * g * (L @ g)
        assert np.allclose(expected, [1.0, 2.0], atol=0)
        assert np.allclose(carre_du_champ(two_state, g), expected, atol=1e-15)

    def test_constant_gives_zero(self, two_state):
        assert np.array_equal(carre_du_champ(two_state, np.full(2, 3.7)), [0.0, 0.0])

    def test_nonnegative_and_matches_definition(self, rng):
        for _ in range(200):
            d = int(rng.integers(2, 9))
            Q = validate_generator(oracles.rand_rate_matrix(d, rng))
            g = rng.normal(0, 2, d)
            gamma = carre_du_champ(Q, g)
            assert (gamma >= 0).all()
            direct = Q.rates @ g ** 2 - 2.0 * g * (Q.rates @ g)
            assert np.abs(gamma - direct).max() <= 1e-12 * Q.scale * max(1.0, g @ g)

    def test_dimension_mismatch(self, two_state):
        with pytest.raises(DimensionMismatch):
            carre_du_champ(two_state, np.ones(3))


class TestGammaSandwich:
    def test_constant_f_reduces_to_gamma(self, two_state):
        # with f = 1 the middle expression is exactly Gamma(g)
        g = np.array([0.3, -1.2])
        f = np.ones(2)
        L = two_state.rates
        middle = L @ (f * g ** 2) - 2 * g * (L @ (f * g)) + g ** 2 * (L @ f)
        assert np.allclose(middle, carre_du_champ(two_state, g), atol=1e-14)
        assert gamma_sandwich_check(two_state, f, g)

    def test_two_state_derived(self, two_state):
        assert gamma_sandwich_check(two_state, np.array([1.0, 2.0]),
                                    np.array([0.0, 1.0]))

    def test_random_trials(self, rng):
        for _ in range(300):
            d = int(rng.integers(2, 9))
            Q = validate_generator(oracles.rand_rate_matrix(d, rng))
            f = rng.normal(0, 2, d)
            g = rng.normal(0, 2, d)
            assert gamma_sandwich_check(Q, f, g)


class TestConditionA:
    def test_two_state_against_series_oracle(self, two_state):
        P = oracles.series_expm(1.0 * two_state.rates)
        expected = min(P[:, j].min() / P[:, j].max() for j in range(2))
        eps = check_condition_A(two_state, 1.0)
        assert eps == pytest.approx(expected, rel=1e-12)
        assert 0 < eps <= 1

    def test_single_state(self):
        Q = validate_generator([[0.0]])
        assert check_condition_A(Q, 1.0) == 1.0

    def test_positive_for_t_ladder(self, rng):
        for _ in range(10):
            d = int(rng.integers(2, 6))
            Q = validate_generator(oracles.rand_rate_matrix(d, rng))
            for T in (1.0, 10.0, 100.0):
                assert check_condition_A(Q, T) > 0


class TestConditionD:
    def test_three_cycle(self):
        Q = validate_generator([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [1.0, 0.0, -1.0]])
        assert check_condition_D(Q)

    def test_block_diagonal_raw_matrix(self):
        raw = [[-1.0, 1.0, 0.0, 0.0], [1.0, -1.0, 0.0, 0.0],
               [0.0, 0.0, -2.0, 2.0], [0.0, 0.0, 2.0, -2.0]]
        assert not check_condition_D(np.array(raw))
        with pytest.raises(GraphDisconnected):
            validate_generator(raw)

    def test_star_graph(self):
        raw = np.zeros((4, 4))
        raw[0, 1:] = 1.0
        raw[1:, 0] = 1.0
        np.fill_diagonal(raw, -raw.sum(axis=1))
        assert check_condition_D(validate_generator(raw))

    def test_nonconstant_g_has_positive_gamma(self, rng):
        # contrapositive of nondegeneracy: on a connected graph, any g with
        # spread has Gamma(g) > 0 somewhere
        for _ in range(50):
            d = int(rng.integers(2, 7))
            Q = validate_generator(oracles.rand_rate_matrix(d, rng))
            g = rng.normal(0, 1, d)
            g[0] += 1.0  # guarantee spread
            assert carre_du_champ(Q, g).max() > 1e-12 * (g.max() - g.min()) ** 2
