import numpy as np
import pytest
import scipy.linalg

from sparfima import (ConvergenceError, DomainError, FractionalOperator,
                      NumericalError, WeightMatrix, apply_inverse_frac,
                      condition_report, frac_power_series,
                      frac_power_spectral, gen_binomial, log_det_frac,
                      queen_contiguity, row_standardize, time_shift_matrix)


@pytest.fixture(scope="module")
def w44():
    return row_standardize(queen_contiguity(4, 4))


@pytest.fixture(scope="module")
def w33():
    return row_standardize(queen_contiguity(3, 3))


class TestGenBinomial:
    def test_integer_truncation(self):
        assert gen_binomial(1, 2) == 0.0

    def test_half(self):
        assert gen_binomial(0.5, 2) == -0.125

    def test_integer_case(self):
        assert gen_binomial(2, 1) == 2.0

    def test_k_zero_exact(self):
        assert gen_binomial(0.37, 0) == 1.0

    def test_matches_recursive_definition(self):
        d = 1.7
        coeffs = [1.0]
        for k in range(1, 8):
            coeffs.append(coeffs[-1] * (d - k + 1) / k)
        for k, c in enumerate(coeffs):
            assert gen_binomial(d, k) == pytest.approx(c, rel=1e-15)


class TestSpectralPower:
    def test_d_one_is_linear_operator(self, w44):
        got = frac_power_spectral(w44, 0.4, 1.0)
        expected = np.eye(16) - 0.4 * w44.toarray()
        assert np.abs(got - expected).max() < 1e-12

    def test_a_zero_is_identity(self, w44):
        assert np.array_equal(frac_power_spectral(w44, 0.0, 1.7), np.eye(16))

    def test_cross_method_oracle(self, w44):
        spectral = frac_power_spectral(w44, 0.5, 0.8)
        series = frac_power_series(w44, 0.5, 0.8, tol=1e-15).matrix
        assert np.abs(spectral - series).max() < 1e-8

    def test_nonpositive_shift_rejected(self, w44):
        # row-standardized: max eigenvalue 1, so a > 1 breaks 1 - a*lambda > 0
        with pytest.raises(DomainError):
            frac_power_spectral(w44, 1.05, 0.5)

    def test_d_out_of_range(self, w44):
        with pytest.raises(DomainError):
            frac_power_spectral(w44, 0.5, -0.3)
        with pytest.raises(DomainError):
            frac_power_spectral(w44, 0.5, 6.0)

    def test_ill_conditioned_raise_mode(self):
        b = time_shift_matrix(6)
        with pytest.raises(NumericalError):
            frac_power_spectral(b, 0.5, 0.5, on_ill_conditioned="raise")


class TestSeriesPower:
    def test_integer_d_terminates_exactly(self, w33):
        a = 0.4
        res = frac_power_series(w33, a, 2.0)
        aw = a * w33.toarray()
        expected = np.eye(9) - 2 * aw + aw @ aw
        assert np.array_equal(res.matrix, expected)
        assert res.terms == 3
        assert res.tail_bound == 0.0

    def test_a_zero_identity_one_term(self, w33):
        res = frac_power_series(w33, 0.0, 1.3)
        assert np.array_equal(res.matrix, np.eye(9))
        assert res.terms == 1

    def test_strong_dependence_matches_spectral(self, w33):
        series = frac_power_series(w33, 0.9, 1.5, tol=1e-10).matrix
        spectral = frac_power_spectral(w33, 0.9, 1.5)
        assert np.abs(series - spectral).max() < 1e-8

    def test_cap_raises_with_achieved_bound(self, w33):
        with pytest.raises(ConvergenceError) as err:
            frac_power_series(w33, 0.95, 0.5, tol=1e-12, max_terms=5)
        assert err.value.achieved is not None
        assert err.value.achieved > 1e-12

    def test_norm_precondition(self):
        w = queen_contiguity(3, 3)  # raw: row sums up to 8
        with pytest.raises(DomainError):
            frac_power_series(w, 0.5, 0.5)

    def test_nilpotent_terminates_at_dimension(self):
        t = 7
        b = time_shift_matrix(t)
        res = frac_power_series(b, 0.99, 1.3)
        assert res.terms == t
        assert res.tail_bound == 0.0
        # lower triangular with unit diagonal
        assert np.allclose(np.diag(res.matrix), 1.0)
        assert not np.any(np.triu(res.matrix, k=1))


class TestApplyInverse:
    def test_d_one_solves_linear_system(self, w44):
        rng = np.random.default_rng(7)
        v = rng.standard_normal(16)
        got = apply_inverse_frac(w44, 0.6, 1.0, v)
        expected = np.linalg.solve(np.eye(16) - 0.6 * w44.toarray(), v)
        assert np.allclose(got, expected, atol=1e-10)

    def test_zero_vector(self, w44):
        assert not np.any(apply_inverse_frac(w44, 0.5, 0.8, np.zeros(16)))

    def test_round_trip(self, w44):
        rng = np.random.default_rng(11)
        v = rng.standard_normal(16)
        x = apply_inverse_frac(w44, 0.5, 0.8, v)
        back = frac_power_spectral(w44, 0.5, 0.8) @ x
        assert np.linalg.norm(back - v) / np.linalg.norm(v) < 1e-8


class TestLogDet:
    def test_a_zero(self, w44):
        assert log_det_frac(w44, 0.0, 1.4) == 0.0

    def test_analytic_two_by_two(self):
        w = WeightMatrix([[0, 1], [1, 0]])
        got = log_det_frac(w, 0.5, 2.0)
        assert got == pytest.approx(2 * (np.log(1.5) + np.log(0.5)),
                                    abs=1e-12)
        assert got == pytest.approx(-0.575364, abs=1e-6)

    def test_dense_lu_oracle(self):
        w = row_standardize(queen_contiguity(10, 10))
        got = log_det_frac(w, 0.9, 1.0)
        sign, logdet = np.linalg.slogdet(np.eye(100) - 0.9 * w.toarray())
        assert sign == 1.0
        assert abs(got - logdet) < 1e-8 * abs(logdet)

    def test_linear_in_d(self, w44):
        base = log_det_frac(w44, 0.7, 1.0)
        assert log_det_frac(w44, 0.7, 2.0) == 2.0 * base
        assert log_det_frac(w44, 0.7, 0.35) == 0.35 * base


class TestConditionReport:
    def test_a_zero_flat(self, w44):
        rep = condition_report(w44, 0.0, 1.0)
        assert rep.ratio == 1.0
        assert not rep.near_degenerate

    def test_strong_dependence_high_power_flags(self):
        w = row_standardize(queen_contiguity(10, 10))
        rep = condition_report(w, 0.99, 5.0)
        assert rep.ratio > 1e6
        assert rep.near_degenerate

    def test_moderate_case_clean(self):
        w = row_standardize(queen_contiguity(10, 10))
        rep = condition_report(w, 0.5, 1.0)
        assert rep.ratio < 1e6
        assert not rep.near_degenerate


class TestOperatorIdentities:
    @pytest.mark.parametrize("d1,d2", [(0.3, 0.7), (0.7, 1.5), (0.3, 1.5)])
    def test_semigroup(self, w44, d1, d2):
        p1 = frac_power_spectral(w44, 0.5, d1)
        p2 = frac_power_spectral(w44, 0.5, d2)
        p12 = frac_power_spectral(w44, 0.5, d1 + d2)
        assert np.abs(p1 @ p2 - p12).max() < 1e-8

    def test_inverse_of_power_is_power_of_inverse(self, w44):
        # Independent oracle: Schur-based fractional power of the dense
        # inverse, against inverting our spectral d-power.
        a, d = 0.5, 0.8
        lhs = np.linalg.inv(frac_power_spectral(w44, a, d))
        inv = np.linalg.inv(np.eye(16) - a * w44.toarray())
        rhs = scipy.linalg.fractional_matrix_power(inv, d)
        assert np.abs(lhs - np.real(rhs)).max() < 1e-8

    def test_series_spectral_agreement_various(self, w33):
        for a, d in [(0.3, 0.5), (-0.4, 1.2), (0.8, 2.5)]:
            s1 = frac_power_spectral(w33, a, d)
            s2 = frac_power_series(w33, a, d, tol=1e-14).matrix
            assert np.abs(s1 - s2).max() < 1e-8

    def test_nilpotent_power_matches_filter_coefficients(self):
        # On the shift matrix the expansion terminates, and column 0 of
        # (I - rho*B)^d lists the filter weights C(d,k) * (-rho)^k.
        t, rho, d = 8, 0.9, 0.7
        res = frac_power_series(time_shift_matrix(t), rho, d)
        expected, rho_pow = [], 1.0
        for k in range(t):
            if k:
                rho_pow *= rho
            expected.append(gen_binomial(d, k) * (-1.0) ** k * rho_pow)
        assert np.array_equal(res.matrix[:, 0], expected)


class TestFractionalOperatorType:
    def test_positive_shifts_enforced(self, w44):
        with pytest.raises(DomainError):
            FractionalOperator(w44, 1.2, 0.5)

    def test_apply_matches_matrix(self, w44):
        op = FractionalOperator(w44, 0.5, 0.8)
        rng = np.random.default_rng(5)
        v = rng.standard_normal(16)
        assert np.allclose(op.apply(v), op.matrix() @ v, atol=1e-10)
        assert np.allclose(op.apply(op.apply_inverse(v)), v, atol=1e-9)

    def test_log_det_matches_function(self, w44):
        op = FractionalOperator(w44, 0.5, 0.8)
        assert op.log_det() == log_det_frac(w44, 0.5, 0.8)
