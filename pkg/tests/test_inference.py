import numpy as np
import pytest
from scipy import stats

from ivolnet.errors import DomainError
from ivolnet.inference import fdr_bh, t_test_quadcov, wald_test


class TestTTest:
    def test_zero_estimate(self):
        res = t_test_quadcov(0.0, 1.0, 1e-4)
        assert res.statistic == 0.0
        assert res.p_value == 1.0
        assert res.valid

    def test_scaling(self):
        dn = 1e-4
        res = t_test_quadcov(0.02, 0.5, dn)
        assert res.statistic == pytest.approx(0.02 / (dn**0.25 * np.sqrt(0.5)))
        assert res.standard_error == pytest.approx(dn**0.25 * np.sqrt(0.5))

    def test_sign_equivariance(self):
        a = t_test_quadcov(0.3, 0.2, 1e-4)
        b = t_test_quadcov(-0.3, 0.2, 1e-4)
        assert a.statistic == -b.statistic
        assert a.p_value == b.p_value

    def test_one_sided_mode(self):
        res2 = t_test_quadcov(0.3, 0.2, 1e-4)
        res1 = t_test_quadcov(0.3, 0.2, 1e-4, one_sided=True)
        assert res1.p_value == pytest.approx(res2.p_value / 2.0)

    def test_nonpositive_variance_flagged_not_clamped(self):
        res = t_test_quadcov(0.3, -0.2, 1e-4)
        assert not res.valid
        assert np.isnan(res.p_value) and np.isnan(res.statistic)


class TestWald:
    def test_zero_vector(self):
        res = wald_test(np.zeros(2), np.eye(2), 1e-4)
        assert res.statistic == 0.0
        assert res.p_value == 1.0
        assert res.dof == 2

    def test_scalar_case_matches_squared_t(self):
        dn = 1e-4
        t = t_test_quadcov(0.07, 0.9, dn)
        w = wald_test(np.array([0.07]), np.array([[0.9]]), dn)
        assert w.statistic == pytest.approx(t.statistic**2, rel=1e-12)
        assert w.p_value == pytest.approx(t.p_value, rel=1e-10)

    def test_invariant_under_linear_reparameterization(self):
        rng = np.random.default_rng(3)
        dn = 1e-4
        for _ in range(20):
            k = int(rng.integers(1, 5))
            v = rng.standard_normal(k) * 0.1
            A = rng.standard_normal((k, k))
            S = A @ A.T + 0.1 * np.eye(k)
            T = rng.standard_normal((k, k)) + np.eye(k) * 2.0
            base = wald_test(v, S, dn)
            mapped = wald_test(T @ v, T @ S @ T.T, dn)
            assert mapped.statistic == pytest.approx(base.statistic, rel=1e-8)

    def test_singular_sigma_flagged(self):
        res = wald_test(np.array([0.1, 0.2]), np.zeros((2, 2)), 1e-4)
        assert not res.valid


class TestFdr:
    def test_all_ones_rejects_nothing(self):
        res = fdr_bh(np.ones(10), 0.05)
        assert res.n_rejected == 0

    def test_step_up_example(self):
        p = np.array([0.001, 0.02, 0.04, 0.2])
        res = fdr_bh(p, 0.05)
        # thresholds 0.0125, 0.025, 0.0375, 0.05: largest k with p_(k) <= kq/m is 2
        assert res.reject.tolist() == [True, True, False, False]

    def test_rejection_set_monotone_in_level(self):
        rng = np.random.default_rng(9)
        p = rng.uniform(size=200)
        prev = np.zeros(200, dtype=bool)
        for q in (0.01, 0.05, 0.1, 0.2, 0.5):
            rej = fdr_bh(p, q).reject
            assert np.all(prev <= rej)
            prev = rej

    def test_invalid_entries_excluded_and_reported(self):
        p = np.array([0.001, np.nan, 0.9])
        res = fdr_bh(p, 0.05)
        assert res.n_invalid == 1
        assert res.n_valid == 2
        assert not res.reject[1]

    def test_dependent_variant_is_more_conservative(self):
        rng = np.random.default_rng(11)
        p = rng.uniform(size=500) ** 2
        bh = fdr_bh(p, 0.05)
        by = fdr_bh(p, 0.05, dependent=True)
        assert by.n_rejected <= bh.n_rejected

    def test_out_of_range_pvalues_rejected(self):
        with pytest.raises(DomainError):
            fdr_bh(np.array([0.5, 1.2]), 0.05)

    @pytest.mark.slow
    def test_false_discovery_proportion_under_global_null(self):
        # family size of the full pairwise application; FDR <= q on average
        rng = np.random.default_rng(13)
        m = 5356
        fdp = []
        for _ in range(200):
            p = rng.uniform(size=m)
            res = fdr_bh(p, 0.05)
            fdp.append(1.0 if res.n_rejected > 0 else 0.0)  # all rejections false
        mean = float(np.mean(fdp))
        se = float(np.std(fdp, ddof=1) / np.sqrt(len(fdp)))
        assert mean <= 0.05 + 3.0 * se


def test_t_test_size_on_gaussian_inputs():
    # the statistic is standard normal when estimate ~ N(0, sqrt(dn) * avar)
    rng = np.random.default_rng(21)
    dn = 1e-4
    avar = 0.7
    n = 4000
    draws = rng.normal(0.0, np.sqrt(np.sqrt(dn) * avar), size=n)
    rej = [t_test_quadcov(x, avar, dn).p_value <= 0.05 for x in draws]
    rate = np.mean(rej)
    assert abs(rate - 0.05) < 3 * np.sqrt(0.05 * 0.95 / n)


def test_wald_chi2_null_distribution():
    rng = np.random.default_rng(22)
    dn = 1e-4
    k = 3
    S = np.diag([0.5, 1.0, 2.0])
    stats_ = []
    for _ in range(2000):
        v = rng.multivariate_normal(np.zeros(k), np.sqrt(dn) * S)
        stats_.append(wald_test(v, S, dn).statistic)
    # compare upper tail to the chi-square
    frac = np.mean(np.array(stats_) > stats.chi2.ppf(0.95, df=k))
    assert abs(frac - 0.05) < 0.02
