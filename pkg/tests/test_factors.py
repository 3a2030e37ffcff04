import numpy as np
import pytest

from ivolnet.core.config import EstimatorConfig, step_from_minutes
from ivolnet.core.functionals import constant, selector
from ivolnet.core.paths import SpotCovPath
from ivolnet.errors import NonpositiveDiagonal, SingularFactorQuadCov
from ivolnet.factors import (
    IdioVolModelSpec,
    PairBlocks,
    analyze_pair,
    corr_idio_returns,
    corr_idiovol,
    corr_resid,
    gamma_loadings,
    integrated_r2_rfm,
    q_measure,
    r2_idiovolfm,
    resid_quadcov,
)
from ivolnet.quadcov import qc_naive
from ivolnet.sim.dgp import SimConfig, simulate_model


def synthetic_factor_path(gamma: float = 0.45, intercept: float = 0.0,
                          n: int = 400, k_n: int = 12) -> SpotCovPath:
    """d=2 path whose idio variance is exactly intercept + gamma * factor variance.

    The stock-factor covariance is identically zero, so the idio-variance
    functional's value moves one-for-one with gamma times the factor
    variance along the whole path.
    """
    t = np.linspace(0.0, 4.0 * np.pi, n)
    pi = 0.05 + 0.02 * np.sin(t) + 0.005 * np.sin(7.1 * t)
    vals = np.zeros((n, 2, 2))
    vals[:, 1, 1] = pi
    vals[:, 0, 0] = intercept + gamma * pi
    return SpotCovPath(values=vals, k_n=k_n, delta_n=1e-4)


def spec2(stock: int, pi=None) -> IdioVolModelSpec:
    return IdioVolModelSpec(stock, (1,), 2, pi)


class TestGammaLoadings:
    def test_scalar_division(self):
        # [Pi,Pi] = 2, [Pi,C_Z] = 0.9 -> gamma = 0.45 (stubbed block estimates)
        path = synthetic_factor_path()
        bl = PairBlocks(path, 0, 0, (1,), (selector(1, 1, 2),))
        q = np.zeros(bl.kappa)
        q[bl.i_pp(0, 0)] = 2.0
        q[bl.i_bj(0)] = 0.9
        bl._q["stub"] = q
        gamma, _ = gamma_loadings(spec2(0), path, method="stub", blocks=bl, with_avar=False)
        assert gamma[0] == pytest.approx(0.45, abs=1e-15)

    def test_exact_structure_recovered_by_plugin_estimator(self):
        # with no noise and zero stock-factor covariance the plug-in
        # (uncorrected) estimator recovers gamma exactly
        path = synthetic_factor_path(gamma=0.45, intercept=0.0)
        gamma, _ = gamma_loadings(spec2(0), path, method="naive", with_avar=False)
        assert gamma[0] == pytest.approx(0.45, abs=1e-12)

    def test_relabeling_factors_permutes_loadings(self):
        cfg = SimConfig(model_id=2, t_years=20 / 252, delta_n=step_from_minutes(5.0), seed=5)
        panel, _ = simulate_model(cfg)
        from ivolnet.spot import estimate_spot_path

        ecfg = EstimatorConfig(delta_n=cfg.delta_n, theta=1.5)
        path = estimate_spot_path(panel, ecfg)
        # market variance plus the other stock's total variance as factors
        pi_a = (selector(2, 2, 3), selector(1, 1, 3))
        pi_b = tuple(reversed(pi_a))
        ga, _ = gamma_loadings(
            IdioVolModelSpec(0, (2,), 3, pi_a), path, method="lin", with_avar=False
        )
        gb, _ = gamma_loadings(
            IdioVolModelSpec(0, (2,), 3, pi_b), path, method="lin", with_avar=False
        )
        assert np.allclose(ga, gb[::-1], rtol=1e-10)

    def test_avar_shape_and_symmetry(self, small_model2_path):
        ecfg, path, _ = small_model2_path
        gamma, avar = gamma_loadings(IdioVolModelSpec(0, (2,), 3), path, method="an")
        assert gamma.shape == (1,) and avar.shape == (1, 1)
        assert np.isfinite(avar).all()

    def test_singular_factor_quadcov(self):
        path = synthetic_factor_path()
        bl = PairBlocks(path, 0, 0, (1,), (selector(1, 1, 2),))
        q = np.zeros(bl.kappa)
        bl._q["stub"] = q  # [Pi,Pi] = 0
        with pytest.raises(SingularFactorQuadCov):
            gamma_loadings(spec2(0), path, method="stub", blocks=bl, with_avar=False)


class TestResidualQuadCov:
    def test_zero_loading_leaves_total(self):
        rng = np.random.default_rng(2)
        from conftest import random_spot_path

        path = random_spot_path(rng, 120, 3, k_n=9)
        bl = PairBlocks(path, 0, 1, (2,), (selector(2, 2, 3),))
        q = np.zeros(bl.kappa)
        q[bl.i_js] = 0.123
        q[bl.i_pp(0, 0)] = 2.0  # b_j = b_s = 0 -> gamma = 0
        bl._q["stub"] = q
        sj, ss = IdioVolModelSpec(0, (2,), 3), IdioVolModelSpec(1, (2,), 3)
        est = resid_quadcov(sj, ss, path, method="stub", blocks=bl)
        assert est.value == pytest.approx(0.123, abs=1e-15)

    def test_exact_structure_zero_residual_plugin(self):
        # idio variance exactly linear in the factor variance: the plug-in
        # estimator's residual covariation vanishes identically
        path = synthetic_factor_path(gamma=0.37)
        est = resid_quadcov(spec2(0), spec2(0), path, method="naive")
        scale = qc_naive(selector(1, 1, 2), selector(1, 1, 2), path).value
        assert abs(est.value) < 1e-8 * max(scale, 1e-12)

    def test_exact_zero_for_aligned_functionals_all_methods(self):
        # when the target is literally a + gamma * Pi as a functional, the
        # bias corrections cancel and the residual is zero for an and lin too
        path = synthetic_factor_path()
        pi = selector(1, 1, 2)
        cz = constant(0.02, 2) + 0.45 * pi
        spec = IdioVolModelSpec(0, (1,), 2, (pi,))
        for method in ("naive", "an", "lin"):
            bl = PairBlocks(path, 0, 0, (1,), (pi,))
            # overwrite the idio functional with the aligned one
            bl.Zj = bl.Zs = cz
            bl.pairs = [(cz, cz), (cz, cz), (cz, cz), (pi, cz), (pi, cz), (pi, pi)]
            est = resid_quadcov(spec, spec, path, method=method, blocks=bl)
            assert abs(est.value) < 1e-14

    def test_decomposition_identity(self, small_model2_path):
        # residual + explained == total, to float precision
        ecfg, path, _ = small_model2_path
        sj, ss = IdioVolModelSpec(0, (2,), 3), IdioVolModelSpec(1, (2,), 3)
        for method in ("naive", "an", "lin"):
            bl = PairBlocks(path, 0, 1, (2,), sj.idiovol_factors)
            resid = resid_quadcov(sj, ss, path, method=method, blocks=bl).value
            q = bl.q(method)
            A = bl.pp_matrix(method)
            gj = np.linalg.solve(A, bl.b_vector(method, "j"))
            gs = np.linalg.solve(A, bl.b_vector(method, "s"))
            total = q[bl.i_js]
            assert resid + gj @ A @ gs == pytest.approx(total, abs=1e-12 * max(1, abs(total)))


class TestRatios:
    def test_self_correlation_is_one(self):
        # corr(j, j) is exactly 1 whenever the diagonal estimate is positive,
        # and the error is raised (never a clamped value) when it is not
        rng = np.random.default_rng(6)
        from conftest import random_spot_path
        from ivolnet.core.functionals import idiovol
        from ivolnet.quadcov import estimate

        path = random_spot_path(rng, 260, 3, k_n=30, scale=30.0)
        Z = idiovol(0, (2,), 3)
        for method in ("naive", "an", "lin"):
            if estimate(method, Z, Z, path).value > 0:
                assert corr_idiovol(0, 0, (2,), path, method=method) == pytest.approx(
                    1.0, abs=1e-12
                )
            else:
                with pytest.raises(NonpositiveDiagonal):
                    corr_idiovol(0, 0, (2,), path, method=method)
        # the plug-in estimator of a variance target is nonnegative by form
        assert estimate("naive", Z, Z, path).value > 0
        assert corr_idiovol(0, 0, (2,), path, method="naive") == 1.0

    def test_r2_equals_one_on_exact_structure(self):
        path = synthetic_factor_path(gamma=0.45, intercept=0.0)
        r2 = r2_idiovolfm(spec2(0), path, method="naive")
        assert r2 == pytest.approx(1.0, abs=1e-8)

    def test_q_measure_diagonal_matches_r2(self):
        rng = np.random.default_rng(7)
        from conftest import random_spot_path

        path = random_spot_path(rng, 260, 3, k_n=30, scale=30.0)
        spec = IdioVolModelSpec(0, (2,), 3)
        q = q_measure(spec, spec, path, method="lin")
        r2 = r2_idiovolfm(spec, path, method="lin")
        assert q == pytest.approx(r2, rel=1e-12)

    def test_nonpositive_diagonal_raises(self):
        rng = np.random.default_rng(8)
        from conftest import random_spot_path

        path = random_spot_path(rng, 120, 3, k_n=9)
        bl = PairBlocks(path, 0, 1, (2,), (selector(2, 2, 3),))
        q = np.zeros(bl.kappa)
        q[bl.i_jj] = -0.1
        q[bl.i_ss] = 0.2
        q[bl.i_js] = 0.05
        q[bl.i_pp(0, 0)] = 1.0
        bl._q["stub"] = q
        sj, ss = IdioVolModelSpec(0, (2,), 3), IdioVolModelSpec(1, (2,), 3)
        with pytest.raises(NonpositiveDiagonal):
            corr_resid(sj, ss, path, method="stub", blocks=bl)


class TestAnalyzePair:
    def test_quantities_and_tests_present(self, small_model2_path):
        ecfg, path, _ = small_model2_path
        res = analyze_pair(path, 0, 1, (2,), methods=("an", "lin"), with_sigma=True)
        for m in ("an", "lin"):
            q = res.quantities[m]
            for name in ("qc_idiovol", "qc_resid", "corr_idiovol", "corr_resid",
                         "r2", "q_measure", "gamma_j[0]", "gamma_s[0]"):
                assert name in q
                assert q[name].se is None or q[name].se >= 0.0
            assert set(res.tests[m]) == {
                "no_idiovol_dependence", "no_factor_loading", "no_residual_dependence"
            }
        assert res.sigma is not None and res.sigma.sigma.shape == (6, 6)

    def test_sigma_skipped_when_not_requested(self, small_model2_path):
        ecfg, path, _ = small_model2_path
        res = analyze_pair(path, 0, 1, (2,), methods=("lin",), with_sigma=False)
        assert res.sigma is None
        assert res.quantities["lin"]["corr_idiovol"].se is None
        assert res.tests == {}


class TestIntegratedDiagnostics:
    def test_stock_identical_to_factor_has_unit_r2(self):
        rng = np.random.default_rng(4)
        dn = step_from_minutes(5.0)
        n = 78 * 10
        x = np.cumsum(0.01 * np.sqrt(dn) / np.sqrt(dn) * rng.standard_normal(n) * 0.01)
        prices = np.column_stack([np.concatenate([[0.0], x])] * 2)
        from ivolnet.core.panel import ReturnPanel

        panel = ReturnPanel(
            labels=("S", "F"), log_prices=prices, delta_n=dn,
            day_index=np.concatenate([[0], np.arange(n) // 78]), factor_count=1,
        )
        cfg = EstimatorConfig(delta_n=dn, theta=1.5)
        r2 = integrated_r2_rfm(panel, cfg, 0, l_n=24)
        assert r2 == pytest.approx(1.0, abs=1e-10)

    def test_zero_loading_panel_has_near_zero_r2(self):
        cfg = SimConfig(
            model_id=1, t_years=10 / 252, delta_n=step_from_minutes(1.0),
            seed=17, beta_base=0.0, beta_amp=0.0,
        )
        ecfg = EstimatorConfig(delta_n=cfg.delta_n, theta=1.5)
        vals = []
        for rep in range(10):
            panel, _ = simulate_model(cfg.with_seed(17 + rep))
            vals.append(integrated_r2_rfm(panel, ecfg, 0))
        assert np.median(np.abs(vals)) < 0.02

    @pytest.mark.slow
    def test_idio_return_correlation_tracks_latent_oracle(self):
        cfg = SimConfig(model_id=2, t_years=1.0, delta_n=step_from_minutes(5.0), seed=23)
        ecfg = EstimatorConfig(delta_n=cfg.delta_n, theta=2.5)
        errs = []
        for rep in range(200):
            panel, latent = simulate_model(cfg.with_seed(23 + rep))
            est = corr_idio_returns(panel, ecfg, 0, 1)
            cz1, cz2 = latent.idio_variance(0), latent.idio_variance(1)
            c12 = latent.idio_covariance(0, 1)
            dt = np.diff(latent.times)
            oracle = np.sum(c12[:-1] * dt) / np.sqrt(
                np.sum(cz1[:-1] * dt) * np.sum(cz2[:-1] * dt)
            )
            errs.append(est - oracle)
        assert abs(np.median(errs)) < 0.05
