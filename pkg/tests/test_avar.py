import numpy as np
import pytest

from conftest import constant_path, random_spot_path
from ivolnet.avar import delta_method_var, omega_terms, sigma_entry, sigma_matrix
from ivolnet.core.functionals import idiovol, selector
from ivolnet.core.paths import SpotCovPath, VolJumpMask
from ivolnet.errors import PathTooShort

SEL = selector(0, 0, 1)


class TestOmegaTerms:
    def test_constant_path_closed_form(self):
        # 141 summands of 8 each, scaled by delta_n; increments vanish
        path = constant_path(1.0, 191, k_n=10, delta_n=0.01)
        o1, o2, o3 = omega_terms(SEL, SEL, SEL, SEL, path)
        assert o1 == pytest.approx(11.28, abs=1e-12)
        assert o2 == 0.0
        assert o3 == 0.0

    def test_all_false_mask_kills_everything(self):
        path = constant_path(1.0, 191, k_n=10, delta_n=0.01)
        mask = VolJumpMask(
            no_jump=np.zeros(191, dtype=bool),
            defined=np.ones(191, dtype=bool),
        )
        assert omega_terms(SEL, SEL, SEL, SEL, path, mask) == (0.0, 0.0, 0.0)

    def test_path_too_short(self):
        path = constant_path(1.0, 50, k_n=10, delta_n=0.01)
        with pytest.raises(PathTooShort):
            omega_terms(SEL, SEL, SEL, SEL, path)

    def test_quartic_scaling_in_the_path(self):
        rng = np.random.default_rng(31)
        path = random_spot_path(rng, 200, 2, k_n=8)
        H, G = selector(0, 0, 2), selector(0, 1, 2)
        c = 1.7
        scaled = SpotCovPath(values=c * path.values, k_n=path.k_n, delta_n=path.delta_n)
        base = omega_terms(H, G, H, G, path)
        up = omega_terms(H, G, H, G, scaled)
        for b, u in zip(base, up):
            assert u == pytest.approx(c**4 * b, rel=1e-10)


class TestSigmaEntry:
    def test_zero_omegas(self):
        assert sigma_entry((0.0, 0.0, 0.0), 2.5) == 0.0

    def test_constant_path_combination_at_unit_theta(self):
        # 6*11.28 - 9*11.28 + (151/140)*(9/4)*(4*11.28), recomputed exactly
        val = sigma_entry((11.28, 0.0, 0.0), 1.0)
        expected = 6 * 11.28 - 9 * 11.28 + (151 / 140) * (9 / 4) * (4 * 11.28)
        assert val == pytest.approx(expected, abs=1e-10)
        assert val == pytest.approx(75.65657142857143, abs=1e-10)

    def test_noise_only_path_has_nonnegative_variance(self):
        # pure iid noise around a constant matrix: estimated variance must
        # not be driven negative by the combination
        rng = np.random.default_rng(5)
        kn = 25
        n = 6000
        incr = 0.1 * np.sqrt(1e-4) * rng.standard_normal((n, 1))
        cs = np.concatenate([[0.0], np.cumsum(incr[:, 0] ** 2)])
        vals = ((cs[kn:] - cs[:-kn]) / (kn * 1e-4))[:, None, None]
        path = SpotCovPath(values=vals, k_n=kn, delta_n=1e-4)
        theta = kn * np.sqrt(1e-4)
        o = omega_terms(SEL, SEL, SEL, SEL, path)
        assert sigma_entry(o, theta) > 0.0


class TestSigmaMatrix:
    def test_single_pair_equals_entry(self):
        rng = np.random.default_rng(41)
        path = random_spot_path(rng, 220, 2, k_n=8)
        H = selector(0, 0, 2)
        am = sigma_matrix([(H, H)], path)
        o = omega_terms(H, H, H, H, path)
        assert am.sigma.shape == (1, 1)
        assert am.sigma[0, 0] == pytest.approx(sigma_entry(o, am.theta), rel=1e-12)

    def test_swapped_pairs_share_diagonal(self):
        rng = np.random.default_rng(43)
        path = random_spot_path(rng, 220, 2, k_n=8)
        H, G = idiovol(0, (1,), 2), selector(1, 1, 2)
        am = sigma_matrix([(H, G), (G, H)], path)
        assert am.sigma[0, 0] == pytest.approx(am.sigma[1, 1], rel=1e-12)
        assert np.allclose(am.sigma, am.sigma.T)

    def test_workspace_shared_with_estimators_is_identical(self):
        from ivolnet.quadcov import PathWorkspace, qc_lin

        rng = np.random.default_rng(47)
        path = random_spot_path(rng, 220, 2, k_n=8)
        H = idiovol(0, (1,), 2)
        ws = PathWorkspace(path)
        qc_lin(H, H, path, workspace=ws)  # warms the caches
        shared = sigma_matrix([(H, H)], path, workspace=ws)
        fresh = sigma_matrix([(H, H)], path)
        assert shared.sigma[0, 0] == fresh.sigma[0, 0]


class TestDeltaMethod:
    def test_basis_vector_picks_diagonal(self):
        S = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert delta_method_var(np.array([1.0, 0.0]), S) == 2.0
        assert delta_method_var(np.zeros(2), S) == 0.0

    def test_correlation_gradient_hand_value(self):
        # phi(x, y, z) = x / sqrt(y z) at (1, 4, 1)
        def phi(v):
            return v[0] / np.sqrt(v[1] * v[2])

        x0 = np.array([1.0, 4.0, 1.0])
        g = np.array(
            [
                1.0 / np.sqrt(x0[1] * x0[2]),
                -x0[0] / (2.0 * x0[1] ** 1.5 * np.sqrt(x0[2])),
                -x0[0] / (2.0 * x0[2] ** 1.5 * np.sqrt(x0[1])),
            ]
        )
        # freeze the analytic gradient against central finite differences
        h = 1e-7
        fd = np.array(
            [(phi(x0 + h * e) - phi(x0 - h * e)) / (2 * h) for e in np.eye(3)]
        )
        assert np.allclose(g, fd, atol=1e-8)
        assert g == pytest.approx([0.5, -0.0625, -0.25], abs=1e-12)
        assert delta_method_var(g, np.eye(3)) == pytest.approx(0.31640625, abs=1e-12)
