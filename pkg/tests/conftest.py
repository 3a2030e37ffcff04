import numpy as np
import pytest

from ivolnet.core.config import EstimatorConfig, step_from_minutes
from ivolnet.core.paths import SpotCovPath
from ivolnet.sim.dgp import SimConfig, simulate_model


def random_spd(rng: np.random.Generator, d: int, jitter: float = 0.5) -> np.ndarray:
    """Well-conditioned random symmetric positive-definite matrix."""
    A = rng.standard_normal((d, d))
    return A @ A.T + jitter * np.eye(d)


def finite_difference_gradient(F, C: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences perturbing every entry independently."""
    d = C.shape[0]
    pert = []
    for g in range(d):
        for k in range(d):
            up = C.copy()
            dn = C.copy()
            up[g, k] += h
            dn[g, k] -= h
            pert.append(up)
            pert.append(dn)
    vals = F.value(np.array(pert))
    grad = (vals[0::2] - vals[1::2]) / (2.0 * h)
    return grad.reshape(d, d)


def constant_path(value: np.ndarray | float, n_windows: int, k_n: int,
                  delta_n: float) -> SpotCovPath:
    C = np.atleast_2d(np.asarray(value, dtype=float))
    vals = np.broadcast_to(C, (n_windows,) + C.shape).copy()
    return SpotCovPath(values=vals, k_n=k_n, delta_n=delta_n)


def random_spot_path(rng: np.random.Generator, n_windows: int, d: int, k_n: int,
                     delta_n: float = 1e-4, scale: float = 0.2) -> SpotCovPath:
    """Positive-definite random walk path, symmetric at every step."""
    base = random_spd(rng, d, jitter=1.0)
    vals = np.empty((n_windows, d, d))
    C = base.copy()
    for i in range(n_windows):
        B = rng.standard_normal((d, d)) * scale * np.sqrt(delta_n)
        C = C + (B + B.T) / 2.0
        # keep it PD by pulling toward the base
        C = 0.999 * C + 0.001 * base
        w = np.linalg.eigvalsh(C)[0]
        if w < 1e-3:
            C = C + (1e-3 - w) * np.eye(d)
        vals[i] = C
    return SpotCovPath(values=vals, k_n=k_n, delta_n=delta_n)


@pytest.fixture(scope="session")
def small_model2():
    """Short Model-2 panel shared across tests (40 trading days, 5 minutes)."""
    cfg = SimConfig(model_id=2, t_years=40 / 252, delta_n=step_from_minutes(5.0), seed=909)
    panel, latent = simulate_model(cfg)
    return cfg, panel, latent


@pytest.fixture(scope="session")
def small_model2_path(small_model2):
    from ivolnet.spot import estimate_spot_path

    cfg, panel, latent = small_model2
    ecfg = EstimatorConfig(delta_n=cfg.delta_n, theta=1.5)
    return ecfg, estimate_spot_path(panel, ecfg), latent
