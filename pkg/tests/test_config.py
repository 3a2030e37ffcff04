import math

import numpy as np
import pytest

from ivolnet.core.config import EstimatorConfig, step_from_minutes, step_from_seconds
from ivolnet.errors import ConfigError


def test_window_length_rounds_up():
    cfg = EstimatorConfig(delta_n=step_from_minutes(5.0), theta=2.5)
    assert cfg.k_n == math.ceil(2.5 / math.sqrt(cfg.delta_n))
    assert cfg.k_n == 351  # about one trading week at 5 minutes


def test_step_helpers_agree():
    assert step_from_minutes(5.0) == pytest.approx(step_from_seconds(300.0))
    assert step_from_minutes(5.0) * 252 * 78 == pytest.approx(1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(delta_n=-1.0),
        dict(delta_n=1e-4, theta=0.0),
        dict(delta_n=1e-4, varpi=0.6),
        dict(delta_n=1e-4, varpi=0.0),
        dict(delta_n=1e-4, varpi_prime=0.2),
        dict(delta_n=1e-4, r_jump_activity=0.5),
        dict(delta_n=1e-4, vol_jump_abs=0.0),
    ],
)
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(ConfigError):
        EstimatorConfig(**kwargs)


def test_window_condition_only_bites_with_vol_truncation():
    # varpi = 0.45 < (2*0.1+9)/20 = 0.46 violates the condition
    EstimatorConfig(delta_n=1e-4, varpi=0.45, varpi_prime=0.1)
    with pytest.raises(ConfigError):
        EstimatorConfig(delta_n=1e-4, varpi=0.45, varpi_prime=0.1, vol_trunc_enabled=True)
    EstimatorConfig(delta_n=1e-4, varpi=0.49, varpi_prime=0.1, vol_trunc_enabled=True)


def test_panel_length_guard():
    cfg = EstimatorConfig(delta_n=1e-4, theta=2.5)
    with pytest.raises(ConfigError):
        cfg.check_panel_length(4 * cfg.k_n)
    cfg.check_panel_length(4 * cfg.k_n + 1)


def test_file_round_trip_is_bit_exact(tmp_path):
    cfg = EstimatorConfig(
        delta_n=step_from_minutes(5.0),
        theta=2.5,
        varpi=0.49,
        trunc_mult=3.0,
        varpi_prime=0.1,
        vol_jump_abs=0.01,
        r_jump_activity=0.25,
        vol_trunc_enabled=True,
    )
    path = tmp_path / "estimator.cfg"
    cfg.to_file(path)
    back = EstimatorConfig.from_file(path)
    assert back == cfg
    # bitwise float equality, not approximate
    assert np.float64(back.delta_n).tobytes() == np.float64(cfg.delta_n).tobytes()


def test_unknown_config_key_rejected(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("delta_n=1e-4\nnot_a_key=3\n")
    with pytest.raises(ConfigError):
        EstimatorConfig.from_file(p)


def test_fingerprint_tracks_settings():
    a = EstimatorConfig(delta_n=1e-4)
    b = EstimatorConfig(delta_n=1e-4, theta=3.0)
    assert a.fingerprint() != b.fingerprint()
    assert a.fingerprint() == EstimatorConfig(delta_n=1e-4).fingerprint()
