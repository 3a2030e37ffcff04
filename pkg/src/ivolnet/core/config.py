"""Estimator configuration and its flat key/value serialization.

All tuning parameters live in one immutable dataclass so that every
estimate can carry a fingerprint of the exact settings that produced it.
Time is measured in years throughout (one trading year = 252 days of
6.5 hours).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..errors import ConfigError

SECONDS_PER_YEAR = 252 * 6.5 * 3600.0


def step_from_minutes(minutes: float) -> float:
    """Observation step in years for a sampling interval given in minutes."""
    return minutes * 60.0 / SECONDS_PER_YEAR


def step_from_seconds(seconds: float) -> float:
    return seconds / SECONDS_PER_YEAR


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning parameters of the spot and covariation estimators.

    Attributes:
        delta_n: observation step in years.
        theta: local window scale; the window holds ceil(theta / sqrt(delta_n))
            observations.
        varpi: price-truncation exponent, in (0, 1/2).
        trunc_mult: price-truncation multiplier applied to the daily
            bipower volatility.
        varpi_prime: volatility-truncation exponent used in rate mode,
            in (0, min(1/2 - r, 1/8)).
        vol_jump_abs: absolute volatility-jump threshold in annualized
            variance units (default 0.01, i.e. ten volatility points from
            zero).
        r_jump_activity: assumed jump-activity index r in [0, 1/2).
        vol_trunc_enabled: gate windows on the no-volatility-jump events.
    """

    delta_n: float
    theta: float = 2.5
    varpi: float = 0.49
    trunc_mult: float = 3.0
    varpi_prime: float = 0.1
    vol_jump_abs: float = 0.01
    r_jump_activity: float = 0.0
    vol_trunc_enabled: bool = False

    def __post_init__(self):
        if not (self.delta_n > 0 and math.isfinite(self.delta_n)):
            raise ConfigError(f"delta_n must be a positive finite number, got {self.delta_n}")
        if not self.theta > 0:
            raise ConfigError(f"theta must be positive, got {self.theta}")
        if not 0 < self.varpi < 0.5:
            raise ConfigError(f"varpi must lie in (0, 1/2), got {self.varpi}")
        if not self.trunc_mult > 0:
            raise ConfigError(f"trunc_mult must be positive, got {self.trunc_mult}")
        r = self.r_jump_activity
        if not 0 <= r < 0.5:
            raise ConfigError(f"r_jump_activity must lie in [0, 1/2), got {r}")
        if not 0 < self.varpi_prime < min(0.5 - r, 0.125):
            raise ConfigError(
                f"varpi_prime must lie in (0, min(1/2 - r, 1/8)), got {self.varpi_prime}"
            )
        if self.vol_trunc_enabled:
            # window condition linking the two truncation exponents
            lower = (2.0 * self.varpi_prime + 9.0) / (4.0 * (5.0 - r))
            if not self.varpi > lower:
                raise ConfigError(
                    f"varpi={self.varpi} violates the window condition: must exceed "
                    f"(2*varpi_prime + 9) / (4*(5 - r)) = {lower:.6f}"
                )
        if not self.vol_jump_abs > 0:
            raise ConfigError(f"vol_jump_abs must be positive, got {self.vol_jump_abs}")

    @property
    def k_n(self) -> int:
        """Window length ceil(theta / sqrt(delta_n)); kept conservative by rounding up."""
        return max(int(math.ceil(self.theta / math.sqrt(self.delta_n))), 2)

    def check_panel_length(self, n_increments: int) -> None:
        """The window must satisfy k_n >= 2 and 4 k_n < n."""
        kn = self.k_n
        if kn < 2 or 4 * kn >= n_increments:
            raise ConfigError(
                f"window k_n={kn} incompatible with panel of {n_increments} increments "
                f"(need k_n >= 2 and 4*k_n < n)"
            )

    def with_theta(self, theta: float) -> "EstimatorConfig":
        return replace(self, theta=theta)

    def fingerprint(self) -> str:
        """Short stable hash of all settings."""
        payload = ",".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self))
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    # -- flat key/value file (bit-exact round trip) -------------------------

    def to_file(self, path: str | Path) -> None:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            else:
                s = repr(v)
            lines.append(f"{f.name}={s}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "EstimatorConfig":
        raw = parse_flat_config(path)
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, s in raw.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r} in {path}")
            kwargs[key] = _coerce(key, s)
        return cls(**kwargs)


def _coerce(key: str, s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return float(s) if ("." in s or "e" in s or "E" in s or "inf" in s) else int(s)
    except ValueError as exc:
        raise ConfigError(f"cannot parse value {s!r} for key {key!r}") from exc


def parse_flat_config(path: str | Path) -> dict[str, str]:
    """Read a flat ``key=value`` file; blank lines and #-comments ignored."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
