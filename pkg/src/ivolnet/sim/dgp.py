"""Monte Carlo data-generating process with latent-path bookkeeping.

A market log price and a panel of stock log prices are simulated on a
fine subgrid and sampled at the observation step. All variance factors
follow square-root mean-reverting diffusions advanced by full-truncation
Euler; the market factor's shocks are correlated with the market price
Brownian motion (leverage). Stock idiosyncratic Brownian motions carry a
constant pairwise correlation, and each price process receives compound
Poisson jumps. Everything needed to compute latent ground-truth
quantities is recorded on the observation grid.

Randomness is split into three named streams (volatility + market
Brownian, idiosyncratic Brownians, jumps) so the volatility realization
can be held fixed across replications while prices are redrawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from ..core.config import step_from_minutes
from ..core.panel import ReturnPanel
from ..errors import ConfigError, GridMismatch

STREAM_VOL = 0
STREAM_IDIO = 1
STREAM_JUMP = 2

_CHUNK_TARGET = 1 << 20  # fine steps per streaming chunk
_CHUNK_ALIGN = 25_200    # highly divisible, so chunk layout is substep-invariant


def _chunk_steps(substeps: int) -> int:
    """Streaming chunk length: a fixed multiple of the substep count.

    Aligning chunks to a common highly divisible base keeps the random
    draw order identical across configurations that share a fine grid,
    so sampling-frequency sweeps see the same underlying shocks.
    """
    base = substeps * _CHUNK_ALIGN // math.gcd(substeps, _CHUNK_ALIGN)
    return max(base, (_CHUNK_TARGET // base) * base)


@dataclass(frozen=True)
class CirParams:
    """Square-root diffusion parameters; the defaults satisfy the Feller condition."""

    kappa: float = 5.0
    mu: float = 0.09
    sigma: float = 0.35

    def __post_init__(self):
        if 2.0 * self.kappa * self.mu <= self.sigma**2:
            raise ConfigError(
                f"Feller condition violated: 2*kappa*mu = {2 * self.kappa * self.mu} "
                f"<= sigma^2 = {self.sigma ** 2}"
            )


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one simulated market.

    ``model_id`` 1 gives each stock an independent variance factor (all
    idiosyncratic-variance covariations are zero); 2 loads both stocks on
    the market variance and a shared factor. ``substeps`` fine steps are
    simulated per observation step.
    """

    model_id: int = 1
    t_years: float = 10.0
    delta_n: float = field(default_factory=lambda: step_from_minutes(5.0))
    substeps: int = 10
    seed: int = 0
    n_stocks: int = 2
    leverage: float = -0.8
    cir: CirParams = field(default_factory=CirParams)
    jump_intensity: float = 2.0
    jump_sd: float = 0.02
    idio_corr: float = 0.4
    beta_base: float = 0.5
    beta_amp: float = 0.1
    beta_freq: float = 100.0
    intercept: float = 0.1
    f_init: float | None = None

    def __post_init__(self):
        if self.model_id not in (1, 2):
            raise ConfigError(f"model_id must be 1 or 2, got {self.model_id}")
        if self.model_id == 2 and self.n_stocks != 2:
            raise ConfigError("model 2 is specified for exactly two stocks")
        if self.substeps < 1:
            raise ConfigError("substeps must be at least 1")
        if not -1.0 < self.leverage < 1.0:
            raise ConfigError("leverage must lie in (-1, 1)")
        if not 0.0 <= self.idio_corr < 1.0:
            # the common-shock construction below covers the equicorrelated case
            raise ConfigError("idio_corr must lie in [0, 1)")
        n = self.t_years / self.delta_n
        if abs(n - round(n)) > 1e-6:
            raise ConfigError("t_years must be an integer number of observation steps")

    @property
    def n_obs(self) -> int:
        return int(round(self.t_years / self.delta_n))

    @property
    def delta_fine(self) -> float:
        return self.delta_n / self.substeps

    @property
    def obs_per_day(self) -> int:
        return max(int(round(1.0 / (252.0 * self.delta_n))), 1)

    @property
    def n_factors(self) -> int:
        """Variance factors: market plus one per stock (model 1) or four (model 2)."""
        return 4 if self.model_id == 2 else self.n_stocks + 1

    def loadings(self) -> np.ndarray:
        """(n_stocks, n_factors) loadings of the idio variances on the factors."""
        W = np.zeros((self.n_stocks, self.n_factors))
        if self.model_id == 1:
            for j in range(self.n_stocks):
                W[j, j + 1] = 1.5
        else:
            W[0] = (0.45, 1.0, 0.0, 0.4)
            W[1] = (0.35, 0.0, 0.3, 0.6)
        return W

    def beta(self, t: np.ndarray) -> np.ndarray:
        return self.beta_base + self.beta_amp * np.sin(self.beta_freq * t)

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)


def _rng(cfg: SimConfig, stream: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((cfg.seed, stream, rep)))


@njit(cache=True)
def _cir_advance(f, shocks, dt, kappa, mu, sigma, out):
    """Full-truncation Euler step for a block of square-root diffusions.

    ``f`` is the current (non-negative) level per factor and is updated
    in place; returns the number of zero-floor hits in the block.
    """
    steps, nf = shocks.shape
    sqdt = math.sqrt(dt)
    hits = 0
    for t in range(steps):
        for k in range(nf):
            x = f[k]
            x1 = x + kappa * (mu - x) * dt + sigma * math.sqrt(x) * sqdt * shocks[t, k]
            if x1 < 0.0:
                x1 = 0.0
                hits += 1
            f[k] = x1
            out[t, k] = x1
    return hits


def simulate_cir(params: CirParams, t_years: float, delta_fine: float,
                 seed: int, f_init: float | None = None) -> np.ndarray:
    """One square-root diffusion path on the fine grid, start value included."""
    steps = int(round(t_years / delta_fine))
    rng = np.random.default_rng(np.random.SeedSequence((seed, STREAM_VOL, 0)))
    f = np.array([params.mu if f_init is None else f_init], dtype=float)
    path = np.empty(steps + 1)
    path[0] = f[0]
    done = 0
    while done < steps:
        block = min(_CHUNK_TARGET, steps - done)
        shocks = rng.standard_normal((block, 1))
        out = np.empty((block, 1))
        _cir_advance(f, shocks, delta_fine, params.kappa, params.mu, params.sigma, out)
        path[done + 1 : done + 1 + block] = out[:, 0]
        done += block
    return path


@dataclass(frozen=True)
class VolRealization:
    """Fine-grid volatility-factor paths plus the market Brownian that drove them.

    ``f_left[t]`` is the factor level at the start of fine step t, so it is
    also the level the price diffusion uses over that step; ``xw`` are the
    market Brownian standard normals (already embedded in the first
    factor's shocks through the leverage coefficient).
    """

    f_left: np.ndarray   # (L, nf)
    f_last: np.ndarray   # (nf,)
    xw: np.ndarray       # (L,)
    floor_hits: int
    cfg: SimConfig

    @property
    def fine_steps(self) -> int:
        return self.f_left.shape[0]

    def f_at_obs(self, substeps: int | None = None) -> np.ndarray:
        """(n_obs + 1, nf) factor levels on the observation grid."""
        sub = self.cfg.substeps if substeps is None else substeps
        return np.vstack([self.f_left[::sub], self.f_last])


def simulate_volatility(cfg: SimConfig, rep: int = 0) -> VolRealization:
    """Advance all variance factors over the fine grid in streaming chunks."""
    L = cfg.n_obs * cfg.substeps
    nf = cfg.n_factors
    rng = _rng(cfg, STREAM_VOL, rep)
    lev = cfg.leverage
    comp = math.sqrt(1.0 - lev * lev)
    start = cfg.cir.mu if cfg.f_init is None else cfg.f_init
    f = np.full(nf, float(start))
    f_left = np.empty((L, nf))
    xw = np.empty(L)
    chunk = _chunk_steps(cfg.substeps)
    hits = 0
    done = 0
    while done < L:
        block = min(chunk, L - done)
        w = rng.standard_normal(block)
        b = rng.standard_normal((block, nf))
        shocks = b
        shocks[:, 0] = lev * w + comp * b[:, 0]
        f_left[done : done + block] = f  # value at step start
        out = np.empty((block, nf))
        hits += _cir_advance(f, shocks, cfg.delta_fine,
                             cfg.cir.kappa, cfg.cir.mu, cfg.cir.sigma, out)
        # starts of steps after the first in this block are the previous ends
        f_left[done + 1 : done + block] = out[:-1]
        xw[done : done + block] = w
        done += block
    return VolRealization(f_left=f_left, f_last=f.copy(), xw=xw,
                          floor_hits=hits, cfg=cfg)


@dataclass(frozen=True)
class LatentPaths:
    """Ground truth recorded on the observation grid.

    Columns of ``f`` are the variance factors (market variance first);
    jump times/sizes are per price process, stocks first, market last.
    """

    times: np.ndarray        # (n+1,)
    f: np.ndarray            # (n+1, nf)
    jump_times: tuple
    jump_sizes: tuple
    cfg: SimConfig
    floor_hits: int
    fine_steps: int

    @property
    def n_stocks(self) -> int:
        return self.cfg.n_stocks

    @property
    def d(self) -> int:
        return self.cfg.n_stocks + 1

    def market_variance(self) -> np.ndarray:
        return self.f[:, 0]

    def idio_variance(self, j: int) -> np.ndarray:
        W = self.cfg.loadings()
        return self.cfg.intercept + self.f @ W[j]

    def idio_covariance(self, i: int, j: int) -> np.ndarray:
        if i == j:
            return self.idio_variance(i)
        return self.cfg.idio_corr * np.sqrt(self.idio_variance(i) * self.idio_variance(j))

    def beta(self) -> np.ndarray:
        return self.cfg.beta(self.times)

    def true_cov_path(self, rows: slice | None = None) -> np.ndarray:
        """(n+1, d, d) spot covariance matrices of (stocks..., market)."""
        sl = rows if rows is not None else slice(None)
        cx = self.market_variance()[sl]
        beta = self.beta()[sl]
        ns = self.n_stocks
        d = self.d
        m = cx.shape[0]
        C = np.empty((m, d, d))
        sys = beta * beta * cx
        cz = np.stack([self.idio_variance(j)[sl] for j in range(ns)], axis=1)
        for i in range(ns):
            C[:, i, i] = sys + cz[:, i]
            for j in range(i + 1, ns):
                C[:, i, j] = C[:, j, i] = sys + self.cfg.idio_corr * np.sqrt(
                    cz[:, i] * cz[:, j]
                )
            C[:, i, ns] = C[:, ns, i] = beta * cx
        C[:, ns, ns] = cx
        return C

    def mart_loadings(self, rows: slice | None = None) -> np.ndarray:
        """(m, nf, d, d) loadings of each covariance entry's martingale part
        on the independent factor shocks; the spot covariation between entries
        (g,h) and (a,b) is the shock-wise product summed over factors."""
        sl = rows if rows is not None else slice(None)
        cfg = self.cfg
        nf = cfg.n_factors
        ns = self.n_stocks
        d = self.d
        f = self.f[sl]
        cx = f[:, 0]
        beta = self.beta()[sl]
        m = f.shape[0]
        diff = cfg.cir.sigma * np.sqrt(np.maximum(f, 0.0))  # (m, nf) factor diffusions
        W = cfg.loadings()
        cz = np.stack([self.idio_variance(j)[sl] for j in range(ns)], axis=1)

        lam = np.zeros((m, nf, d, d))
        lz = W[None, :, :] * diff[:, None, :]               # (m, ns, nf) idio var loadings
        mkt = np.zeros((m, nf))
        mkt[:, 0] = diff[:, 0]                              # market variance loading
        sys = (beta * beta)[:, None] * mkt                  # systematic part, all entries
        for i in range(ns):
            lam[:, :, i, i] = sys + lz[:, i]
            for j in range(i + 1, ns):
                amp_i = 0.5 * cfg.idio_corr * np.sqrt(cz[:, j] / cz[:, i])
                amp_j = 0.5 * cfg.idio_corr * np.sqrt(cz[:, i] / cz[:, j])
                cross = sys + amp_i[:, None] * lz[:, i] + amp_j[:, None] * lz[:, j]
                lam[:, :, i, j] = lam[:, :, j, i] = cross
            lam[:, :, i, ns] = lam[:, :, ns, i] = beta[:, None] * mkt
        lam[:, :, ns, ns] = mkt
        return lam


def build_panel(cfg: SimConfig, vol: VolRealization, rep: int = 0):
    """Sample prices on the observation grid given a volatility realization.

    The realization only needs to share the config's fine grid; its own
    observation step may differ, which lets one fine-grid realization
    back panels sampled at several frequencies.
    """
    if vol.fine_steps != cfg.n_obs * cfg.substeps or not math.isclose(
        vol.cfg.delta_fine, cfg.delta_fine, rel_tol=1e-12
    ):
        raise GridMismatch("volatility realization fine grid does not match the config")
    n = cfg.n_obs
    ns = cfg.n_stocks
    sub = cfg.substeps
    dt = cfg.delta_fine
    sq = math.sqrt(dt)
    rho = cfg.idio_corr
    a_common = math.sqrt(rho)
    a_own = math.sqrt(1.0 - rho)
    W = cfg.loadings()

    rng_idio = _rng(cfg, STREAM_IDIO, rep)
    incr_obs = np.zeros((n, ns + 1))
    chunk = _chunk_steps(sub)
    done = 0
    while done < vol.fine_steps:
        block = min(chunk, vol.fine_steps - done)
        sl = slice(done, done + block)
        f = vol.f_left[sl]
        cx = f[:, 0]
        cz = cfg.intercept + f @ W.T                       # (block, ns)
        t_left = (np.arange(done, done + block)) * dt
        beta = cfg.beta(t_left)
        dxc = np.sqrt(cx) * sq * vol.xw[sl]
        g = rng_idio.standard_normal(block)
        e = rng_idio.standard_normal((block, ns))
        xi = a_common * g[:, None] + a_own * e
        dy = beta[:, None] * dxc[:, None] + np.sqrt(cz) * sq * xi
        fine = np.concatenate([dy, dxc[:, None]], axis=1)
        obs0 = done // sub
        nob = block // sub
        incr_obs[obs0 : obs0 + nob] = fine.reshape(nob, sub, ns + 1).sum(axis=1)
        done += block

    prices = np.vstack([np.zeros((1, ns + 1)), np.cumsum(incr_obs, axis=0)])

    rng_jump = _rng(cfg, STREAM_JUMP, rep)
    jt, js = [], []
    for col in range(ns + 1):
        count = rng_jump.poisson(cfg.jump_intensity * cfg.t_years)
        times = np.sort(rng_jump.uniform(0.0, cfg.t_years, size=count))
        sizes = rng_jump.normal(0.0, cfg.jump_sd, size=count)
        jt.append(times)
        js.append(sizes)
        if count:
            idx = np.minimum(np.ceil(times / cfg.delta_n).astype(np.int64), n)
            idx = np.maximum(idx, 1)
            bump = np.zeros(n + 1)
            np.add.at(bump, idx, sizes)
            prices[:, col] += np.cumsum(bump)

    labels = tuple(f"S{j + 1}" for j in range(ns)) + ("X",)
    day_index = np.concatenate([[0], np.arange(n) // cfg.obs_per_day])
    panel = ReturnPanel(labels=labels, log_prices=prices, delta_n=cfg.delta_n,
                        day_index=day_index, factor_count=1)
    latent = LatentPaths(
        times=np.arange(n + 1) * cfg.delta_n,
        f=vol.f_at_obs(sub),
        jump_times=tuple(jt),
        jump_sizes=tuple(js),
        cfg=cfg,
        floor_hits=vol.floor_hits,
        fine_steps=vol.fine_steps,
    )
    return panel, latent


def simulate_model(cfg: SimConfig, rep: int = 0,
                   vol: VolRealization | None = None):
    """Simulate one replication: (ReturnPanel, LatentPaths).

    Pass a precomputed ``vol`` to hold the volatility paths (and the
    market Brownian that drives them) fixed while prices and jumps are
    redrawn per replication.
    """
    if vol is None:
        vol = simulate_volatility(cfg, rep)
    return build_panel(cfg, vol, rep)
