"""Asymptotic covariance estimation for vectors of covariation estimates.

Three raw sums are formed from the spot path: a pure noise-kernel term,
a pure squared-increment term, and a mixed term. Fixed linear
combinations of the three (with weights depending only on the window
scale theta) consistently estimate the three components of the limiting
covariance, and their sum estimates the full entry. The estimated matrix
is symmetric but not guaranteed positive semi-definite in finite
samples; negative diagonals are flagged, never clamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.functionals import Functional
from .core.paths import SpotCovPath, VolJumpMask
from .errors import DimensionMismatch, PathTooShort
from .quadcov import PathWorkspace


@dataclass(frozen=True)
class AvarMatrix:
    """kappa x kappa asymptotic covariance estimate with its raw components."""

    sigma: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    omega3: np.ndarray
    theta: float
    delta_n: float

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "sigma", s)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise DimensionMismatch("sigma must be square")
        scale = max(float(np.max(np.abs(s))), 1.0)
        if np.max(np.abs(s - s.T)) > 1e-10 * scale:
            raise DimensionMismatch("sigma must be symmetric")

    @property
    def kappa(self) -> int:
        return self.sigma.shape[0]

    @property
    def negative_diagonal(self) -> np.ndarray:
        """Finite-sample negative variance entries (reported, not clamped)."""
        return np.diag(self.sigma) < 0.0


def omega_terms(
    Hr: Functional,
    Gr: Functional,
    Hs: Functional,
    Gs: Functional,
    path: SpotCovPath,
    mask: VolJumpMask | None = None,
    workspace: PathWorkspace | None = None,
) -> tuple[float, float, float]:
    """The three raw sums feeding one covariance entry.

    Window increments enter through their gradient projections, the
    noise kernel through contractions of gradient pairs; the jump
    indicator spans four consecutive window lags when a mask is given.
    """
    kn, N = path.k_n, path.length
    count = N - 5 * kn
    if count <= 0:
        raise PathTooShort(
            f"variance sums need more than 5*k_n = {5 * kn} windows, got {N}"
        )
    ws = workspace or PathWorkspace(path, mask)
    rng = slice(kn, kn + count)

    q_hh = ws.contract(Hr, Hs)[rng]
    q_gg = ws.contract(Gr, Gs)[rng]
    q_hg = ws.contract(Hr, Gs)[rng]
    q_gh = ws.contract(Gr, Hs)[rng]

    hr, gr = ws.lam_dot(Hr)[rng], ws.lam_dot(Gr)[rng]
    hs, gs = ws.lam_dot(Hs)[rng], ws.lam_dot(Gs)[rng]
    off = 2 * kn
    hr2, gr2 = ws.lam_dot(Hr, off)[rng], ws.lam_dot(Gr, off)[rng]
    hs2, gs2 = ws.lam_dot(Hs, off)[rng], ws.lam_dot(Gs, off)[rng]

    t1 = q_hh * q_gg + q_gh * q_hg
    t2 = 0.5 * (
        hr * hs * gr2 * gs2
        + gr * gs * hr2 * hs2
        + gr * hs * hr2 * gs2
        + hr * gs * gr2 * hs2
    )
    t3 = q_hh * gr * gs + q_gg * hr * hs + q_hg * gr * hs + q_gh * hr * gs

    ind = ws.indicator(kn, count, (0, kn, 2 * kn, 3 * kn))
    if ind is not None:
        t1, t2, t3 = t1[ind], t2[ind], t3[ind]
    o1 = path.delta_n * float(np.sum(t1))
    o2 = float(np.sum(t2))
    o3 = (3.0 / (2.0 * kn)) * float(np.sum(t3))
    return o1, o2, o3


def sigma_entry(omegas: tuple[float, float, float], theta: float) -> float:
    """Combine the three raw sums into one covariance entry.

    The middle combination removes the spot-noise contribution of the
    mixed sum; that contribution scales as (6 / theta^2) times the first
    sum (the kernel-squared noise enters each window increment with
    variance proportional to 1 / k_n = sqrt(delta_n) / theta, squared and
    summed over T / delta_n windows with the 3 / (2 k_n) prefactor).
    """
    o1, o2, o3 = omegas
    s1 = (6.0 / theta**3) * o1
    s3 = (3.0 / (2.0 * theta)) * (o3 - (6.0 / theta**2) * o1)
    s2 = (151.0 * theta / 140.0) * (9.0 / (4.0 * theta**2)) * (
        o2 + (4.0 / theta**2) * o1 - (4.0 / 3.0) * o3
    )
    return s1 + s2 + s3


def sigma_matrix(
    pairs: list[tuple[Functional, Functional]],
    path: SpotCovPath,
    mask: VolJumpMask | None = None,
    theta: float | None = None,
    workspace: PathWorkspace | None = None,
) -> AvarMatrix:
    """Covariance matrix across a list of (H, G) functional pairs.

    ``theta`` defaults to the value implied by the path's window,
    k_n * sqrt(delta_n).
    """
    if len(pairs) < 1:
        raise DimensionMismatch("need at least one functional pair")
    if theta is None:
        theta = path.k_n * np.sqrt(path.delta_n)
    ws = workspace or PathWorkspace(path, mask)
    kappa = len(pairs)
    om1 = np.zeros((kappa, kappa))
    om2 = np.zeros((kappa, kappa))
    om3 = np.zeros((kappa, kappa))
    sig = np.zeros((kappa, kappa))
    for r in range(kappa):
        Hr, Gr = pairs[r]
        for s in range(r, kappa):
            Hs, Gs = pairs[s]
            o = omega_terms(Hr, Gr, Hs, Gs, path, mask, workspace=ws)
            om1[r, s] = om1[s, r] = o[0]
            om2[r, s] = om2[s, r] = o[1]
            om3[r, s] = om3[s, r] = o[2]
            sig[r, s] = sig[s, r] = sigma_entry(o, theta)
    sig = 0.5 * (sig + sig.T)
    return AvarMatrix(
        sigma=sig, omega1=om1, omega2=om2, omega3=om3,
        theta=float(theta), delta_n=path.delta_n,
    )


def delta_method_var(phi_gradient: np.ndarray, sigma: AvarMatrix | np.ndarray) -> float:
    """Variance of a smooth scalar map of the estimate vector: g' Sigma g."""
    g = np.asarray(phi_gradient, dtype=float)
    S = sigma.sigma if isinstance(sigma, AvarMatrix) else np.asarray(sigma, dtype=float)
    if g.ndim != 1 or S.shape != (g.shape[0], g.shape[0]):
        raise DimensionMismatch(
            f"gradient of length {g.shape} incompatible with sigma of shape {S.shape}"
        )
    return float(g @ S @ g)
