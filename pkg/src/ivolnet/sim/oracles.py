"""Ground-truth quantities computed from latent simulated paths.

These are the benchmarks every estimator is judged against: realized
covariations of the true latent variance paths, the derived dependence
measures they imply, and a Riemann plug-in of the limiting covariance
formulas using the true spot covariance and its true volatility.
"""

from __future__ import annotations

import numpy as np

from .._contractions import grad_dot, quad_kernel_contract
from ..core.functionals import Functional
from ..errors import GridMismatch, NonpositiveDiagonal
from .dgp import LatentPaths

_CHUNK = 262_144


def oracle_quadcov(latent_h: np.ndarray, latent_g: np.ndarray) -> float:
    """Realized covariation of two latent scalar paths on their common grid."""
    h = np.asarray(latent_h, dtype=float)
    g = np.asarray(latent_g, dtype=float)
    if h.shape != g.shape or h.ndim != 1:
        raise GridMismatch(f"paths must share one grid, got shapes {h.shape} and {g.shape}")
    return float(np.sum(np.diff(h) * np.diff(g)))


def functional_paths(latent: LatentPaths, funcs: list[Functional]) -> np.ndarray:
    """Evaluate functionals on the true covariance path; (n+1, len(funcs))."""
    n1 = latent.times.shape[0]
    out = np.empty((n1, len(funcs)))
    for lo in range(0, n1, _CHUNK):
        hi = min(lo + _CHUNK, n1)
        C = latent.true_cov_path(rows=slice(lo, hi))
        for k, F in enumerate(funcs):
            out[lo:hi, k] = F.value(C)
    return out


def default_pi_paths(latent: LatentPaths) -> np.ndarray:
    """Latent paths of the default idiovol factor (the market variance)."""
    return latent.market_variance()[:, None]


def estimand_oracles(latent: LatentPaths, j: int = 0, s: int = 1) -> dict[str, float]:
    """True values of the dependence measures for one stock pair.

    All covariations are realized on the latent grid; the factor is the
    market variance. Model coefficients make the loading of stock 1 on
    the market variance 0.45 under model 2.
    """
    cz_j = latent.idio_variance(j)
    cz_s = latent.idio_variance(s)
    pi = latent.market_variance()
    q_jj = oracle_quadcov(cz_j, cz_j)
    q_js = oracle_quadcov(cz_j, cz_s)
    q_ss = oracle_quadcov(cz_s, cz_s)
    a = oracle_quadcov(pi, pi)
    b_j = oracle_quadcov(pi, cz_j)
    b_s = oracle_quadcov(pi, cz_s)
    if min(q_jj, q_ss, a) <= 0.0:
        raise NonpositiveDiagonal("degenerate latent paths")
    gamma_j = b_j / a
    gamma_s = b_s / a
    r_js = q_js - gamma_j * gamma_s * a
    r_jj = q_jj - gamma_j**2 * a
    r_ss = q_ss - gamma_s**2 * a
    return {
        "qc_idiovol": q_js,
        "gamma": gamma_j,
        "gamma_s": gamma_s,
        "r2": gamma_j**2 * a / q_jj,
        "corr_idiovol": q_js / np.sqrt(q_jj * q_ss),
        "qc_resid": r_js,
        "corr_resid": r_js / np.sqrt(r_jj * r_ss),
        "qc_pi_j": b_j,
    }


def sigma_oracle(
    latent: LatentPaths,
    pairs: list[tuple[Functional, Functional]],
    theta: float,
) -> np.ndarray:
    """Riemann plug-in of the limiting covariance using true latent paths.

    Integrates the three limit components over the recorded grid with the
    true spot covariance in the quartic kernel and the true spot
    volatility-of-volatility (via the factor-shock loadings) in the
    quadratic kernels.
    """
    kappa = len(pairs)
    n1 = latent.times.shape[0]
    dt = float(latent.times[1] - latent.times[0])
    s1 = np.zeros((kappa, kappa))
    s2 = np.zeros((kappa, kappa))
    s3 = np.zeros((kappa, kappa))
    funcs: list[Functional] = []
    for H, G in pairs:
        for F in (H, G):
            if all(F is not q for q in funcs):
                funcs.append(F)

    for lo in range(0, n1 - 1, _CHUNK):
        hi = min(lo + _CHUNK, n1 - 1)
        rows = slice(lo, hi)
        C = latent.true_cov_path(rows=rows)
        lam = latent.mart_loadings(rows=rows)       # (m, nf, d, d)
        grads = {id(F): F.gradient(C) for F in funcs}
        # per-shock projections of every gradient
        proj = {
            id(F): np.stack(
                [grad_dot(grads[id(F)], lam[:, m]) for m in range(lam.shape[1])],
                axis=1,
            )
            for F in funcs
        }

        def qc_kernel(A: Functional, B: Functional) -> np.ndarray:
            return quad_kernel_contract(
                grads[id(A)], grads[id(B)], C,
                A.gradient_support(), B.gradient_support(),
            )

        def vv_kernel(A: Functional, B: Functional) -> np.ndarray:
            return np.sum(proj[id(A)] * proj[id(B)], axis=1)

        for r in range(kappa):
            Hr, Gr = pairs[r]
            for s in range(r, kappa):
                Hs, Gs = pairs[s]
                c_hh, c_gg = qc_kernel(Hr, Hs), qc_kernel(Gr, Gs)
                c_hg, c_gh = qc_kernel(Hr, Gs), qc_kernel(Gr, Hs)
                v_hh, v_gg = vv_kernel(Hr, Hs), vv_kernel(Gr, Gs)
                v_hg, v_gh = vv_kernel(Hr, Gs), vv_kernel(Gr, Hs)
                s1[r, s] += dt * float(np.sum(c_hh * c_gg + c_gh * c_hg))
                s2[r, s] += dt * float(np.sum(v_hh * v_gg + v_gh * v_hg))
                s3[r, s] += dt * float(
                    np.sum(c_hh * v_gg + c_gg * v_hh + c_hg * v_gh + c_gh * v_hg)
                )

    total = (6.0 / theta**3) * s1 + (151.0 * theta / 140.0) * s2 + (3.0 / (2.0 * theta)) * s3
    total = np.where(np.triu(np.ones_like(total)) > 0, total, 0.0)
    return total + np.triu(total, 1).T
