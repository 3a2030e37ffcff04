"""Derived dependence measures for idiosyncratic-volatility factor models.

Every quantity here is a smooth map of a stack of covariation estimates:
factor loadings solve a linear system in the factor-block covariations,
residual covariations subtract the explained part, and correlations,
R-squared and the common-part ratio are ratios of stack entries. All
blocks for one pair are computed from a single shared spot path and a
single method, which keeps numerators and denominators internally
consistent; standard errors propagate through the stack by the delta
method with analytic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .avar import AvarMatrix, delta_method_var, sigma_matrix
from .core.config import EstimatorConfig, SECONDS_PER_YEAR
from .core.functionals import Functional, idio_cov, idiovol, selector
from .core.panel import ReturnPanel
from .core.paths import SpotCovPath, VolJumpMask
from .errors import (
    BlockTooShort,
    DomainError,
    NonpositiveDiagonal,
    SingularFactorQuadCov,
    ZeroDenominator,
)
from .inference import TestResult, t_test_quadcov, wald_test
from .quadcov import PathWorkspace, QuadCovEstimate, estimate, summation_counts
from .spot import compute_thresholds


@dataclass(frozen=True)
class IdioVolModelSpec:
    """One stock's idiosyncratic-volatility factor model.

    ``factor_indices`` are the return-factor columns of the panel the
    idiosyncratic variance is defined against; ``idiovol_factors`` are the
    smooth functionals driving the idiosyncratic variance itself
    (by default the variances of the return factors).
    """

    stock: int
    factor_indices: tuple[int, ...]
    d: int
    idiovol_factors: tuple[Functional, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.idiovol_factors is None:
            object.__setattr__(
                self,
                "idiovol_factors",
                tuple(selector(f, f, self.d) for f in self.factor_indices),
            )
        if len(self.idiovol_factors) < 1:
            raise DomainError("need at least one idiosyncratic-volatility factor")
        for F in self.idiovol_factors:
            if F.d != self.d:
                raise DomainError("idiovol factor arity does not match d")

    @property
    def d_pi(self) -> int:
        return len(self.idiovol_factors)


def spec_for_panel(panel: ReturnPanel, stock: int,
                   idiovol_factors: tuple[Functional, ...] | None = None) -> IdioVolModelSpec:
    if idiovol_factors is None:
        return IdioVolModelSpec(stock, panel.factor_indices, panel.d)
    return IdioVolModelSpec(stock, panel.factor_indices, panel.d, tuple(idiovol_factors))


# ---------------------------------------------------------------------------
# block stack for one pair of stocks
# ---------------------------------------------------------------------------


class PairBlocks:
    """All covariation blocks shared by the derived quantities of one pair.

    Stack layout: [Zj Zj], [Zj Zs], [Zs Zs], then [Pi_k Zj] for each k,
    [Pi_k Zs] for each k, then the upper triangle of [Pi_k Pi_l].
    """

    def __init__(
        self,
        path: SpotCovPath,
        j: int,
        s: int,
        factor_indices: tuple[int, ...],
        pi_funcs: tuple[Functional, ...],
        mask: VolJumpMask | None = None,
    ):
        d = path.d
        self.j, self.s = j, s
        self.path, self.mask = path, mask
        self.Zj = idiovol(j, factor_indices, d)
        self.Zs = idiovol(s, factor_indices, d) if s != j else self.Zj
        self.pi = tuple(pi_funcs)
        m = len(self.pi)
        self.m = m
        self.workspace = PathWorkspace(path, mask)

        pairs: list[tuple[Functional, Functional]] = [
            (self.Zj, self.Zj), (self.Zj, self.Zs), (self.Zs, self.Zs)
        ]
        pairs += [(self.pi[k], self.Zj) for k in range(m)]
        pairs += [(self.pi[k], self.Zs) for k in range(m)]
        self._tri = [(k, l) for k in range(m) for l in range(k, m)]
        pairs += [(self.pi[k], self.pi[l]) for k, l in self._tri]
        self.pairs = pairs
        self.kappa = len(pairs)
        self._sigma: AvarMatrix | None = None
        self._q: dict[str, np.ndarray] = {}
        self._est: dict[str, list[QuadCovEstimate]] = {}

    # index helpers ----------------------------------------------------------

    @property
    def i_jj(self) -> int:
        return 0

    @property
    def i_js(self) -> int:
        return 1

    @property
    def i_ss(self) -> int:
        return 2

    def i_bj(self, k: int) -> int:
        return 3 + k

    def i_bs(self, k: int) -> int:
        return 3 + self.m + k

    def i_pp(self, k: int, l: int) -> int:
        k, l = min(k, l), max(k, l)
        return 3 + 2 * self.m + self._tri.index((k, l))

    # computation --------------------------------------------------------------

    def estimates(self, method: str) -> list[QuadCovEstimate]:
        if method not in self._est:
            self._est[method] = [
                estimate(method, H, G, self.path, self.mask, workspace=self.workspace)
                for H, G in self.pairs
            ]
        return self._est[method]

    def q(self, method: str) -> np.ndarray:
        if method not in self._q:
            self._q[method] = np.array([e.value for e in self.estimates(method)])
        return self._q[method]

    def sigma(self) -> AvarMatrix:
        if self._sigma is None:
            self._sigma = sigma_matrix(
                self.pairs, self.path, self.mask, workspace=self.workspace
            )
        return self._sigma

    def pp_matrix(self, method: str) -> np.ndarray:
        q = self.q(method)
        A = np.empty((self.m, self.m))
        for k, l in self._tri:
            A[k, l] = A[l, k] = q[self.i_pp(k, l)]
        return A

    def b_vector(self, method: str, which: str) -> np.ndarray:
        q = self.q(method)
        idx = [self.i_bj(k) if which == "j" else self.i_bs(k) for k in range(self.m)]
        return q[idx]


# -- stack calculus: values plus gradients with respect to the stack ---------


def _solve_pp(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        out = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularFactorQuadCov("factor covariation matrix is singular") from exc
    if not np.all(np.isfinite(out)):
        raise SingularFactorQuadCov("factor covariation solve produced non-finite values")
    return out


def _gamma_with_grad(blocks: PairBlocks, method: str, which: str):
    """Loadings gamma = A^{-1} b and their gradient rows over the stack."""
    m = blocks.m
    A = blocks.pp_matrix(method)
    b = blocks.b_vector(method, which)
    gamma = _solve_pp(A, b)
    Ainv = np.linalg.inv(A)
    grads = np.zeros((m, blocks.kappa))
    ib = blocks.i_bj if which == "j" else blocks.i_bs
    for c in range(m):
        for k in range(m):
            grads[c, ib(k)] = Ainv[c, k]
        for k, l in blocks._tri:
            if k == l:
                grads[c, blocks.i_pp(k, k)] = -Ainv[c, k] * gamma[k]
            else:
                grads[c, blocks.i_pp(k, l)] = -(Ainv[c, k] * gamma[l] + Ainv[c, l] * gamma[k])
    return gamma, grads


def _quadform_with_grad(blocks: PairBlocks, method: str, left: str, right: str):
    """t = b_left' A^{-1} b_right and its gradient over the stack."""
    A = blocks.pp_matrix(method)
    bl = blocks.b_vector(method, left)
    br = blocks.b_vector(method, right)
    gl = _solve_pp(A, bl)
    gr = _solve_pp(A, br)
    val = float(bl @ gr)
    g = np.zeros(blocks.kappa)
    ibl = blocks.i_bj if left == "j" else blocks.i_bs
    ibr = blocks.i_bj if right == "j" else blocks.i_bs
    for k in range(blocks.m):
        g[ibl(k)] += gr[k]
        g[ibr(k)] += gl[k]
    for k, l in blocks._tri:
        if k == l:
            g[blocks.i_pp(k, k)] -= gl[k] * gr[k]
        else:
            g[blocks.i_pp(k, l)] -= gl[k] * gr[l] + gl[l] * gr[k]
    return val, g


def _ratio_corr(x, y, z, gx, gy, gz):
    """corr = x / sqrt(y z) with gradient; requires y, z > 0."""
    if y <= 0.0 or z <= 0.0:
        raise NonpositiveDiagonal(
            f"variance-type covariation estimates must be positive, got {y} and {z}"
        )
    denom = np.sqrt(y * z)
    val = x / denom
    grad = gx / denom - (x / (2.0 * y * denom)) * gy - (x / (2.0 * z * denom)) * gz
    return float(val), grad


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def gamma_loadings(
    spec: IdioVolModelSpec,
    path: SpotCovPath,
    mask: VolJumpMask | None = None,
    method: str = "lin",
    blocks: PairBlocks | None = None,
    with_avar: bool = True,
):
    """Idiosyncratic-volatility factor loadings and their asymptotic covariance.

    Loadings solve [Pi, Pi] gamma = [Pi, C_Z]; the covariance propagates
    the stacked covariation covariance through that solve.
    """
    bl = blocks or PairBlocks(path, spec.stock, spec.stock, spec.factor_indices,
                              spec.idiovol_factors, mask)
    gamma, grads = _gamma_with_grad(bl, method, "j")
    if not with_avar:
        return gamma, None
    sig = bl.sigma()
    avar = grads @ sig.sigma @ grads.T
    return gamma, avar


def resid_quadcov(
    spec_j: IdioVolModelSpec,
    spec_s: IdioVolModelSpec,
    path: SpotCovPath,
    mask: VolJumpMask | None = None,
    method: str = "lin",
    blocks: PairBlocks | None = None,
) -> QuadCovEstimate:
    """Covariation between residual idiosyncratic variances of two stocks.

    Identity: this plus gamma_j' [Pi, Pi] gamma_s equals the total
    idiosyncratic covariation block exactly.
    """
    bl = blocks or _pair_blocks_from_specs(spec_j, spec_s, path, mask)
    q = bl.q(method)
    t, _ = _quadform_with_grad(bl, method, "j", "s")
    value = q[bl.i_js] - t
    count, kept = summation_counts(path, mask, "an" if method not in ("naive",) else method)
    same = spec_j.stock == spec_s.stock
    return QuadCovEstimate(
        value=float(value),
        method=method,
        pair_id=(f"resid[{spec_j.stock}]", f"resid[{spec_s.stock}]"),
        fingerprint=f"{method}|kn={path.k_n}|N={path.length}",
        summand_count=count,
        kept_count=kept,
        nonneg_violation=bool(same and value < 0.0),
    )


def corr_idiovol(
    j: int,
    s: int,
    factor_indices: tuple[int, ...],
    path: SpotCovPath,
    mask: VolJumpMask | None = None,
    method: str = "lin",
    workspace: PathWorkspace | None = None,
) -> float:
    """Covariation-based correlation between two idiosyncratic variances."""
    d = path.d
    Zj = idiovol(j, factor_indices, d)
    Zs = idiovol(s, factor_indices, d) if s != j else Zj
    ws = workspace or PathWorkspace(path, mask)
    x = estimate(method, Zj, Zs, path, mask, workspace=ws).value
    y = estimate(method, Zj, Zj, path, mask, workspace=ws).value
    z = estimate(method, Zs, Zs, path, mask, workspace=ws).value
    val, _ = _ratio_corr(x, y, z, np.zeros(1), np.zeros(1), np.zeros(1))
    return val


def corr_resid(
    spec_j: IdioVolModelSpec,
    spec_s: IdioVolModelSpec,
    path: SpotCovPath,
    mask: VolJumpMask | None = None,
    method: str = "lin",
    blocks: PairBlocks | None = None,
) -> float:
    """Correlation between the residual idiosyncratic variances."""
    bl = blocks or _pair_blocks_from_specs(spec_j, spec_s, path, mask)
    q = bl.q(method)
    t_js, _ = _quadform_with_grad(bl, method, "j", "s")
    t_jj, _ = _quadform_with_grad(bl, method, "j", "j")
    t_ss, _ = _quadform_with_grad(bl, method, "s", "s")
    z = np.zeros(1)
    val, _ = _ratio_corr(q[bl.i_js] - t_js, q[bl.i_jj] - t_jj, q[bl.i_ss] - t_ss, z, z, z)
    return val


def r2_idiovolfm(
    spec: IdioVolModelSpec,
    path: SpotCovPath,
    mask: VolJumpMask | None = None,
    method: str = "lin",
    blocks: PairBlocks | None = None,
) -> float:
    """Share of a stock's idiosyncratic-variance variation the factors explain."""
    bl = blocks or PairBlocks(path, spec.stock, spec.stock, spec.factor_indices,
                              spec.idiovol_factors, mask)
    q = bl.q(method)
    t_jj, _ = _quadform_with_grad(bl, method, "j", "j")
    denom = q[bl.i_jj]
    if denom <= 0.0:
        raise NonpositiveDiagonal(f"total idiosyncratic covariation is {denom}")
    return float(t_jj / denom)


def q_measure(
    spec_j: IdioVolModelSpec,
    spec_s: IdioVolModelSpec,
    path: SpotCovPath,
    mask: VolJumpMask | None = None,
    method: str = "lin",
    blocks: PairBlocks | None = None,
) -> float:
    """Common part of the covariation between two idiosyncratic variances."""
    bl = blocks or _pair_blocks_from_specs(spec_j, spec_s, path, mask)
    q = bl.q(method)
    t_js, _ = _quadform_with_grad(bl, method, "j", "s")
    denom = q[bl.i_js]
    if denom == 0.0:
        raise ZeroDenominator("total idiosyncratic covariation between the pair is zero")
    return float(t_js / denom)


def _pair_blocks_from_specs(spec_j, spec_s, path, mask) -> PairBlocks:
    if spec_j.factor_indices != spec_s.factor_indices:
        raise DomainError("both stocks must use the same return-factor columns")
    if tuple(F.name for F in spec_j.idiovol_factors) != tuple(
        F.name for F in spec_s.idiovol_factors
    ):
        raise DomainError("both stocks must use the same idiovol factors")
    return PairBlocks(path, spec_j.stock, spec_s.stock, spec_j.factor_indices,
                      spec_j.idiovol_factors, mask)


# ---------------------------------------------------------------------------
# full per-pair analysis (estimates, standard errors, tests)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Measured:
    value: float
    se: float | None = None


@dataclass(frozen=True)
class PairAnalysis:
    """Everything reported for one pair of stocks under one block stack."""

    j: int
    s: int
    methods: tuple[str, ...]
    quantities: dict  # method -> {name -> Measured}
    tests: dict       # method -> {name -> TestResult}
    sigma: AvarMatrix | None
    block_names: tuple[str, ...]
    blocks: dict      # method -> np.ndarray of raw covariation estimates


def analyze_pair(
    path: SpotCovPath,
    j: int,
    s: int,
    factor_indices: tuple[int, ...],
    pi_funcs: tuple[Functional, ...] | None = None,
    mask: VolJumpMask | None = None,
    methods: tuple[str, ...] = ("an", "lin"),
    with_sigma: bool = True,
) -> PairAnalysis:
    """Estimate all dependence measures for one pair of stocks.

    Ratio statistics that hit a non-positive variance estimate are
    reported as NaN rather than aborting the whole pair.
    """
    if pi_funcs is None:
        pi_funcs = tuple(selector(f, f, path.d) for f in factor_indices)
    bl = PairBlocks(path, j, s, factor_indices, pi_funcs, mask)
    sig = bl.sigma() if with_sigma else None
    dn = path.delta_n

    def se_of(grad: np.ndarray) -> float | None:
        if sig is None:
            return None
        v = delta_method_var(grad, sig)
        return float(dn**0.25 * np.sqrt(v)) if v >= 0.0 else None

    quantities: dict = {}
    tests: dict = {}
    for method in methods:
        q = bl.q(method)
        out: dict[str, Measured] = {}
        mtests: dict[str, TestResult] = {}

        e_js = np.zeros(bl.kappa)
        e_js[bl.i_js] = 1.0
        out["qc_idiovol"] = Measured(float(q[bl.i_js]), se_of(e_js))

        gamma, ggrads = _gamma_with_grad(bl, method, "j")
        gamma_s, sgrads = _gamma_with_grad(bl, method, "s")
        for k in range(bl.m):
            out[f"gamma_j[{k}]"] = Measured(float(gamma[k]), se_of(ggrads[k]))
            out[f"gamma_s[{k}]"] = Measured(float(gamma_s[k]), se_of(sgrads[k]))

        t_js, g_tjs = _quadform_with_grad(bl, method, "j", "s")
        t_jj, g_tjj = _quadform_with_grad(bl, method, "j", "j")
        t_ss, g_tss = _quadform_with_grad(bl, method, "s", "s")
        resid = q[bl.i_js] - t_js
        g_resid = e_js - g_tjs
        out["qc_resid"] = Measured(float(resid), se_of(g_resid))

        def guarded(fn):
            try:
                return fn()
            except (NonpositiveDiagonal, ZeroDenominator, SingularFactorQuadCov):
                return Measured(np.nan, None)

        def corr_total():
            e_jj = np.zeros(bl.kappa); e_jj[bl.i_jj] = 1.0
            e_ss = np.zeros(bl.kappa); e_ss[bl.i_ss] = 1.0
            val, grad = _ratio_corr(q[bl.i_js], q[bl.i_jj], q[bl.i_ss], e_js, e_jj, e_ss)
            return Measured(val, se_of(grad))

        def corr_residual():
            e_jj = np.zeros(bl.kappa); e_jj[bl.i_jj] = 1.0
            e_ss = np.zeros(bl.kappa); e_ss[bl.i_ss] = 1.0
            val, grad = _ratio_corr(
                resid, q[bl.i_jj] - t_jj, q[bl.i_ss] - t_ss,
                g_resid, e_jj - g_tjj, e_ss - g_tss,
            )
            return Measured(val, se_of(grad))

        def r2_j():
            denom = q[bl.i_jj]
            if denom <= 0.0:
                raise NonpositiveDiagonal("nonpositive diagonal")
            e_jj = np.zeros(bl.kappa); e_jj[bl.i_jj] = 1.0
            grad = g_tjj / denom - (t_jj / denom**2) * e_jj
            return Measured(float(t_jj / denom), se_of(grad))

        def q_js():
            denom = q[bl.i_js]
            if denom == 0.0:
                raise ZeroDenominator("zero denominator")
            grad = g_tjs / denom - (t_js / denom**2) * e_js
            return Measured(float(t_js / denom), se_of(grad))

        out["corr_idiovol"] = guarded(corr_total)
        out["corr_resid"] = guarded(corr_residual)
        out["r2"] = guarded(r2_j)
        out["q_measure"] = guarded(q_js)
        quantities[method] = out

        if sig is not None:
            mtests["no_idiovol_dependence"] = t_test_quadcov(
                q[bl.i_js], sig.sigma[bl.i_js, bl.i_js], dn
            )
            bidx = [bl.i_bj(k) for k in range(bl.m)]
            mtests["no_factor_loading"] = wald_test(
                q[bidx], sig.sigma[np.ix_(bidx, bidx)], dn
            )
            mtests["no_residual_dependence"] = t_test_quadcov(
                resid, delta_method_var(g_resid, sig), dn
            )
            tests[method] = mtests

    names = tuple(f"[{H.name},{G.name}]" for H, G in bl.pairs)
    return PairAnalysis(
        j=j, s=s, methods=tuple(methods), quantities=quantities, tests=tests,
        sigma=sig, block_names=names, blocks={m: bl.q(m) for m in methods},
    )


# ---------------------------------------------------------------------------
# integrated (block-spot) diagnostics on the return factor model
# ---------------------------------------------------------------------------


def default_block_len(panel: ReturnPanel, hours: float = 2.0) -> int:
    """Observations per spot block; defaults to two hours of data."""
    return max(int(round(hours * 3600.0 / (panel.delta_n * SECONDS_PER_YEAR))), 2)


def _block_spot(panel: ReturnPanel, cfg: EstimatorConfig, l_n: int) -> np.ndarray:
    n = panel.n_increments
    if l_n < 2 or l_n > n:
        raise BlockTooShort(f"block length {l_n} unusable for a panel with {n} increments")
    n_blocks = n // l_n
    incr = panel.increments()
    thresholds = compute_thresholds(panel, cfg)
    u = thresholds.per_increment(panel.increment_days())
    keep = np.all(np.abs(incr) <= u, axis=1)
    kept = np.where(keep[:, None], incr, 0.0)[: n_blocks * l_n]
    outer = kept[:, :, None] * kept[:, None, :]
    blocks = outer.reshape(n_blocks, l_n, panel.d, panel.d).sum(axis=1)
    return blocks / (l_n * panel.delta_n)


def integrated_functional(panel: ReturnPanel, cfg: EstimatorConfig,
                          F: Functional, l_n: int) -> float:
    """Riemann plug-in for the integral of F along the spot path."""
    C = _block_spot(panel, cfg, l_n)
    return float(np.sum(F.value(C)) * l_n * panel.delta_n)


def integrated_r2_rfm(panel: ReturnPanel, cfg: EstimatorConfig, j: int,
                      l_n: int | None = None) -> float:
    """Integrated share of a stock's variance explained by the return factors."""
    l_n = l_n or default_block_len(panel)
    fi = panel.factor_indices
    idio = integrated_functional(panel, cfg, idiovol(j, fi, panel.d), l_n)
    total = integrated_functional(panel, cfg, selector(j, j, panel.d), l_n)
    if total <= 0.0:
        raise NonpositiveDiagonal("integrated total variance is not positive")
    return 1.0 - idio / total


def corr_idio_returns(panel: ReturnPanel, cfg: EstimatorConfig, i: int, j: int,
                      l_n: int | None = None) -> float:
    """Integrated correlation between two stocks' idiosyncratic returns."""
    l_n = l_n or default_block_len(panel)
    fi = panel.factor_indices
    d = panel.d
    C = _block_spot(panel, cfg, l_n)
    cij = float(np.sum(idio_cov(i, j, fi, d).value(C)))
    cii = float(np.sum(idiovol(i, fi, d).value(C)))
    cjj = float(np.sum(idiovol(j, fi, d).value(C)))
    if cii <= 0.0 or cjj <= 0.0:
        raise NonpositiveDiagonal("integrated idiosyncratic variance is not positive")
    return cij / np.sqrt(cii * cjj)
