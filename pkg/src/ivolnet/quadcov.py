"""Estimators of the covariation between two spot-covariance functionals.

Three estimators are provided. The plug-in (naive) one sums products of
functional increments across windows and is inconsistent because the
spot estimates carry measurement error. The two bias-corrected ones add
a multiplicative 3/2 factor, which undoes the triangular smoothing the
overlapping windows induce, and subtract an estimate of the covariance
of the measurement noise. The analog form (an) differences the
functional values themselves; the linearized form (lin) differences the
matrix entries and weights them by the functionals' gradients. The two
coincide exactly when both functionals are linear.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ._contractions import grad_dot, quad_kernel_contract
from .core.functionals import Functional
from .core.paths import SpotCovPath, VolJumpMask
from .errors import DomainError, MaskRangeError, PathTooShort

METHODS = ("naive", "an", "lin")


@dataclass(frozen=True)
class QuadCovEstimate:
    """One covariation estimate together with what produced it.

    ``summand_count`` is the number of windows in the summation range;
    ``kept_count`` is how many of them survived the jump indicator.
    ``nonneg_violation`` flags a negative estimate of a variance-type
    target (same functional on both sides), which the bias correction
    can produce in finite samples; the value is reported as-is.
    """

    value: float
    method: str
    pair_id: tuple[str, str]
    fingerprint: str
    summand_count: int
    kept_count: int
    nonneg_violation: bool = False


class PathWorkspace:
    """Caches per-path arrays shared by every estimator on one (path, mask).

    Functional values, gradients, window increments, indicator products,
    and the noise-kernel contractions are all computed once and reused,
    which keeps multi-block quantities (loadings, correlations, variance
    matrices) internally consistent and fast.
    """

    def __init__(self, path: SpotCovPath, mask: VolJumpMask | None = None):
        if mask is not None and mask.length != path.length:
            raise MaskRangeError(
                f"mask length {mask.length} does not match path length {path.length}"
            )
        self.path = path
        self.mask = mask
        self._vals: dict[int, np.ndarray] = {}
        self._grads: dict[int, np.ndarray] = {}
        self._contracts: dict[tuple[int, int], np.ndarray] = {}
        self._lam_dots: dict[tuple[int, int], np.ndarray] = {}
        self._lam: np.ndarray | None = None

    # -- cached pieces -------------------------------------------------------

    def values(self, F: Functional) -> np.ndarray:
        key = id(F)
        if key not in self._vals:
            self._vals[key] = F.value(self.path.values)
        return self._vals[key]

    def gradients(self, F: Functional) -> np.ndarray:
        key = id(F)
        if key not in self._grads:
            self._grads[key] = F.gradient(self.path.values)
        return self._grads[key]

    def lam(self) -> np.ndarray:
        """Window-to-window matrix increments C_hat[idx + k_n] - C_hat[idx]."""
        if self._lam is None:
            kn = self.path.k_n
            self._lam = self.path.values[kn:] - self.path.values[:-kn]
        return self._lam

    def contract(self, FA: Functional, FB: Functional) -> np.ndarray:
        """Noise-kernel contraction of two gradients along the whole path."""
        key = (id(FA), id(FB)) if id(FA) <= id(FB) else (id(FB), id(FA))
        if key not in self._contracts:
            A, B = (FA, FB) if key == (id(FA), id(FB)) else (FB, FA)
            self._contracts[key] = quad_kernel_contract(
                self.gradients(A),
                self.gradients(B),
                self.path.values,
                A.gradient_support(),
                B.gradient_support(),
            )
        return self._contracts[key]

    def lam_dot(self, F: Functional, offset: int = 0) -> np.ndarray:
        """<grad F at idx, lam at idx + offset> for idx in [0, N - k_n - offset)."""
        key = (id(F), offset)
        if key not in self._lam_dots:
            lam = self.lam()
            L = lam.shape[0] - offset
            self._lam_dots[key] = grad_dot(self.gradients(F)[:L], lam[offset:])
        return self._lam_dots[key]

    def indicator(self, start: int, count: int, lags: tuple[int, ...]) -> np.ndarray | None:
        """Product of no-jump events at idx + lag for idx in [start, start+count)."""
        if self.mask is None:
            return None
        out = np.ones(count, dtype=bool)
        for lag in lags:
            lo, hi = start + lag, start + lag + count
            if lo < 0 or hi > self.mask.length or not np.all(self.mask.defined[lo:hi]):
                raise MaskRangeError(
                    f"jump mask undefined on indices [{lo}, {hi}) needed by the estimator"
                )
            out &= self.mask.no_jump[lo:hi]
        return out


def _fingerprint(path: SpotCovPath, method: str, masked: bool) -> str:
    payload = f"{method}|kn={path.k_n}|dn={path.delta_n!r}|N={path.length}|mask={masked}"
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _finalize(
    value: float,
    method: str,
    H: Functional,
    G: Functional,
    path: SpotCovPath,
    count: int,
    kept: int,
    masked: bool,
) -> QuadCovEstimate:
    return QuadCovEstimate(
        value=float(value),
        method=method,
        pair_id=(H.name, G.name),
        fingerprint=_fingerprint(path, method, masked),
        summand_count=count,
        kept_count=kept,
        nonneg_violation=(H.name == G.name and value < 0.0),
    )


def _check_arity(H: Functional, G: Functional, path: SpotCovPath) -> None:
    if H.d != path.d or G.d != path.d:
        raise DomainError(
            f"functional arity ({H.d}, {G.d}) does not match path dimension {path.d}"
        )


def qc_naive(H: Functional, G: Functional, path: SpotCovPath,
             workspace: PathWorkspace | None = None) -> QuadCovEstimate:
    """Plug-in covariation estimator: no truncation, no bias correction."""
    _check_arity(H, G, path)
    kn, N = path.k_n, path.length
    if N < kn + 1:
        raise PathTooShort(f"need at least k_n + 1 = {kn + 1} windows, got {N}")
    ws = workspace or PathWorkspace(path)
    hv, gv = ws.values(H), ws.values(G)
    dh = hv[kn:] - hv[:-kn]
    dg = gv[kn:] - gv[:-kn]
    value = np.sum(dh * dg) / kn
    return _finalize(value, "naive", H, G, path, dh.shape[0], dh.shape[0], False)


def _bias_corrected(
    method: str,
    H: Functional,
    G: Functional,
    path: SpotCovPath,
    mask: VolJumpMask | None,
    workspace: PathWorkspace | None,
) -> QuadCovEstimate:
    _check_arity(H, G, path)
    kn, N = path.k_n, path.length
    count = N - 3 * kn
    if count <= 0:
        raise PathTooShort(
            f"bias-corrected estimators need more than 3*k_n = {3 * kn} windows, got {N}"
        )
    ws = workspace or PathWorkspace(path, mask)
    rng = slice(kn, kn + count)

    corr = (2.0 / kn) * ws.contract(H, G)[rng]
    if method == "an":
        hv, gv = ws.values(H), ws.values(G)
        cross = (hv[kn:] - hv[:-kn])[rng] * (gv[kn:] - gv[:-kn])[rng]
    else:
        cross = ws.lam_dot(H)[rng] * ws.lam_dot(G)[rng]
    summand = cross - corr

    ind = ws.indicator(kn, count, (0, kn))
    if ind is not None:
        kept = int(np.count_nonzero(ind))
        value = (3.0 / (2.0 * kn)) * np.sum(summand[ind])
    else:
        kept = count
        value = (3.0 / (2.0 * kn)) * np.sum(summand)
    return _finalize(value, method, H, G, path, count, kept, ind is not None)


def qc_an(H: Functional, G: Functional, path: SpotCovPath,
          mask: VolJumpMask | None = None,
          workspace: PathWorkspace | None = None) -> QuadCovEstimate:
    """Bias-corrected analog estimator built from functional increments."""
    return _bias_corrected("an", H, G, path, mask, workspace)


def qc_lin(H: Functional, G: Functional, path: SpotCovPath,
           mask: VolJumpMask | None = None,
           workspace: PathWorkspace | None = None) -> QuadCovEstimate:
    """Bias-corrected linearized estimator built from gradient-weighted entry increments."""
    return _bias_corrected("lin", H, G, path, mask, workspace)


def estimate(method: str, H: Functional, G: Functional, path: SpotCovPath,
             mask: VolJumpMask | None = None,
             workspace: PathWorkspace | None = None) -> QuadCovEstimate:
    """Dispatch by method name ('naive', 'an', or 'lin')."""
    if method == "naive":
        return qc_naive(H, G, path, workspace)
    if method == "an":
        return qc_an(H, G, path, mask, workspace)
    if method == "lin":
        return qc_lin(H, G, path, mask, workspace)
    raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")


def summation_counts(path: SpotCovPath, mask: VolJumpMask | None,
                     method: str) -> tuple[int, int]:
    """(summand_count, kept_count) of the method's summation range."""
    kn, N = path.k_n, path.length
    count = N - kn if method == "naive" else N - 3 * kn
    if count <= 0:
        raise PathTooShort(f"path of {N} windows too short for method {method!r}")
    if mask is None or method == "naive":
        return count, count
    ws = PathWorkspace(path, mask)
    ind = ws.indicator(kn, count, (0, kn))
    return count, int(np.count_nonzero(ind))
