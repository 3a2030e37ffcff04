"""Spot covariance paths and volatility-jump event masks.

Index convention: ``values[idx]`` is the local estimate built from
increments idx+1 .. idx+k_n (1-based), i.e. the forward window starting
at time idx * delta_n, which is what it estimates the spot covariance
at. A path from a panel with n increments has n - k_n + 1 entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, DomainError


@dataclass(frozen=True)
class SpotCovPath:
    """Sequence of local covariance estimates plus the window that built them."""

    values: np.ndarray  # (N, d, d)
    k_n: int
    delta_n: float
    trunc_hits: np.ndarray | None = None  # (N,) zeroed increments per window

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise DimensionMismatch("values must be (N, d, d)")
        if self.k_n < 2:
            raise DomainError("k_n must be at least 2")
        if self.delta_n <= 0:
            raise DomainError("delta_n must be positive")
        if not np.all(np.isfinite(v)):
            raise DomainError("spot path contains non-finite entries")
        scale = max(float(np.max(np.abs(v))), 1.0)
        if np.max(np.abs(v - np.swapaxes(v, 1, 2))) > 1e-10 * scale:
            raise DomainError("spot covariance matrices must be symmetric")
        if np.min(np.einsum("ndd->nd", v)) < -1e-10 * scale:
            raise DomainError("spot covariance diagonals must be non-negative")
        if self.trunc_hits is not None:
            th = np.asarray(self.trunc_hits, dtype=np.int64)
            object.__setattr__(self, "trunc_hits", th)
            if th.shape != (v.shape[0],):
                raise DimensionMismatch("trunc_hits must have one entry per window")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class VolJumpMask:
    """Per-window no-volatility-jump events.

    ``no_jump[idx]`` is meaningful only where ``defined[idx]`` is True;
    undefined windows are never silently treated as jump-free.
    """

    no_jump: np.ndarray  # (N,) bool
    defined: np.ndarray  # (N,) bool

    def __post_init__(self):
        nj = np.asarray(self.no_jump, dtype=bool)
        df = np.asarray(self.defined, dtype=bool)
        object.__setattr__(self, "no_jump", nj)
        object.__setattr__(self, "defined", df)
        if nj.shape != df.shape or nj.ndim != 1:
            raise DimensionMismatch("no_jump and defined must be equal-length 1-d arrays")
        if np.any(nj & ~df):
            raise DomainError("undefined indices must not be marked jump-free")

    @property
    def length(self) -> int:
        return self.no_jump.shape[0]

    @classmethod
    def all_clear(cls, length: int) -> "VolJumpMask":
        """Mask that keeps every window (used when truncation is disabled)."""
        ones = np.ones(length, dtype=bool)
        return cls(no_jump=ones, defined=ones)
