"""Smooth scalar functionals of a covariance matrix, with analytic gradients.

Functionals map a d x d covariance matrix C to a scalar and expose the
d x d matrix of partial derivatives where every entry C[g, h] is treated
as an independent argument (the partial with respect to C[g, h] does not
touch C[h, g]). Symmetric formulas are therefore written over both
triangles, which is what makes the free double sums in the covariation
estimators come out right.

Everything evaluates on batches: passing C of shape (N, d, d) returns
values of shape (N,) and gradients of shape (N, d, d).
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, DomainError, SingularFactorBlock


def _as_batch(C: np.ndarray, d: int) -> tuple[np.ndarray, bool]:
    C = np.asarray(C, dtype=float)
    if C.shape[-2:] != (d, d):
        raise DimensionMismatch(f"expected trailing shape ({d}, {d}), got {C.shape}")
    if C.ndim == 2:
        return C[None, :, :], True
    if C.ndim == 3:
        return C, False
    raise DimensionMismatch(f"C must be (d, d) or (N, d, d), got shape {C.shape}")


class Functional:
    """Base class: a scalar map of a d x d matrix with an analytic gradient."""

    def __init__(self, d: int, name: str):
        self.d = int(d)
        self.name = name

    # subclasses implement the batched kernels
    def _values(self, C: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradients(self, C: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient_support(self) -> tuple[tuple[int, int], ...] | None:
        """Entries where the gradient can be non-zero; None means dense."""
        return None

    def value(self, C: np.ndarray):
        Cb, single = _as_batch(C, self.d)
        v = self._values(Cb)
        return float(v[0]) if single else v

    def gradient(self, C: np.ndarray):
        Cb, single = _as_batch(C, self.d)
        g = self._gradients(Cb)
        return g[0] if single else g

    # -- algebra -------------------------------------------------------------

    def _coerce(self, other) -> "Functional":
        if isinstance(other, Functional):
            if other.d != self.d:
                raise DimensionMismatch(f"arity mismatch: {self.d} vs {other.d}")
            return other
        return constant(float(other), self.d)

    def __add__(self, other):
        return _Combine("add", self, self._coerce(other))

    def __radd__(self, other):
        return _Combine("add", self._coerce(other), self)

    def __sub__(self, other):
        return _Combine("sub", self, self._coerce(other))

    def __rsub__(self, other):
        return _Combine("sub", self._coerce(other), self)

    def __mul__(self, other):
        return _Combine("mul", self, self._coerce(other))

    def __rmul__(self, other):
        return _Combine("mul", self._coerce(other), self)

    def __truediv__(self, other):
        return _Combine("div", self, self._coerce(other))

    def __rtruediv__(self, other):
        return _Combine("div", self._coerce(other), self)

    def __neg__(self):
        return constant(-1.0, self.d) * self

    def __repr__(self):
        return f"Functional({self.name}, d={self.d})"


class _Const(Functional):
    def __init__(self, c: float, d: int):
        super().__init__(d, repr(c))
        self.c = float(c)

    def _values(self, C):
        return np.full(C.shape[0], self.c)

    def _gradients(self, C):
        return np.zeros_like(C)

    def gradient_support(self):
        return ()


class _Selector(Functional):
    """Entry picker C[a, b]."""

    def __init__(self, a: int, b: int, d: int):
        if not (0 <= a < d and 0 <= b < d):
            raise DomainError(f"entry ({a}, {b}) outside a {d} x {d} matrix")
        super().__init__(d, f"C[{a},{b}]")
        self.a, self.b = a, b

    def _values(self, C):
        return C[:, self.a, self.b].copy()

    def _gradients(self, C):
        g = np.zeros_like(C)
        g[:, self.a, self.b] = 1.0
        return g

    def gradient_support(self):
        return ((self.a, self.b),)


def _factor_block_solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs batch-wise; A is (N, dF, dF), rhs (N, dF)."""
    if A.shape[-1] == 1:
        a = A[:, 0, 0]
        if np.any(a == 0.0):
            raise SingularFactorBlock("factor variance is zero")
        out = rhs / a[:, None]
    else:
        try:
            out = np.linalg.solve(A, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularFactorBlock("factor block not invertible") from exc
    if not np.all(np.isfinite(out)):
        raise SingularFactorBlock("factor block solve produced non-finite values")
    return out


class _IdioCov(Functional):
    """Idiosyncratic covariance of two stocks after projecting out the factors.

    For stocks p, q and factor columns F:
        C[p, q] - C[p, F] @ inv(C[F, F]) @ C[F, q].
    With p == q this is the idiosyncratic variance of stock p.
    """

    def __init__(self, p: int, q: int, factor_indices: tuple[int, ...], d: int):
        fi = tuple(int(k) for k in factor_indices)
        if len(fi) == 0:
            raise DomainError("idiosyncratic functionals need at least one factor column")
        if len(set(fi)) != len(fi) or any(not 0 <= k < d for k in fi):
            raise DomainError(f"invalid factor columns {fi} for d={d}")
        if p in fi or q in fi:
            raise DomainError("stock column coincides with a factor column")
        name = f"IdioVol[{p}]" if p == q else f"IdioCov[{p},{q}]"
        super().__init__(d, name)
        self.p, self.q, self.fi = int(p), int(q), fi

    def _blocks(self, C):
        fi = list(self.fi)
        A = C[:, fi][:, :, fi]           # (N, dF, dF) factor block as stored
        a = C[:, self.p, fi]             # row p over factor columns
        b = C[:, fi, self.q]             # factor rows, column q
        return A, a, b

    def _values(self, C):
        A, a, b = self._blocks(C)
        v = _factor_block_solve(A, b)
        return C[:, self.p, self.q] - np.einsum("nk,nk->n", a, v)

    def _gradients(self, C):
        A, a, b = self._blocks(C)
        v = _factor_block_solve(A, b)                 # inv(A) b
        u = _factor_block_solve(np.swapaxes(A, 1, 2), a)  # inv(A)^T a
        g = np.zeros_like(C)
        g[:, self.p, self.q] += 1.0
        fi = list(self.fi)
        g[:, self.p, fi] -= v
        g[:, fi, self.q] -= u
        # outer product u v^T on the factor block
        g[:, np.ix_(fi, fi)[0], np.ix_(fi, fi)[1]] += u[:, :, None] * v[:, None, :]
        return g

    def gradient_support(self):
        ent = [(self.p, self.q)]
        ent += [(self.p, k) for k in self.fi]
        ent += [(k, self.q) for k in self.fi]
        ent += [(k, l) for k in self.fi for l in self.fi]
        return tuple(dict.fromkeys(ent))


class _BetaLoading(Functional):
    """Loading of a stock's return on the k-th factor: (inv(C_F) C[F, stock])[k]."""

    def __init__(self, stock: int, k: int, factor_indices: tuple[int, ...], d: int):
        fi = tuple(int(x) for x in factor_indices)
        if not 0 <= k < len(fi):
            raise DomainError(f"factor position {k} out of range for {len(fi)} factors")
        if stock in fi:
            raise DomainError("stock column coincides with a factor column")
        super().__init__(d, f"Beta[{stock},{k}]")
        self.stock, self.k, self.fi = int(stock), int(k), fi

    def _solve_parts(self, C):
        fi = list(self.fi)
        A = C[:, fi][:, :, fi]
        b = C[:, fi, self.stock]
        v = _factor_block_solve(A, b)                       # inv(A) b
        ek = np.zeros((C.shape[0], len(fi)))
        ek[:, self.k] = 1.0
        row = _factor_block_solve(np.swapaxes(A, 1, 2), ek)  # k-th row of inv(A)
        return v, row

    def _values(self, C):
        v, _ = self._solve_parts(C)
        return v[:, self.k].copy()

    def _gradients(self, C):
        v, row = self._solve_parts(C)
        g = np.zeros_like(C)
        fi = list(self.fi)
        g[:, fi, self.stock] += row
        g[:, np.ix_(fi, fi)[0], np.ix_(fi, fi)[1]] -= row[:, :, None] * v[:, None, :]
        return g

    def gradient_support(self):
        ent = [(l, self.stock) for l in self.fi]
        ent += [(l, m) for l in self.fi for m in self.fi]
        return tuple(dict.fromkeys(ent))


_OPS = ("add", "sub", "mul", "div")


class _Combine(Functional):
    def __init__(self, op: str, lhs: Functional, rhs: Functional):
        if op not in _OPS:
            raise DomainError(f"unknown op {op!r}")
        if lhs.d != rhs.d:
            raise DimensionMismatch(f"arity mismatch: {lhs.d} vs {rhs.d}")
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
        super().__init__(lhs.d, f"({lhs.name} {sym} {rhs.name})")
        self.op, self.lhs, self.rhs = op, lhs, rhs

    def _values(self, C):
        a, b = self.lhs._values(C), self.rhs._values(C)
        if self.op == "add":
            return a + b
        if self.op == "sub":
            return a - b
        if self.op == "mul":
            return a * b
        return a / b

    def _gradients(self, C):
        ga, gb = self.lhs._gradients(C), self.rhs._gradients(C)
        if self.op == "add":
            return ga + gb
        if self.op == "sub":
            return ga - gb
        a = self.lhs._values(C)[:, None, None]
        b = self.rhs._values(C)[:, None, None]
        if self.op == "mul":
            return a * gb + b * ga
        return ga / b - a * gb / b**2

    def gradient_support(self):
        sa, sb = self.lhs.gradient_support(), self.rhs.gradient_support()
        if sa is None or sb is None:
            return None
        merged = tuple(dict.fromkeys(tuple(sa) + tuple(sb)))
        # past half-dense the sparse bookkeeping stops paying off
        if len(merged) > self.d * self.d // 2:
            return None
        return merged


# -- constructors ------------------------------------------------------------


def constant(c: float, d: int) -> Functional:
    return _Const(c, d)


def selector(a: int, b: int, d: int) -> Functional:
    """The map C -> C[a, b]."""
    return _Selector(a, b, d)


def idiovol(stock: int, factor_indices, d: int) -> Functional:
    """Idiosyncratic variance of a stock given the factor columns."""
    return _IdioCov(stock, stock, tuple(factor_indices), d)


def idio_cov(p: int, q: int, factor_indices, d: int) -> Functional:
    """Idiosyncratic covariance between two stocks given the factor columns."""
    return _IdioCov(p, q, tuple(factor_indices), d)


def beta_loading(stock: int, k: int, factor_indices, d: int) -> Functional:
    """Continuous factor loading of ``stock`` on the k-th factor column."""
    return _BetaLoading(stock, k, tuple(factor_indices), d)


# -- module-level operation wrappers ----------------------------------------


def _require_symmetric(C: np.ndarray) -> None:
    C = np.asarray(C, dtype=float)
    scale = np.max(np.abs(C), initial=1e-300)
    if np.max(np.abs(C - np.swapaxes(C, -1, -2))) > 1e-9 * max(scale, 1.0):
        raise DomainError("covariance matrix input is not symmetric")


def functional_value(F: Functional, C: np.ndarray):
    """Evaluate F on a symmetric matrix (or batch of matrices)."""
    _require_symmetric(C)
    return F.value(C)


def functional_gradient(F: Functional, C: np.ndarray):
    """Entry-wise partials of F, treating all d*d entries as independent."""
    _require_symmetric(C)
    return F.gradient(C)


def functional_compose(op: str, lhs: Functional, rhs) -> Functional:
    """Combine functionals with exact chain/product/quotient rules.

    ``op`` is one of add, sub, mul, div, scale; ``rhs`` may be a scalar
    (mandatory for scale).
    """
    if op == "scale":
        if isinstance(rhs, Functional):
            raise DomainError("scale expects a scalar right operand")
        return _Combine("mul", lhs, constant(float(rhs), lhs.d))
    if not isinstance(rhs, Functional):
        rhs = constant(float(rhs), lhs.d)
    return _Combine(op, lhs, rhs)
