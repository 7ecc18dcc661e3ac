"""Truncated multivariate power series.

A `TruncSeries` holds the coefficients of a polynomial in `M` variables whose
terms of total degree above a cap `h` are discarded. Coefficients are stored
as a flat vector laid out in graded-lexicographic order (`MultiIndexBasis`),
the same layout the polynomial approximators use.

The module also exposes ring-generic elementary functions (`exp`, `tanh`,
`power`, `reciprocal`, `log`) that accept floats, numpy arrays or series, so a
model nonlinearity written once with them can be evaluated pointwise or
expanded as a Taylor series.
"""

from functools import lru_cache
from math import comb, factorial

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import CapMismatch, SingularExpansionPoint


def _indices_of_degree(M: int, d: int):
    """Multi-indices with |alpha| = d, first variable's exponent descending."""
    if M == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _indices_of_degree(M - 1, d - first):
            yield (first,) + rest


class MultiIndexBasis:
    """All multi-indices alpha in N^M with |alpha| <= h, graded-lex order."""

    def __init__(self, M: int, h: int):
        if M < 1 or h < 0:
            raise ValueError(f"invalid basis size M={M}, h={h}")
        self.M = M
        self.h = h
        alphas = [a for d in range(h + 1) for a in _indices_of_degree(M, d)]
        self.alphas = np.array(alphas, dtype=int).reshape(len(alphas), M)
        self.degrees = self.alphas.sum(axis=1)
        self.index = {a: i for i, a in enumerate(alphas)}
        self._mul = None

    @property
    def size(self) -> int:
        return len(self.alphas)

    def degree_slice(self, d: int) -> slice:
        lo = comb(self.M + d - 1, d - 1) if d > 0 else 0
        return slice(lo, comb(self.M + d, d))

    def mul_table(self):
        """Index triples (i, j, k) with alpha_i + alpha_j = alpha_k, |alpha_k| <= h."""
        if self._mul is None:
            I, J, K = [], [], []
            for i, a in enumerate(self.alphas):
                da = self.degrees[i]
                for j in range(comb(self.M + self.h - da, self.h - da)):
                    I.append(i)
                    J.append(j)
                    K.append(self.index[tuple(a + self.alphas[j])])
            self._mul = (np.array(I), np.array(J), np.array(K))
        return self._mul

    def __eq__(self, other):
        return isinstance(other, MultiIndexBasis) and (self.M, self.h) == (other.M, other.h)

    def __hash__(self):
        return hash((self.M, self.h))

    def __repr__(self):
        return f"MultiIndexBasis(M={self.M}, h={self.h}, size={self.size})"


@lru_cache(maxsize=None)
def get_basis(M: int, h: int) -> MultiIndexBasis:
    return MultiIndexBasis(M, h)


class TruncSeries:
    """Power series in `M` variables truncated at total degree `h`."""

    __array_ufunc__ = None  # make numpy scalars defer to our reflected operators

    def __init__(self, coeffs, M: int, h: int):
        self.basis = get_basis(M, h)
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (self.basis.size,):
            raise ValueError(f"expected {self.basis.size} coefficients, got {c.shape}")
        self.coeffs = c

    # constructors
    @classmethod
    def constant(cls, value: float, M: int, h: int):
        c = np.zeros(get_basis(M, h).size)
        c[0] = value
        return cls(c, M, h)

    @classmethod
    def variable(cls, j: int, M: int, h: int, value: float = 0.0):
        """The series value + y_j."""
        s = cls.constant(value, M, h)
        if h >= 1:
            s.coeffs[1 + j] = 1.0
        return s

    @classmethod
    def from_dict(cls, terms: dict, M: int, h: int):
        b = get_basis(M, h)
        c = np.zeros(b.size)
        for alpha, v in terms.items():
            alpha = tuple(alpha)
            if sum(alpha) <= h:
                c[b.index[alpha]] += v
        return cls(c, M, h)

    @property
    def M(self) -> int:
        return self.basis.M

    @property
    def h(self) -> int:
        return self.basis.h

    @property
    def const(self) -> float:
        return float(self.coeffs[0])

    def coeff(self, alpha) -> float:
        alpha = tuple(alpha)
        if sum(alpha) > self.h:
            return 0.0
        return float(self.coeffs[self.basis.index[alpha]])

    def degree_part(self, d: int) -> np.ndarray:
        return self.coeffs[self.basis.degree_slice(d)]

    def to_dict(self, tol: float = 0.0) -> dict:
        return {tuple(int(v) for v in a): float(c)
                for a, c in zip(self.basis.alphas, self.coeffs) if abs(c) > tol}

    def copy(self):
        return TruncSeries(self.coeffs.copy(), self.M, self.h)

    # ring operations
    def _check(self, other):
        if self.basis != other.basis:
            raise CapMismatch(f"series layouts differ: {self.basis} vs {other.basis}")

    def _lift(self, other):
        if isinstance(other, TruncSeries):
            self._check(other)
            return other
        if np.ndim(other) != 0:
            return NotImplemented
        return TruncSeries.constant(float(other), self.M, self.h)

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return TruncSeries(self.coeffs + other.coeffs, self.M, self.h)

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries(-self.coeffs, self.M, self.h)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return TruncSeries(self.coeffs - other.coeffs, self.M, self.h)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if not isinstance(other, TruncSeries):
            if np.ndim(other) != 0:
                return NotImplemented
            return TruncSeries(self.coeffs * float(other), self.M, self.h)
        self._check(other)
        I, J, K = self.basis.mul_table()
        out = np.bincount(K, weights=self.coeffs[I] * other.coeffs[J], minlength=self.basis.size)
        return TruncSeries(out, self.M, self.h)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncSeries):
            return self * other.reciprocal()
        return self * (1.0 / float(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def __pow__(self, p):
        if float(p) == int(p) and int(p) >= 0:
            out = TruncSeries.constant(1.0, self.M, self.h)
            for _ in range(int(p)):
                out = out * self
            return out
        return self.power(float(p))

    def __repr__(self):
        return f"TruncSeries(M={self.M}, h={self.h}, {self.to_dict(1e-300)})"

    # elementary functions
    def compose_taylor(self, taylor) -> "TruncSeries":
        """sum_k taylor[k] (x - x(0))^k for k <= h, by Horner's rule."""
        taylor = list(taylor[: self.h + 1]) + [0.0] * (self.h + 1 - len(taylor))
        u = self - self.const
        out = TruncSeries.constant(taylor[-1], self.M, self.h)
        for k in range(self.h - 1, -1, -1):
            out = out * u + taylor[k]
        return out

    def exp(self):
        e = np.exp(self.const)
        return self.compose_taylor([e / factorial(k) for k in range(self.h + 1)])

    def power(self, beta: float):
        c = self.const
        if float(beta) == int(beta) and beta >= 0:
            return self ** int(beta)
        if c <= 0 and not (float(beta) == int(beta) and c != 0):
            raise SingularExpansionPoint(f"pow({beta}) needs a positive constant term, got {c}")
        taylor = []
        coef = 1.0
        for k in range(self.h + 1):
            taylor.append(coef * c ** (beta - k))
            coef *= (beta - k) / (k + 1)
        return self.compose_taylor(taylor)

    def reciprocal(self):
        c = self.const
        if c == 0.0:
            raise SingularExpansionPoint("reciprocal of a series with zero constant term")
        return self.compose_taylor([(-1.0) ** k / c ** (k + 1) for k in range(self.h + 1)])

    def log(self):
        c = self.const
        if c <= 0:
            raise SingularExpansionPoint(f"log needs a positive constant term, got {c}")
        taylor = [np.log(c)] + [(-1.0) ** (k - 1) / (k * c ** k) for k in range(1, self.h + 1)]
        return self.compose_taylor(taylor)

    def tanh(self):
        return self.compose_taylor(tanh_taylor(self.const, self.h))


def tanh_taylor(c: float, h: int) -> list:
    """Taylor coefficients of tanh around c, from d/dx P(t) = P'(t)(1 - t^2), t = tanh x."""
    t = np.tanh(c)
    poly = np.array([0.0, 1.0])  # P_0(t) = t
    one_minus_t2 = np.array([1.0, 0.0, -1.0])
    out = []
    for k in range(h + 1):
        out.append(npoly.polyval(t, poly) / factorial(k))
        poly = npoly.polymul(npoly.polyder(poly), one_minus_t2)
    return out


# ring-generic elementary functions

def exp(v):
    return v.exp() if isinstance(v, TruncSeries) else np.exp(v)


def tanh(v):
    return v.tanh() if isinstance(v, TruncSeries) else np.tanh(v)


def power(v, beta):
    return v.power(beta) if isinstance(v, TruncSeries) else np.power(v, beta)


def reciprocal(v):
    return v.reciprocal() if isinstance(v, TruncSeries) else 1.0 / v


def log(v):
    return v.log() if isinstance(v, TruncSeries) else np.log(v)


def series_arith(lhs: TruncSeries, rhs: TruncSeries, op: str) -> TruncSeries:
    if op == "add":
        return lhs + rhs
    if op == "mul":
        return lhs * rhs
    raise ValueError(f"unknown op {op!r}")


def series_elementary(x: TruncSeries, fn: str, beta: float | None = None) -> TruncSeries:
    if fn == "pow":
        return x.power(beta)
    if fn in ("exp", "tanh", "reciprocal", "log"):
        return getattr(x, fn)()
    raise ValueError(f"unknown function {fn!r}")
