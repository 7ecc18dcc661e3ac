"""Power-series expansion (PSE) baseline and closed-form reference expansions.

`pse_solve` matches Taylor coefficients of the invariance equation
    pi(Ay + g(y)) = B pi(y) + C y + f(pi(y), y)
order by order. With pi(0) = 0 and f, g at least quadratic, the degree-k
coefficients enter the degree-k part of the equation only through
pi_k(Ay) - B pi_k(y), so each order is a linear system whose right-hand side is
the degree-k residual left by the lower orders.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .approximators import PolyParams, basis_table, design_matrix
from .errors import QuadratureNotConverged, ResonantOrder
from .linalg import lu_solve_checked
from .series import MultiIndexBasis, TruncSeries, get_basis
from .systems import SystemModel


@dataclass
class PseSolution:
    basis: MultiIndexBasis
    coeffs: np.ndarray  # (N, K), power family, graded-lex layout
    order_residuals: list = field(default_factory=list)

    def to_model(self) -> PolyParams:
        return PolyParams("power", self.basis.M, self.basis.h, self.coeffs)

    def __call__(self, Y):
        return self.to_model()(Y)


def compose_power(coeffs: np.ndarray, args: list) -> list:
    """Evaluate power-basis polynomials (rows of `coeffs`) at series arguments."""
    first = args[0]
    M, h = first.M, first.h
    basis = get_basis(M, _basis_degree(np.atleast_2d(coeffs).shape[1], M))
    powers = []
    for a in args:
        pw = [TruncSeries.constant(1.0, M, h)]
        for _ in range(basis.h):
            pw.append(pw[-1] * a)
        powers.append(pw)
    monos = []
    for alpha in basis.alphas:
        term = powers[0][alpha[0]]
        for m in range(1, M):
            if alpha[m]:
                term = term * powers[m][alpha[m]]
        monos.append(term.coeffs)
    monos = np.array(monos)  # (K, size)
    return [TruncSeries(row @ monos, M, h) for row in np.atleast_2d(coeffs)]


def _basis_degree(K: int, M: int) -> int:
    h = 0
    while get_basis(M, h).size < K:
        h += 1
    if get_basis(M, h).size != K:
        raise ValueError(f"{K} coefficients do not form a full basis in {M} variables")
    return h


def invariance_residual_series(sys: SystemModel, coeffs: np.ndarray, h: int) -> list:
    """Taylor expansion (degree <= h) of pi(Ay+g(y)) - B pi(y) - Cy - f(pi(y), y)."""
    M, N = sys.M, sys.N
    y = [TruncSeries.variable(m, M, h) for m in range(M)]
    gy = sys.g(y)
    z = [sum((sys.A[m, j] * y[j] for j in range(M)), TruncSeries.constant(0.0, M, h)) + gy[m]
         for m in range(M)]
    pz = compose_power(coeffs, z)
    py = compose_power(coeffs, y)
    fy = sys.f(py, y)
    out = []
    for n in range(N):
        r = pz[n] - fy[n]
        for i in range(N):
            if sys.B[n, i] != 0:
                r = r - sys.B[n, i] * py[i]
        for j in range(M):
            if sys.C[n, j] != 0:
                r = r - sys.C[n, j] * y[j]
        out.append(r)
    return out


def _linear_part_matrix(A: np.ndarray, k: int) -> np.ndarray:
    """Matrix of the map c -> degree-k part of sum_alpha c_alpha (Ay)^alpha."""
    M = A.shape[0]
    basis = get_basis(M, k)
    sl = basis.degree_slice(k)
    y = [TruncSeries.variable(m, M, k) for m in range(M)]
    ay = [sum((A[m, j] * y[j] for j in range(M)), TruncSeries.constant(0.0, M, k)) for m in range(M)]
    cols = []
    for alpha in basis.alphas[sl]:
        term = TruncSeries.constant(1.0, M, k)
        for m in range(M):
            for _ in range(alpha[m]):
                term = term * ay[m]
        cols.append(term.coeffs[sl])
    return np.array(cols).T  # (d_k, d_k): row beta, column alpha


def pse_solve(sys: SystemModel, h: int, pivot_tol: float = 1e-12) -> PseSolution:
    """Degree-h power-series approximation of the invariant manifold."""
    if h < 1:
        raise ValueError("degree must be >= 1")
    N, M = sys.N, sys.M
    basis = get_basis(M, h)
    coeffs = np.zeros((N, basis.size))
    order_res = []
    for k in range(1, h + 1):
        sl = basis.degree_slice(k)
        dk = sl.stop - sl.start
        R = invariance_residual_series(sys, coeffs, h)
        rhs = -np.concatenate([r.coeffs[sl] for r in R])
        Pk = _linear_part_matrix(sys.A, k)
        K = np.kron(np.eye(N), Pk) - np.kron(sys.B, np.eye(dk))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sol = lu_solve_checked(K, rhs, pivot_tol)
        if sol is None:
            raise ResonantOrder(f"order-{k} coefficient system is singular")
        order_res.append(float(np.linalg.norm(K @ sol - rhs)))
        coeffs[:, sl] = sol.reshape(N, dk)
    return PseSolution(basis, coeffs, order_res)


# ------------------------------------------------ ln(1+y) orthogonal expansions

def _graded_gauss(fun, length: float, levels: int, nodes: int) -> float:
    """Composite Gauss-Legendre of fun(s) over s in [0, length], with
    subintervals halving toward s = 0 where an integrable singularity may sit."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = length * 0.5 ** np.arange(levels + 1)
    total = 0.0
    for hi, lo in zip(edges[:-1], edges[1:]):
        t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * np.dot(w, fun(t))
    return total


def _adaptive(fun, length, tol=1e-9) -> float:
    prev = None
    for levels, nodes in ((30, 16), (45, 24), (60, 32), (80, 48)):
        val = _graded_gauss(fun, length, levels, nodes)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
    raise QuadratureNotConverged(f"successive refinements differ by {abs(val - prev):.3e}")


def ln_orthogonal_coeffs(family: str, h: int) -> np.ndarray:
    """Coefficients alpha_0..alpha_h of the orthogonal expansion of ln(1+y) on [-1, 1].

    Legendre: alpha_i = (2i+1)/2 * int ln(1+y) P_i(y) dy.
    Chebyshev (2nd kind): alpha_i = 2/pi * int ln(1+y) U_i(y) sqrt(1-y^2) dy,
    integrated in theta with y = cos(theta).
    """
    if h < 1:
        raise ValueError("degree must be >= 1")
    out = np.empty(h + 1)
    for i in range(h + 1):
        if family == "legendre":
            # s = 1 + y
            fun = lambda s: np.log(s) * basis_table("legendre", i, s - 1.0)[..., i]
            out[i] = (2 * i + 1) / 2 * _adaptive(fun, 2.0)
        elif family == "chebyshev2":
            # s = pi - theta: 1 + cos(theta) = 2 sin^2(s/2), U_i(cos t) sin t = sin((i+1) t)
            fun = lambda s: (np.log(2.0) + 2 * np.log(np.sin(s / 2))) \
                * np.sin((i + 1) * (np.pi - s)) * np.sin(s)
            out[i] = 2 / np.pi * _adaptive(fun, np.pi)
        else:
            raise ValueError(f"family must be 'legendre' or 'chebyshev2', got {family!r}")
    return out


def ln_taylor_coeffs(h: int) -> np.ndarray:
    """Taylor coefficients 0, 1, -1/2, 1/3, ... of ln(1+y)."""
    i = np.arange(h + 1)
    c = np.zeros(h + 1)
    c[1:] = (-1.0) ** (i[1:] + 1) / i[1:]
    return c


def ln_series_model(family: str, h: int) -> PolyParams:
    """Closed-form expansions of ln(1+y): power (Taylor), Legendre or Chebyshev."""
    c = ln_taylor_coeffs(h) if family == "power" else ln_orthogonal_coeffs(family, h)
    return PolyParams(family, 1, h, c[None, :])


# ------------------------------------------------ linear vs nonlinear regression

def gaussian_regression_demo(h: int, Q: int = 200, seed: int = 0, grid: int = 2001, lm_config=None) -> dict:
    """Fit 1 - exp(-10 x^2) on [-0.3, 0.3] by pseudo-inverse and by LM."""
    from .linalg import pinv_solve
    from .training import LmConfig, lm_minimize

    if Q < h + 1:
        raise ValueError("need Q >= h + 1 samples")
    target = lambda x: 1 - np.exp(-10 * x**2)
    rng = np.random.Generator(np.random.Philox(seed))
    x = rng.uniform(-0.3, 0.3, Q)
    V = basis_table("power", h, x)
    y = target(x)
    mp = pinv_solve(V, y)

    def resid(a):
        return y - V @ a

    def jac(a):
        return -V

    lm = lm_minimize(resid, jac, np.zeros(h + 1), lm_config or LmConfig())
    xs = np.linspace(-0.3, 0.3, grid)
    Vg = basis_table("power", h, xs)
    return {
        "mp_coeffs": mp,
        "lm_coeffs": lm.params,
        "mp_max_err": float(np.abs(Vg @ mp - target(xs)).max()),
        "lm_max_err": float(np.abs(Vg @ lm.params - target(xs)).max()),
        "lm_report": lm,
    }
