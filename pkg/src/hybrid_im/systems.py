"""Skew-product discrete systems x+ = Bx + Cy + f(x, y), y+ = Ay + g(y).

Nonlinearities are "circuits": plain Python functions taking lists of
components and returning a list of components. A component can be a float, a
numpy array (vectorized over points) or a `TruncSeries`, so the same function
serves simulation, training and Taylor expansion.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from . import series as S
from .errors import DimensionMismatch, DomainViolation, InfeasibleEquilibrium
from .linalg import as_matrix, eigvals
from .series import TruncSeries


def _numeric(v) -> bool:
    return not isinstance(v, TruncSeries)


@dataclass(frozen=True)
class SystemModel:
    label: str
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    f: Callable  # (x list, y list) -> list of N components
    g: Callable  # (y list) -> list of M components
    jac_f_x: Callable  # (X (P,N), Y (P,M)) -> (P,N,N)
    domain: tuple  # (lo (M,), hi (M,))
    params: dict = field(default_factory=dict)
    exact_map: Callable | None = None  # Y (P,M) -> X (P,N), when known

    def __post_init__(self):
        A, B, C = as_matrix(self.A, "A"), as_matrix(self.B, "B"), as_matrix(self.C, "C")
        if A.shape[0] != A.shape[1] or B.shape[0] != B.shape[1] or C.shape != (B.shape[0], A.shape[0]):
            raise DimensionMismatch(f"A {A.shape}, B {B.shape}, C {C.shape} are inconsistent")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        lo, hi = (np.asarray(d, dtype=float).reshape(-1) for d in self.domain)
        if lo.shape != (A.shape[0],) or hi.shape != lo.shape or np.any(hi <= lo):
            raise DimensionMismatch("domain must be a non-empty box in R^M")
        object.__setattr__(self, "domain", (lo, hi))

    @property
    def N(self) -> int:
        return self.B.shape[0]

    @property
    def M(self) -> int:
        return self.A.shape[0]

    # vectorized helpers over point arrays
    def f_array(self, X, Y) -> np.ndarray:
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        out = np.empty((X.shape[0], self.N))
        for n, o in enumerate(self.f(list(X.T), list(Y.T))):
            out[:, n] = o
        return out

    def g_array(self, Y) -> np.ndarray:
        Y = np.atleast_2d(Y)
        out = np.empty(Y.shape)
        for m, o in enumerate(self.g(list(Y.T))):
            out[:, m] = o
        return out

    def driver_map(self, Y) -> np.ndarray:
        """Ay + g(y) for each row of Y."""
        Y = np.atleast_2d(np.asarray(Y, float))
        return Y @ self.A.T + self.g_array(Y)

    def in_domain(self, Y) -> np.ndarray:
        Y = np.atleast_2d(Y)
        lo, hi = self.domain
        return np.all((Y >= lo) & (Y <= hi), axis=1)


def step(sys: SystemModel, x, y):
    """One step of the map. Accepts single points (1-D) or batches (P, N), (P, M)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    single = x.ndim == 1
    X, Y = np.atleast_2d(x), np.atleast_2d(y)
    Xn = X @ sys.B.T + Y @ sys.C.T + sys.f_array(X, Y)
    Yn = Y @ sys.A.T + sys.g_array(Y)
    return (Xn[0], Yn[0]) if single else (Xn, Yn)


@dataclass
class AssumptionReport:
    eig_A: np.ndarray
    eig_B: np.ndarray
    all_inside_or_outside_unit_disc: bool
    nonzero_eigs: bool
    resonance_found: tuple | None  # (d, j)
    d_max_checked: int

    @property
    def passed(self) -> bool:
        return self.all_inside_or_outside_unit_disc and self.nonzero_eigs and self.resonance_found is None

    def to_dict(self) -> dict:
        cplx = lambda v: [[float(z.real), float(z.imag)] for z in v]
        return {
            "eig_A": cplx(self.eig_A),
            "eig_B": cplx(self.eig_B),
            "all_inside_or_outside_unit_disc": self.all_inside_or_outside_unit_disc,
            "nonzero_eigs": self.nonzero_eigs,
            "resonance_found": None if self.resonance_found is None
            else {"d": list(self.resonance_found[0]), "j": self.resonance_found[1]},
            "d_max_checked": self.d_max_checked,
            "passed": self.passed,
        }


def check_assumptions(sys: SystemModel, d_max: int = 50, tol: float = 1e-10) -> AssumptionReport:
    """Spectral conditions for existence of the analytic invariant manifold."""
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    kA = eigvals(sys.A)
    lB = eigvals(sys.B)
    mods = np.abs(kA)
    nonzero = bool(np.all(mods > 0))
    in_out = bool(np.all(mods < 1) or np.all(mods > 1))
    witness = None
    # powers k_i^d for d = 0..d_max, combined over multi-indices of total degree <= d_max
    pw = kA[:, None] ** np.arange(d_max + 1)[None, :]
    M = len(kA)
    for total in range(1, d_max + 1):
        for d in _compositions(total, M):
            prod_k = np.prod([pw[i, d[i]] for i in range(M)])
            hit = np.nonzero(np.abs(prod_k - lB) < tol)[0]
            if hit.size:
                witness = (tuple(int(v) for v in d), int(hit[0]))
                break
        if witness:
            break
    return AssumptionReport(kA, lB, in_out, nonzero, witness, d_max)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _fd_jac_f_x(f_array, N):
    """Central-difference Jacobian of f in x, vectorized over points."""
    def jac(X, Y):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        out = np.empty((X.shape[0], N, N))
        for i in range(N):
            eps = 1e-6 * np.maximum(1.0, np.abs(X[:, i]))
            Xp, Xm = X.copy(), X.copy()
            Xp[:, i] += eps
            Xm[:, i] -= eps
            out[:, :, i] = (f_array(Xp, Y) - f_array(Xm, Y)) / (2 * eps)[:, None]
        return out
    return jac


def make_system(label, A, B, C, f=None, g=None, jac_f_x=None, domain=None, params=None, exact_map=None):
    """Build a SystemModel; missing f/g default to zero, missing jac_f_x to finite differences."""
    A, B, C = as_matrix(A, "A"), as_matrix(B, "B"), as_matrix(C, "C")
    N, M = B.shape[0], A.shape[0]
    if f is None:
        f = lambda x, y: [0.0 * x[0]] * N if _numeric(x[0]) else [x[0] * 0.0 for _ in range(N)]
    if g is None:
        g = lambda y: [0.0 * v for v in y]
    if domain is None:
        domain = (-np.ones(M), np.ones(M))
    sys = SystemModel(label, A, B, C, f, g, lambda X, Y: None, domain, dict(params or {}), exact_map)
    if jac_f_x is None:
        jac_f_x = _fd_jac_f_x(sys.f_array, N)
    object.__setattr__(sys, "jac_f_x", jac_f_x)
    return sys


# ---------------------------------------------------------------- benchmarks

BIOREACTOR_DEFAULTS = dict(delta=0.01, k1=0.082, k2=0.59, kd1=0.0034, vr=2.0, S0=3.4)


def bioreactor(**overrides) -> SystemModel:
    """Euler-discretized bioreactor in deviation coordinates (N = M = 1)."""
    p = {**BIOREACTOR_DEFAULTS, **overrides}
    unknown = set(p) - set(BIOREACTOR_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown bioreactor parameters {sorted(unknown)}")
    dt, k1, k2, kd1, vr, S0 = (p[k] for k in ("delta", "k1", "k2", "kd1", "vr", "S0"))
    a = 1 - k2 * S0
    if a == 0:
        raise ValueError("1 - k2*S0 must be nonzero")
    A = [[1 - dt * kd1]]
    B = [[1 - dt * vr]]
    C = [[dt * k1 * S0 / a]]
    pole = a / k2  # f is singular at x = (1 - k2 S0)/k2

    def f(x, y):
        den = a - k2 * x[0]
        if _numeric(den) and np.any(den == 0):
            raise DomainViolation(f"bioreactor f is singular at x = {pole}")
        return [dt * k1 * y[0] * x[0] * S.reciprocal(a * den)]

    def g(y):
        return [0.0 * y[0]]

    def jac(X, Y):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        den = a - k2 * X[:, 0]
        if np.any(den == 0):
            raise DomainViolation(f"bioreactor f is singular at x = {pole}")
        return (dt * k1 * Y[:, 0] / den**2)[:, None, None]

    return SystemModel("bioreactor", A, B, C, f, g, jac, ([0.0], [4.0]), p)


LN_DEFAULTS = dict(beta=-0.4)


def ln_example(beta: float = -0.4, strict: bool = True) -> SystemModel:
    """Scalar system whose invariant manifold is exactly x = ln(1 + y).

    beta = 0 or -1 violates the existence conditions; with strict=False the
    model is still built so that `check_assumptions` can report it."""
    if strict and beta in (0, -1):
        raise ValueError("beta must not be 0 or -1")

    def g(y):
        v = 1.0 + y[0]
        if _numeric(v) and np.any(v <= 0):
            raise DomainViolation("ln example requires y > -1")
        return [S.power(v, beta) * S.exp(y[0]) - (1 + beta) * y[0] - 1.0]

    def f(x, y):
        return [0.0 * x[0]]

    def jac(X, Y):
        return np.zeros((np.atleast_2d(X).shape[0], 1, 1))

    def exact(Y):
        Y = np.atleast_2d(np.asarray(Y, float))
        if np.any(Y <= -1):
            raise DomainViolation("ln example requires y > -1")
        return np.log1p(Y)

    return SystemModel("ln_example", [[1 + beta]], [[beta]], [[1.0]], f, g, jac,
                       ([-0.9], [2.0]), {"beta": beta}, exact)


CAR_DEFAULTS = dict(tau=0.65, gamma=1 / 15, beta=1.5, v0=33.3, tau_l=10.0, mu=1.0, v_des=None, delta=0.05)


def optimal_velocity(h, v0, gamma, beta):
    """V(h) = v0 (tanh(gamma h - beta) + tanh beta) / (1 + tanh beta); ring generic."""
    tb = np.tanh(beta)
    return (S.tanh(gamma * h - beta) + tb) * (v0 / (1 + tb))


def _dV(h, v0, gamma, beta):
    tb = np.tanh(beta)
    return v0 * gamma * (1 - np.tanh(gamma * h - beta) ** 2) / (1 + tb)


def inverse_optimal_velocity(v, v0, gamma, beta, tol=1e-12) -> float:
    """V^{-1}(v) by bisection on [0, 10/gamma]."""
    if not 0 < v < v0:
        raise InfeasibleEquilibrium(f"target velocity {v} outside (0, {v0})")
    lo, hi = 0.0, 10.0 / gamma
    if not optimal_velocity(lo, v0, gamma, beta) <= v <= optimal_velocity(hi, v0, gamma, beta):
        raise InfeasibleEquilibrium(f"target velocity {v} not bracketed on [0, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if optimal_velocity(mid, v0, gamma, beta) < v:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def car_following_raw(Nc: int, p: dict):
    """Raw (non-deviation) follower and leader maps as ring-generic circuits."""
    dt, tau, gamma, beta, v0, tau_l, mu, v_des = (
        p[k] for k in ("delta", "tau", "gamma", "beta", "v0", "tau_l", "mu", "v_des"))

    def followers(xh, yh):
        h, v = xh[:Nc], xh[Nc:]
        ahead = list(v[1:]) + [yh[1]]
        h_next = [h[i] + dt * (ahead[i] - v[i]) for i in range(Nc)]
        v_next = [v[i] + (dt / tau) * (optimal_velocity(h[i], v0, gamma, beta) - v[i]) for i in range(Nc)]
        return h_next + v_next

    def leader(yh):
        z, vl = yh
        return [z + dt * (vl - v_des), vl - dt * ((vl - v_des) / tau_l + mu * z)]

    return followers, leader


def car_following(Nc: int = 10, **overrides) -> SystemModel:
    """Leader-follower platoon (optimal velocity model) in deviation coordinates.

    x = [h_1..h_Nc, v_1..v_Nc] - equilibrium, y = [z, v_leader - v_des].
    """
    if Nc < 1:
        raise ValueError("Nc must be >= 1")
    unknown = set(overrides) - set(CAR_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown car-following parameters {sorted(unknown)}")
    p = {**CAR_DEFAULTS, **overrides}
    if p["v_des"] is None:
        p["v_des"] = p["v0"] / 2
    p["Nc"] = Nc
    h0 = inverse_optimal_velocity(p["v_des"], p["v0"], p["gamma"], p["beta"])
    p["h_eq"] = h0
    N, M = 2 * Nc, 2
    x0 = np.r_[np.full(Nc, h0), np.full(Nc, p["v_des"])]
    y0 = np.array([0.0, p["v_des"]])
    followers, leader = car_following_raw(Nc, p)

    # linearize at equilibrium through a first-order series lift in (x, y)
    xs = [TruncSeries.variable(i, N + M, 1, x0[i]) for i in range(N)]
    ys = [TruncSeries.variable(N + j, N + M, 1, y0[j]) for j in range(M)]
    Fx = followers(xs, ys)
    Gy = leader(ys)
    lin = lambda s: s.degree_part(1)
    B = np.array([lin(s)[:N] for s in Fx])
    C = np.array([lin(s)[N:] for s in Fx])
    A = np.array([lin(s)[N:] for s in Gy])
    Fc = np.array([s.const for s in Fx]) - x0
    Gc = np.array([s.const for s in Gy]) - y0
    if np.abs(Fc).max() > 1e-9 or np.abs(Gc).max() > 1e-9:
        raise InfeasibleEquilibrium("computed equilibrium is not a fixed point")
    # float residue of the raw maps at equilibrium, removed so that f(0,0) = 0 exactly
    f_off = np.array(followers(list(x0), list(y0))) - x0
    g_off = np.array(leader(list(y0))) - y0

    def f(x, y):
        xh = [x0[i] + x[i] for i in range(N)]
        yh = [y0[j] + y[j] for j in range(M)]
        out = followers(xh, yh)
        res = []
        for n in range(N):
            lin_n = sum(B[n, i] * x[i] for i in range(N) if B[n, i] != 0) \
                + sum(C[n, j] * y[j] for j in range(M) if C[n, j] != 0)
            res.append(out[n] - x0[n] - f_off[n] - lin_n)
        return res

    def g(y):
        yh = [y0[j] + y[j] for j in range(M)]
        out = leader(yh)
        return [out[j] - y0[j] - g_off[j] - sum(A[j, k] * y[k] for k in range(M)) for j in range(M)]

    def jac(X, Y):
        X = np.atleast_2d(X)
        out = np.zeros((X.shape[0], N, N))
        dv = (p["delta"] / p["tau"]) * (_dV(h0 + X[:, :Nc], p["v0"], p["gamma"], p["beta"])
                                         - _dV(h0, p["v0"], p["gamma"], p["beta"]))
        idx = np.arange(Nc)
        out[:, Nc + idx, idx] = dv
        return out

    sys = SystemModel("car_following", A, B, C, f, g, jac, ([-5.0, -5.0], [5.0, 5.0]), p)
    object.__setattr__(sys, "params", {**p, "x_eq": x0.tolist(), "y_eq": y0.tolist()})
    return sys


def build_system(name: str, **params) -> SystemModel:
    if name == "bioreactor":
        return bioreactor(**params)
    if name == "ln_example":
        return ln_example(**params)
    if name == "car_following":
        return car_following(**params)
    raise ValueError(f"unknown system {name!r}")
