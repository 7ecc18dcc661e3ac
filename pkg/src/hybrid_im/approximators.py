"""Polynomial, shallow-network and hybrid (gated) approximators of x = pi(y).

Every model maps points Y of shape (P, M) to outputs of shape (P, N) and owns a
flat parameter vector laid out output by output: [nu_1, ..., nu_N]. For the
hybrid model nu_n = [a_n, p_n] (polynomial coefficients then network
parameters); the network block is p_n = [w_out (L), b_out, W (L x M, row
major), b (L)].

`param_grad(Y)` returns an array (P, N, block_size) holding the gradient of
output n with respect to its own block; gradients across outputs are zero.
"""

from dataclasses import dataclass

import numpy as np

from .series import MultiIndexBasis, get_basis

FAMILIES = ("power", "legendre", "chebyshev2")


def _check_family(family: str) -> str:
    if family not in FAMILIES:
        raise ValueError(f"unknown polynomial family {family!r}; expected one of {FAMILIES}")
    return family


def basis_table(family: str, h: int, y) -> np.ndarray:
    """Univariate basis values P_0..P_h at y; shape y.shape + (h+1,)."""
    _check_family(family)
    y = np.asarray(y, dtype=float)
    T = np.empty(y.shape + (h + 1,))
    T[..., 0] = 1.0
    if h == 0:
        return T
    T[..., 1] = 2 * y if family == "chebyshev2" else y
    for l in range(1, h):
        if family == "power":
            T[..., l + 1] = T[..., l] * y
        elif family == "legendre":
            T[..., l + 1] = ((2 * l + 1) * y * T[..., l] - l * T[..., l - 1]) / (l + 1)
        else:
            T[..., l + 1] = 2 * y * T[..., l] - T[..., l - 1]
    return T


def basis_eval(family: str, l: int, y):
    if l < 0:
        raise ValueError("degree must be non-negative")
    return basis_table(family, l, y)[..., l]


def design_matrix(family: str, basis: MultiIndexBasis, Y) -> np.ndarray:
    """Rows prod_m P_{alpha_m}(y_m) for every alpha in the basis; shape (P, K)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    T = basis_table(family, basis.h, Y)  # (P, M, h+1)
    out = np.ones((Y.shape[0], basis.size))
    for m in range(basis.M):
        out *= T[:, m, basis.alphas[:, m]]
    return out


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def gate(Y, r) -> np.ndarray:
    """1 where |y_m| < r_m for all m (strict), else 0."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    return np.all(np.abs(Y) < np.asarray(r, dtype=float), axis=1).astype(int)


@dataclass(frozen=True)
class PolyParams:
    family: str
    M: int
    h: int
    coeffs: np.ndarray  # (N, K)

    def __post_init__(self):
        _check_family(self.family)
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if c.shape[1] != self.basis.size:
            raise ValueError(f"expected {self.basis.size} coefficients per output, got {c.shape[1]}")
        object.__setattr__(self, "coeffs", c)

    @property
    def basis(self) -> MultiIndexBasis:
        return get_basis(self.M, self.h)

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    @property
    def block_size(self) -> int:
        return self.basis.size

    @classmethod
    def zeros(cls, family, N, M, h):
        return cls(family, M, h, np.zeros((N, get_basis(M, h).size)))

    def flat(self) -> np.ndarray:
        return self.coeffs.ravel().copy()

    def with_flat(self, v):
        return PolyParams(self.family, self.M, self.h, np.asarray(v, float).reshape(self.coeffs.shape))

    def design(self, Y) -> np.ndarray:
        return design_matrix(self.family, self.basis, Y)

    def __call__(self, Y) -> np.ndarray:
        return self.design(Y) @ self.coeffs.T

    def param_grad(self, Y) -> np.ndarray:
        D = self.design(Y)
        return np.broadcast_to(D[:, None, :], (D.shape[0], self.N, D.shape[1])).copy()


@dataclass(frozen=True)
class NnParams:
    W: np.ndarray  # (N, L, M)
    b: np.ndarray  # (N, L)
    w_out: np.ndarray  # (N, L)
    b_out: np.ndarray  # (N,)

    def __post_init__(self):
        W = np.asarray(self.W, float)
        if W.ndim != 3:
            raise ValueError("W must have shape (N, L, M)")
        N, L, _ = W.shape
        shapes = {"b": (N, L), "w_out": (N, L), "b_out": (N,)}
        object.__setattr__(self, "W", W)
        for k, s in shapes.items():
            v = np.asarray(getattr(self, k), float).reshape(s)
            object.__setattr__(self, k, v)

    @property
    def N(self) -> int:
        return self.W.shape[0]

    @property
    def L(self) -> int:
        return self.W.shape[1]

    @property
    def M(self) -> int:
        return self.W.shape[2]

    @property
    def block_size(self) -> int:
        return self.L * (self.M + 2) + 1

    @classmethod
    def zeros(cls, N, M, L):
        return cls(np.zeros((N, L, M)), np.zeros((N, L)), np.zeros((N, L)), np.zeros(N))

    def flat(self) -> np.ndarray:
        N = self.N
        return np.concatenate([self.w_out, self.b_out[:, None], self.W.reshape(N, -1), self.b], axis=1).ravel()

    def with_flat(self, v):
        N, L, M = self.W.shape
        v = np.asarray(v, float).reshape(N, self.block_size)
        return NnParams(v[:, L + 1:L + 1 + L * M].reshape(N, L, M), v[:, L + 1 + L * M:],
                        v[:, :L], v[:, L])

    def _hidden(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return sigmoid(np.einsum("nlm,pm->pnl", self.W, Y) + self.b[None])  # (P, N, L)

    def __call__(self, Y) -> np.ndarray:
        phi = self._hidden(Y)
        return np.einsum("pnl,nl->pn", phi, self.w_out) + self.b_out[None]

    def param_grad(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        phi = self._hidden(Y)
        P, N, L = phi.shape
        s = self.w_out[None] * phi * (1 - phi)  # d out / d pre-activation
        dW = s[..., None] * Y[:, None, None, :]  # (P, N, L, M)
        return np.concatenate([phi, np.ones((P, N, 1)), dW.reshape(P, N, -1), s], axis=2)


@dataclass(frozen=True)
class HybridModel:
    """Polynomial inside the box |y_m| < r_m, network outside."""
    poly: PolyParams
    nn: NnParams
    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, float).reshape(-1)
        if self.poly.N != self.nn.N or self.poly.M != self.nn.M or r.shape != (self.poly.M,):
            raise ValueError("polynomial, network and radius dimensions disagree")
        if np.any(r < 0):
            raise ValueError("gate radius must be non-negative")
        if self.poly.family != "power" and np.any(r > 1):
            raise ValueError("Legendre/Chebyshev hybrids require r_m <= 1")
        object.__setattr__(self, "r", r)

    @property
    def N(self) -> int:
        return self.poly.N

    @property
    def M(self) -> int:
        return self.poly.M

    @property
    def block_size(self) -> int:
        return self.poly.block_size + self.nn.block_size

    def flat(self) -> np.ndarray:
        N = self.N
        return np.concatenate([self.poly.flat().reshape(N, -1), self.nn.flat().reshape(N, -1)], axis=1).ravel()

    def with_flat(self, v):
        v = np.asarray(v, float).reshape(self.N, self.block_size)
        K = self.poly.block_size
        return HybridModel(self.poly.with_flat(v[:, :K].ravel()), self.nn.with_flat(v[:, K:].ravel()), self.r)

    def gate(self, Y) -> np.ndarray:
        return gate(Y, self.r)

    def __call__(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        inside = self.gate(Y).astype(bool)
        out = np.empty((Y.shape[0], self.N))
        if inside.any():
            out[inside] = self.poly(Y[inside])
        if (~inside).any():
            out[~inside] = self.nn(Y[~inside])
        return out

    def param_grad(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        inside = self.gate(Y).astype(bool)
        K = self.poly.block_size
        G = np.zeros((Y.shape[0], self.N, self.block_size))
        if inside.any():
            G[inside, :, :K] = self.poly.param_grad(Y[inside])
        if (~inside).any():
            G[~inside, :, K:] = self.nn.param_grad(Y[~inside])
        return G

    def continuity(self, Y) -> np.ndarray:
        """poly(y) - nn(y), used on the gate boundary."""
        return self.poly(Y) - self.nn(Y)

    def continuity_grad(self, Y) -> np.ndarray:
        return np.concatenate([self.poly.param_grad(Y), -self.nn.param_grad(Y)], axis=2)


def poly_eval(poly: PolyParams, y) -> np.ndarray:
    return poly(np.atleast_2d(y))[0]


def nn_eval(nn: NnParams, y) -> np.ndarray:
    return nn(np.atleast_2d(y))[0]


def hybrid_eval(hm: HybridModel, y) -> np.ndarray:
    return hm(np.atleast_2d(y))[0]


def poly_param_grad(poly: PolyParams, y) -> np.ndarray:
    return poly.param_grad(np.atleast_2d(y))[0]


def nn_param_grad(nn: NnParams, y) -> np.ndarray:
    return nn.param_grad(np.atleast_2d(y))[0]


def hybrid_param_grad(hm: HybridModel, y) -> np.ndarray:
    return hm.param_grad(np.atleast_2d(y))[0]
