import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybrid_im.approximators import (FAMILIES, HybridModel, NnParams, PolyParams, basis_eval, gate,
                                     hybrid_eval, hybrid_param_grad, nn_eval, nn_param_grad,
                                     poly_eval, poly_param_grad, sigmoid)
from hybrid_im.series import get_basis


def test_basis_eval_examples():
    assert basis_eval("legendre", 2, 0.5) == pytest.approx(-0.125, abs=1e-15)
    assert basis_eval("chebyshev2", 1, 1.0) == 2.0
    assert basis_eval("power", 3, 2.0) == 8.0
    for l in range(21):
        assert basis_eval("legendre", l, 1.0) == pytest.approx(1.0, abs=1e-13)
        # U_l(1) = l + 1 and U_l(cos t) = sin((l+1)t)/sin t
        assert basis_eval("chebyshev2", l, 1.0) == pytest.approx(l + 1.0, abs=1e-12)
        t = 0.7
        assert basis_eval("chebyshev2", l, np.cos(t)) == pytest.approx(np.sin((l + 1) * t) / np.sin(t), abs=1e-12)


def test_legendre_orthogonality():
    y, w = np.polynomial.legendre.leggauss(64)
    P = np.stack([basis_eval("legendre", i, y) for i in range(7)])
    G = (P * w) @ P.T
    off = G - np.diag(np.diag(G))
    assert np.abs(off).max() < 1e-10
    assert np.allclose(np.diag(G), 2 / (2 * np.arange(7) + 1))


def test_chebyshev2_orthogonality_with_multiplied_weight():
    # second-kind polynomials are orthogonal under sqrt(1 - y^2) as a multiplying weight
    n = 64
    k = np.arange(1, n + 1)
    y = np.cos(k * np.pi / (n + 1))
    w = np.pi / (n + 1) * np.sin(k * np.pi / (n + 1)) ** 2  # Gauss rule for that weight, absorbed
    U = np.stack([basis_eval("chebyshev2", i, y) for i in range(7)])
    G = (U * w) @ U.T
    assert np.abs(G - np.diag(np.diag(G))).max() < 1e-10
    assert np.allclose(np.diag(G), np.pi / 2)


def test_chebyshev2_not_orthogonal_when_weight_divides():
    # the reciprocal weight 1/sqrt(1 - y^2) is the first-kind weight; U_0 and U_2 are not orthogonal under it
    n = 64
    y = np.cos((2 * np.arange(1, n + 1) - 1) * np.pi / (2 * n))
    val = np.pi / n * np.sum(basis_eval("chebyshev2", 0, y) * basis_eval("chebyshev2", 2, y))
    assert abs(val) > 1.0


def test_poly_eval_examples():
    assert np.array_equal(poly_eval(PolyParams.zeros("legendre", 2, 3, 4), [0.1, 0.2, 0.3]), [0.0, 0.0])
    h = 12
    a = np.r_[0.0, [(-1) ** (i + 1) / i for i in range(1, h + 1)]]
    val = poly_eval(PolyParams("power", 1, h, a[None, :]), [0.5])[0]
    assert val == pytest.approx(sum(a[i] * 0.5**i for i in range(h + 1)), abs=1e-15)
    p = PolyParams("power", 2, 1, [[0.0, 1.0, 2.0]])
    assert poly_eval(p, [3.0, 4.0])[0] == pytest.approx(11.0)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=10), st.floats(-1.5, 1.5))
def test_power_eval_matches_horner(coeffs, y):
    p = PolyParams("power", 1, len(coeffs) - 1, np.array(coeffs)[None, :])
    horner = 0.0
    for c in reversed(coeffs):
        horner = horner * y + c
    assert abs(poly_eval(p, [y])[0] - horner) <= 1e-13 * max(1.0, sum(abs(c) for c in coeffs) * 4**len(coeffs))


def _nn(w_out, b_out, W, b):
    return NnParams(np.array(W, float).reshape(1, -1, 1), np.array(b, float).reshape(1, -1),
                    np.array(w_out, float).reshape(1, -1), np.array([b_out], float))


def test_nn_eval_examples():
    assert nn_eval(NnParams.zeros(2, 3, 5), [0.4, -1.0, 2.0]).tolist() == [0.0, 0.0]
    assert nn_eval(_nn([1.0], 0.0, [1.0], [0.0]), [0.0])[0] == 0.5
    for y in (-7.0, 0.0, 3.0):
        assert nn_eval(_nn([2.0], -1.0, [0.0], [0.0]), [y])[0] == 0.0


def test_sigmoid_stable_tails():
    t = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
    s = sigmoid(t)
    assert np.all(np.isfinite(s)) and s[0] == 0.0 and s[-1] == 1.0 and s[2] == 0.5
    assert s[1] == pytest.approx(np.exp(-30.0) / (1 + np.exp(-30.0)), rel=1e-15)


def test_gate_examples():
    assert gate([[0.3]], [0.5])[0] == 1
    assert gate([[0.5]], [0.5])[0] == 0
    assert gate([[0.1, 0.9]], [1.0, 0.5])[0] == 0


def _random_hybrid(rng, family, N, M, h, L, r=0.6):
    poly = PolyParams(family, M, h, rng.normal(size=(N, get_basis(M, h).size)))
    nn = NnParams(rng.normal(size=(N, L, M)), rng.normal(size=(N, L)), rng.normal(size=(N, L)), rng.normal(size=N))
    return HybridModel(poly, nn, np.full(M, r))


def test_hybrid_selects_one_component(rng):
    hm = _random_hybrid(rng, "legendre", 2, 2, 3, 4, r=0.5)
    inner, outer, edge = [0.1, -0.2], [0.9, 0.0], [0.5, 0.1]
    assert np.array_equal(hybrid_eval(hm, inner), poly_eval(hm.poly, inner))
    assert np.array_equal(hybrid_eval(hm, outer), nn_eval(hm.nn, outer))
    assert np.array_equal(hybrid_eval(hm, edge), nn_eval(hm.nn, edge))
    Y = rng.uniform(-1, 1, (200, 2))
    v, p, n = hm(Y), hm.poly(Y), hm.nn(Y)
    assert np.all(np.all(v == p, axis=1) | np.all(v == n, axis=1))


def test_hybrid_radius_restriction():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        _random_hybrid(rng, "legendre", 1, 1, 2, 2, r=1.5)
    _random_hybrid(rng, "power", 1, 1, 2, 2, r=1.5)


def test_param_grad_examples():
    for fam in FAMILIES:
        g = poly_param_grad(PolyParams.zeros(fam, 2, 2, 3), [0.3, -0.7])
        assert np.array_equal(g[:, 0], [1.0, 1.0])
    assert poly_param_grad(PolyParams.zeros("power", 1, 1, 3), [3.0])[0, 2] == 9.0
    basis = get_basis(2, 2)
    k = basis.index[(1, 1)]
    assert poly_param_grad(PolyParams.zeros("legendre", 1, 2, 2), [0.5, 0.5])[0, k] == pytest.approx(0.25)
    nn = NnParams.zeros(1, 2, 3)
    g = nn_param_grad(nn, [0.0, 0.0])[0]
    L = 3
    assert np.allclose(g[:L], 0.5) and g[L] == 1.0 and np.all(g[L + 1:] == 0.0)


def test_nn_block_layout():
    nn = NnParams(np.arange(6.0).reshape(1, 3, 2), np.array([[10.0, 11, 12]]), np.array([[20.0, 21, 22]]),
                  np.array([30.0]))
    assert nn.flat().tolist() == [20, 21, 22, 30, 0, 1, 2, 3, 4, 5, 10, 11, 12]
    assert nn.block_size == 3 * (2 + 2) + 1
    back = nn.with_flat(nn.flat())
    assert np.array_equal(back.W, nn.W) and np.array_equal(back.b_out, nn.b_out)


def test_hybrid_grad_blocks(rng):
    hm = _random_hybrid(rng, "power", 2, 1, 3, 4, r=0.5)
    K = hm.poly.block_size
    assert np.all(hybrid_param_grad(hm, [0.2])[:, K:] == 0.0)
    assert np.all(hybrid_param_grad(hm, [0.8])[:, :K] == 0.0)
    assert np.all(hybrid_param_grad(hm, [-0.5])[:, :K] == 0.0)


def _fd_check(model, Y, step=1e-6, rtol=1e-6):
    v = model.flat()
    G = model.param_grad(Y)  # (P, N, block)
    N, B = model.N, model.block_size
    for n in range(N):
        for j in range(B):
            e = np.zeros_like(v)
            e[n * B + j] = step
            fd = (model.with_flat(v + e)(Y) - model.with_flat(v - e)(Y)) / (2 * step)
            exact = np.zeros_like(fd)
            exact[:, n] = G[:, n, j]
            scale = np.maximum(1.0, np.abs(exact))
            assert np.all(np.abs(fd - exact) <= rtol * scale), (n, j)


@pytest.mark.parametrize("family", FAMILIES)
def test_param_grads_match_central_differences(family):
    rng = np.random.default_rng(FAMILIES.index(family))
    for trial in range(100):
        N, M, h, L = rng.integers(1, 3), rng.integers(1, 3), rng.integers(0, 4), rng.integers(1, 5)
        hm = _random_hybrid(rng, family, N, M, h, L, r=0.5)
        Y = rng.uniform(-1, 1, (3, M))
        Y = Y[np.all(np.abs(np.abs(Y) - 0.5) > 1e-3, axis=1)]  # stay off the gate boundary
        if trial % 3 == 0:
            _fd_check(hm.poly, Y)
        elif trial % 3 == 1:
            _fd_check(hm.nn, Y)
        else:
            _fd_check(hm, Y)
