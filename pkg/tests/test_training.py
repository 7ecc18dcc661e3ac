import numpy as np
import pytest

from hybrid_im.approximators import FAMILIES, HybridModel, NnParams, PolyParams
from hybrid_im.errors import DegenerateNormalizer, SingularSystem
from hybrid_im.linalg import pinv_solve
from hybrid_im.sampling import CollocationSet, make_collocation
from hybrid_im.series import get_basis
from hybrid_im.systems import bioreactor, car_following, ln_example, make_system
from hybrid_im.training import (LmConfig, Problem, ResidualWeights, SchemeSpec, assemble,
                                assemble_jacobian, assemble_residuals, balance_weights, init_params,
                                lm_minimize, train_ensemble, train_single)


class ExactLn:
    """Stand-in model returning ln(1 + y)."""
    N, M = 1, 1

    def __call__(self, Y):
        return np.log1p(np.atleast_2d(Y))


def _cset(Y, B=None):
    Y = np.asarray(Y, float).reshape(len(Y), -1)
    B = np.empty((0, Y.shape[1])) if B is None else np.asarray(B, float)
    return CollocationSet(Y, B, "UniformGrid", 0)


def test_exact_map_has_zero_interior_residual():
    sys = ln_example()
    Y = np.linspace(-0.89, 2.0, 200)
    F = assemble_residuals(ExactLn(), Problem(sys, _cset(Y), ResidualWeights()))
    assert np.abs(F).max() < 1e-12


def test_zero_model_on_unforced_system():
    sys = make_system("free", [[0.5]], [[0.3]], [[0.0]], f=lambda x, y: [x[0] * y[0]])
    spec = SchemeSpec("hybrid", "legendre", 2, 3, (0.5,))
    cs = _cset(np.linspace(-1, 1, 9), [[-0.5], [0.5]])
    model = init_params(spec, 1, cs, 0)
    model = model.with_flat(np.zeros_like(model.flat()))
    model = HybridModel(model.poly, NnParams.zeros(1, 1, 3), model.r)
    F = assemble_residuals(model, Problem(sys, cs, ResidualWeights()))
    assert np.array_equal(F, np.zeros(9 + 1 + 2))


def test_mapped_point_may_fall_in_network_region():
    # y inside the box, Ay outside it: first term comes from the network, second from the polynomial
    sys = make_system("grow", [[2.0]], [[0.1]], [[0.0]])
    rng = np.random.default_rng(0)
    poly = PolyParams("power", 1, 2, rng.normal(size=(1, 3)))
    nn = NnParams(rng.normal(size=(1, 3, 1)), rng.normal(size=(1, 3)), rng.normal(size=(1, 3)), rng.normal(size=1))
    hm = HybridModel(poly, nn, [0.5])
    y = np.array([[0.4]])
    F = assemble_residuals(hm, Problem(sys, _cset(y), ResidualWeights(1, 0, 0)))
    assert F[0] == pytest.approx(nn([[0.8]])[0, 0] - 0.1 * poly(y)[0, 0], abs=1e-15)


SYSTEMS = {"ln": ln_example, "bio": bioreactor, "car1": lambda: car_following(1)}
DOMAINS = {"ln": (-0.8, 1.5), "bio": (0.0, 4.0), "car1": (-2.0, 2.0)}


def _fd_jacobian(model, problem, step=1e-6):
    v = model.flat()
    cols = []
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = step
        cols.append((assemble_residuals(model.with_flat(v + e), problem)
                     - assemble_residuals(model.with_flat(v - e), problem)) / (2 * step))
    return np.array(cols).T


def _off_gate(Y, r, margin=1e-3):
    return np.all(np.abs(np.abs(Y) - r) > margin, axis=1)


SCHEMES = [(k, f) for k in ("hybrid", "poly") for f in FAMILIES] + [("nn", "power")]


@pytest.mark.parametrize("kind,family", SCHEMES)
def test_jacobian_matches_central_differences(kind, family):
    rng = np.random.default_rng(7 * FAMILIES.index(family) + len(kind))
    probes = 0
    for trial in range(12):
        name = list(SYSTEMS)[trial % 3]
        sys = SYSTEMS[name]()
        lo, hi = DOMAINS[name]
        h, L = int(rng.integers(0, 4)), int(rng.integers(1, 5))
        r = tuple(rng.uniform(0.3, 0.9, sys.M))
        Y = rng.uniform(lo, hi, (40, sys.M))
        Z = sys.driver_map(Y)
        Y = Y[_off_gate(Y, np.array(r)) & _off_gate(Z, np.array(r))][:10]
        from hybrid_im.sampling import boundary_points
        cs = _cset(Y, boundary_points(r) if kind == "hybrid" else None)
        spec = SchemeSpec(kind, family, h, L, r)
        model = init_params(spec, sys.N, CollocationSet(rng.uniform(lo, hi, (30, sys.M)), cs.boundary, "x", 0), rng)
        # move away from the zero constant term set by the initializer
        model = model.with_flat(model.flat() + 0.1 * rng.normal(size=model.flat().size))
        w = ResidualWeights(1.0, 0.7, 1.3 if kind == "hybrid" else 0.0)
        prob = Problem(sys, cs, w)
        F, J = assemble(model, prob)
        assert np.array_equal(F, assemble_residuals(model, prob))
        Jfd = _fd_jacobian(model, prob)
        scale = np.maximum(1.0, np.abs(J).max(axis=0))
        assert np.all(np.abs(J - Jfd).max(axis=0) / scale < 1e-6)
        probes += J.shape[1]
    assert probes >= 100 or kind == "poly"


def test_poly_column_vanishes_when_everything_is_outside_the_box():
    sys = ln_example()
    spec = SchemeSpec("hybrid", "power", 2, 3, (0.2,))
    Y = np.linspace(0.5, 1.5, 8)[:, None]
    cs = _cset(Y)
    model = init_params(spec, 1, cs, 1)
    J = assemble_jacobian(model, Problem(sys, cs, ResidualWeights(1.0, 2.0, 0.0)))
    K = model.poly.block_size
    Q = len(Y)
    assert np.all(J[:Q, 1:K] == 0.0)
    assert J[Q, 0] == 2.0 and np.all(J[Q, 1:K] == 0.0)  # y = 0 only sees the constant term


def test_nn_output_bias_column_at_equilibrium():
    sys = car_following(1)
    spec = SchemeSpec("nn", L=3)
    cs = make_collocation(sys, 20, 0)
    model = init_params(spec, sys.N, cs, 0)
    J = assemble_jacobian(model, Problem(sys, cs, ResidualWeights(1.0, 0.25, 0.0)))
    nb = model.block_size
    L = 3
    for n in range(sys.N):
        assert J[sys.N * cs.Q + n, n * nb + L] == 0.25


def test_boundary_point_perturbation_touches_only_boundary_rows():
    sys = car_following(1)
    spec = SchemeSpec("hybrid", "power", 2, 3, (1.0, 1.0))
    cs = make_collocation(sys, 30, 0, r=[1.0, 1.0])
    model = init_params(spec, sys.N, cs, 0)
    w = ResidualWeights(1.0, 1.0, 1.0)
    F0 = assemble_residuals(model, Problem(sys, cs, w))
    B = cs.boundary.copy()
    B[3, 1] += 0.05
    F1 = assemble_residuals(model, Problem(sys, CollocationSet(cs.interior, B, cs.provenance, 0), w))
    changed = np.nonzero(F0 != F1)[0]
    N, Q, R = sys.N, cs.Q, cs.R
    assert set(changed) <= {N * Q + N + n * R + 3 for n in range(N)} and changed.size > 0


def test_empty_box_hybrid_degenerates_to_network():
    sys = car_following(1)
    cs = make_collocation(sys, 25, 2)
    nn = init_params(SchemeSpec("nn", L=4), sys.N, cs, 5)
    poly = PolyParams.zeros("power", sys.N, sys.M, 2)
    hm = HybridModel(poly, nn, np.zeros(2))
    w = ResidualWeights(1.0, 1.0, 0.0)
    Fh, Jh = assemble(hm, Problem(sys, cs, w))
    Fn, Jn = assemble(nn, Problem(sys, cs, w))
    assert np.array_equal(Fh, Fn)
    K, nb = poly.block_size, nn.block_size
    cols = np.concatenate([n * (K + nb) + K + np.arange(nb) for n in range(sys.N)])
    assert np.array_equal(Jh[:, cols], Jn)
    assert np.all(np.delete(Jh, cols, axis=1) == 0.0)


def test_parsimonious_init_scaling():
    cs = _cset(np.array([0.0, 1.0, 2.5, 4.0]))
    spec = SchemeSpec("poly", "power", 3)
    draws = np.array([init_params(spec, 1, cs, s).coeffs[0] for s in range(200)])
    assert np.all(draws[:, 0] == 0.0)
    assert np.abs(draws[:, 1]).max() <= 1 / 4 and np.abs(draws[:, 1]).max() > 0.9 / 4
    assert np.abs(draws[:, 2]).max() <= 1 / 16 and np.abs(draws[:, 2]).max() > 0.9 / 16
    assert np.abs(draws[:, 3]).max() <= 1 / 64
    naive = np.array([init_params(spec, 1, cs, s, poly_init="naive").coeffs[0] for s in range(50)])
    assert np.abs(naive[:, 3]).max() > 0.5
    a = init_params(SchemeSpec("hybrid", "power", 2, 5, (1.0,)), 1, cs, 11)
    b = init_params(SchemeSpec("hybrid", "power", 2, 5, (1.0,)), 1, cs, 11)
    assert np.array_equal(a.flat(), b.flat())


def test_degenerate_normalizer():
    cs = _cset(np.zeros(5))
    with pytest.raises(DegenerateNormalizer):
        init_params(SchemeSpec("poly", "power", 2), 1, cs, 0)


def test_network_init_scaled_by_data_span():
    cs = _cset(np.array([0.0, 4.0]))
    nn = init_params(SchemeSpec("nn", L=50), 1, cs, 0)
    lim = np.sqrt(6 / 51) / 4
    assert np.abs(nn.W).max() <= lim and np.abs(nn.W).max() > 0.8 * lim
    assert np.all(nn.b_out == 0.0)


class _FixedModel:
    """Model with prescribed group residuals for the balancing rule."""

    def __init__(self, inner, eq, bd):
        self.inner, self.eq, self.bd = inner, eq, bd


def test_balance_weights_examples():
    sys = make_system("lin", [[0.5]], [[0.0]], [[0.0]])
    cs = _cset(np.array([0.2, 0.3]), [[-1.0], [1.0]])
    # pi = c constant inside and c2 outside: interior residual = pi(z) - 0 = c (all inside), eq = c,
    # boundary = c - c2
    mk = lambda c, c2: HybridModel(PolyParams("power", 1, 0, [[c]]),
                                   NnParams(np.zeros((1, 1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), [c2]), [1.0])
    w = balance_weights(mk(1.0, 0.0), Problem(sys, cs, ResidualWeights()))
    assert (w.interior, w.equilibrium, w.boundary) == (1.0, 1.0, 1.0)
    w = balance_weights(mk(1.0, -9.0), Problem(sys, cs, ResidualWeights()))
    assert w.boundary == pytest.approx(0.1)
    nn = NnParams(np.zeros((1, 1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), [1.0])
    assert balance_weights(nn, Problem(sys, cs, ResidualWeights())).boundary == 0.0


def test_lm_zero_residual_stops_immediately():
    res = lm_minimize(lambda x: np.zeros(3), lambda x: np.ones((3, 2)), np.zeros(2))
    assert res.iterations == 1 and res.stop_reason == "FunctionTol" and res.final_loss == 0.0


def test_lm_linear_least_squares_matches_pinv(rng):
    V = np.vander(rng.uniform(-1, 1, 60), 5, increasing=True)
    y = np.sin(3 * V[:, 1])
    res = lm_minimize(lambda a: V @ a - y, lambda a: V, np.zeros(5), LmConfig(tol_f=1e-15, tol_r=1e-15))
    assert np.abs(res.params - pinv_solve(V, y)).max() < 1e-8
    assert np.all(np.diff(res.accepted_losses) < 0)


def test_lm_rosenbrock_and_trace():
    F = lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    J = lambda x: np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])
    res = lm_minimize(F, J, np.array([-1.2, 1.0]), LmConfig(tol_f=1e-14, tol_r=1e-12))
    assert np.allclose(res.params, [1.0, 1.0], atol=1e-8)
    acc = [t for t in res.trace if t[3]]
    assert len(acc) == len(res.accepted_losses) - 1
    assert np.all(np.diff(res.accepted_losses) < 0)


def test_lm_guard_on_stationary_nonzero_residual():
    # a broken Jacobian never yields an admissible step, however large the damping
    with pytest.raises(SingularSystem):
        lm_minimize(lambda x: np.array([1.0]), lambda x: np.array([[np.nan]]), np.array([0.0]),
                    LmConfig(tol_f=1e-300, tol_r=1e-300, max_rejections=60))


def test_lm_config_validation():
    with pytest.raises(ValueError):
        LmConfig(tol_f=0.0)
    with pytest.raises(ValueError):
        LmConfig(k_max=0)


def test_ensemble_is_deterministic_and_single_run_matches():
    sys = bioreactor()
    spec = SchemeSpec("hybrid", "power", 4, 3, (2.0,))
    cfg = LmConfig(k_max=30)
    cs = make_collocation(sys, 80, 3, r=[2.0])
    a = train_ensemble(spec, sys, 2, cfg, seed=3, cset=cs)
    b = train_ensemble(spec, sys, 2, cfg, seed=3, cset=cs)
    assert [r.final_loss for _, r in a] == [r.final_loss for _, r in b]
    m0, r0 = train_single(spec, sys, cs, cfg, 3, 0)
    assert r0.final_loss == a[0][1].final_loss and np.array_equal(m0.flat(), a[0][0].flat())
    assert a[0][1].final_loss != a[1][1].final_loss


def test_ensemble_parallel_matches_serial():
    sys = ln_example()
    spec = SchemeSpec("nn", L=3)
    cfg = LmConfig(k_max=20)
    cs = make_collocation(sys, 80, 1)
    serial = train_ensemble(spec, sys, 3, cfg, seed=1, cset=cs)
    par = train_ensemble(spec, sys, 3, cfg, seed=1, cset=cs, n_jobs=2)
    assert [r.final_loss for _, r in serial] == [r.final_loss for _, r in par]


def test_failed_run_is_reported_not_raised():
    sys = ln_example()
    cs = _cset(np.zeros(4))  # every power of y vanishes: normalizer breaks
    out = train_ensemble(SchemeSpec("hybrid", "power", 2, 2, (0.5,)), sys, 2, LmConfig(k_max=5), cset=cs)
    assert all(m is None and r.stop_reason == "Failed" and "DegenerateNormalizer" in r.error for m, r in out)


def test_report_serialization():
    sys = ln_example()
    cs = make_collocation(sys, 50, 0)
    _, rep = train_single(SchemeSpec("nn", L=2), sys, cs, LmConfig(k_max=5), 0)
    d = rep.to_dict(timing=False)
    assert "wall_time_s" not in d and d["final_loss"] >= 0 and d["weights"]["boundary"] == 0.0
    assert rep.to_dict()["wall_time_s"] > 0


def test_ln_network_training_reaches_low_loss():
    sys = ln_example()
    spec = SchemeSpec("nn", L=10)
    runs = train_ensemble(spec, sys, 20, LmConfig(), seed=0)
    losses = np.array([r.final_loss for _, r in runs])
    assert np.mean(losses < 1e-5) >= 0.9
    assert all(np.all(np.diff(r.accepted_losses) < 0) for _, r in runs)
