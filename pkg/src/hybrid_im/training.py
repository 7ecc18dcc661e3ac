"""Physics-informed residuals, analytic Jacobians, initialization and the
Levenberg-Marquardt loop.

Residual layout for N outputs, Q interior points and R boundary points:
    [interior: output 1 (Q rows), ..., output N (Q rows);
     equilibrium: N rows;
     boundary (hybrid only): output 1 (R rows), ..., output N (R rows)]
Columns follow the model's flat parameter vector [nu_1, ..., nu_N].
"""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .approximators import HybridModel, NnParams, PolyParams
from .errors import DegenerateNormalizer, HybridImError, NumericalError, SingularSystem
from .linalg import solve_damped_from_normal
from .sampling import CollocationSet, make_collocation, make_rng, collocation_count
from .systems import SystemModel


@dataclass(frozen=True)
class ResidualWeights:
    interior: float = 1.0
    equilibrium: float = 1.0
    boundary: float = 1.0

    def __post_init__(self):
        if min(self.interior, self.equilibrium, self.boundary) < 0:
            raise ValueError("residual weights must be non-negative")


@dataclass(frozen=True)
class LmConfig:
    lambda0: float = 1e-2
    tol_f: float = 1e-8
    tol_r: float = 1e-4
    k_max: int = 1000
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    max_rejections: int = 60

    def __post_init__(self):
        if self.lambda0 < 0 or self.tol_f <= 0 or self.tol_r <= 0 or self.k_max < 1:
            raise ValueError("invalid LM configuration")


@dataclass
class LmResult:
    params: np.ndarray
    final_loss: float
    iterations: int
    stop_reason: str  # FunctionTol, StepTol or MaxIter
    accepted_losses: list
    trace: list  # (iteration, lambda, trial loss, accepted)


def lm_minimize(residual_fn, jacobian_fn, x0, cfg: LmConfig = LmConfig(), jac_and_res=None) -> LmResult:
    """Minimize ||F(x)||^2 by Levenberg-Marquardt.

    A step d solves (J^T J + lam I) d = -J^T F. It is accepted when it lowers
    ||F||, after which lam is divided by 10; otherwise lam is multiplied by 10.
    The run stops when the trial step changes F or x by less than the relative
    tolerances, or after k_max iterations.
    """
    x = np.array(x0, dtype=float)
    if jac_and_res is None:
        F = residual_fn(x)
        J = jacobian_fn(x)
    else:
        F, J = jac_and_res(x)
    JtJ, JtF = J.T @ J, J.T @ F
    normF = np.linalg.norm(F)
    lam = cfg.lambda0
    accepted = [normF**2]
    trace = []
    rejections = 0
    reason = "MaxIter"
    k = 0
    while k < cfg.k_max:
        k += 1
        try:
            d = solve_damped_from_normal(JtJ, JtF, lam, J)
        except SingularSystem:
            d = None
        if d is None or not np.all(np.isfinite(d)):
            rejections += 1
            if rejections >= cfg.max_rejections:
                raise SingularSystem(f"no admissible step after {rejections} damping increases")
            lam *= cfg.lambda_up
            trace.append((k, lam, np.nan, False))
            continue
        x_new = x + d
        try:
            F_new = residual_fn(x_new)
            ok = np.all(np.isfinite(F_new))
        except NumericalError:
            F_new, ok = None, False
        norm_new = np.linalg.norm(F_new) if ok else np.inf
        f_change = np.linalg.norm(F_new - F) if ok else np.inf
        step_small = np.linalg.norm(d) < cfg.tol_r * (1 + np.linalg.norm(x))
        f_small = f_change < cfg.tol_f * (1 + normF)
        take = norm_new < normF
        trace.append((k, lam, norm_new**2, bool(take)))
        if take:
            rejections = 0
            x = x_new
            lam /= cfg.lambda_down
            normF = norm_new
            accepted.append(normF**2)
        else:
            rejections += 1
            lam *= cfg.lambda_up
        if f_small:
            reason = "FunctionTol"
            break
        if step_small:
            reason = "StepTol"
            break
        if not take:
            if rejections >= cfg.max_rejections:
                raise SingularSystem(f"no decrease after {rejections} damping increases")
            continue
        if jac_and_res is None:
            F = F_new
            J = jacobian_fn(x)
        else:
            F, J = jac_and_res(x)
        JtJ, JtF = J.T @ J, J.T @ F
    return LmResult(x, float(normF**2), k, reason, accepted, trace)


# ------------------------------------------------------------ residual assembly

@dataclass
class Problem:
    """A system, collocation set and weights with the mapped points cached."""
    system: SystemModel
    cset: CollocationSet
    weights: ResidualWeights
    Z: np.ndarray = field(init=False)

    def __post_init__(self):
        self.Z = self.system.driver_map(self.cset.interior)


def _has_boundary(model) -> bool:
    return isinstance(model, HybridModel)


def assemble_residuals(model, problem: Problem) -> np.ndarray:
    sys, w = problem.system, problem.weights
    Y, Z = problem.cset.interior, problem.Z
    Py = model(Y)
    interior = model(Z) - Py @ sys.B.T - Y @ sys.C.T - sys.f_array(Py, Y)
    parts = [w.interior * interior.T.ravel(), w.equilibrium * model(np.zeros((1, sys.M)))[0]]
    if _has_boundary(model) and problem.cset.R:
        parts.append(w.boundary * model.continuity(problem.cset.boundary).T.ravel())
    return np.concatenate(parts)


def assemble_jacobian(model, problem: Problem) -> np.ndarray:
    return assemble(model, problem)[1]


def assemble(model, problem: Problem):
    """Residual vector and Jacobian with respect to the flat parameters."""
    sys, w = problem.system, problem.weights
    Y, Z = problem.cset.interior, problem.Z
    Q, N, M = Y.shape[0], sys.N, sys.M
    Py = model(Y)
    interior = model(Z) - Py @ sys.B.T - Y @ sys.C.T - sys.f_array(Py, Y)
    Gz = model.param_grad(Z)  # (Q, N, nb)
    Gy = model.param_grad(Y)
    nb = Gy.shape[2]
    D = sys.B[None] + sys.jac_f_x(Py, Y)  # (Q, N, N): d(B pi + f)_n / d pi_k
    # rows (n, q), columns (k, j): w [delta_nk Gz[q,k,j] - D[q,n,k] Gy[q,k,j]]
    Jint = -w.interior * D.transpose(1, 0, 2)[..., None] * Gy[None]
    for n in range(N):
        Jint[n, :, n, :] += w.interior * Gz[:, n, :]
    rows = [Jint.reshape(N * Q, N * nb)]
    res = [w.interior * interior.T.ravel()]

    zero = np.zeros((1, M))
    G0 = model.param_grad(zero)[0]  # (N, nb)
    Jeq = np.zeros((N, N * nb))
    for n in range(N):
        Jeq[n, n * nb:(n + 1) * nb] = w.equilibrium * G0[n]
    rows.append(Jeq)
    res.append(w.equilibrium * model(zero)[0])

    if _has_boundary(model) and problem.cset.R:
        Yb = problem.cset.boundary
        R = Yb.shape[0]
        Gb = model.continuity_grad(Yb)  # (R, N, nb)
        Jb = np.zeros((N, R, N * nb))
        for n in range(N):
            Jb[n, :, n * nb:(n + 1) * nb] = w.boundary * Gb[:, n, :]
        rows.append(Jb.reshape(N * R, N * nb))
        res.append(w.boundary * model.continuity(Yb).T.ravel())
    return np.concatenate(res), np.vstack(rows)


def _group_rms(model, problem: Problem):
    unit = Problem(problem.system, problem.cset, ResidualWeights(1.0, 1.0, 1.0))
    F = assemble_residuals(model, unit)
    N, Q = problem.system.N, problem.cset.Q
    rms = lambda v: float(np.sqrt(np.mean(v**2))) if v.size else 0.0
    return rms(F[:N * Q]), rms(F[N * Q:N * Q + N]), rms(F[N * Q + N:])


def balance_weights(model, problem: Problem, lo: float = 1e-2, hi: float = 1e4) -> ResidualWeights:
    """Interior weight 1; the other groups scaled so their RMS at the initial
    parameters equals the interior RMS (clipped to [lo, hi])."""
    r_int, r_eq, r_bd = _group_rms(model, problem)

    def ratio(r):
        if r == 0 or r_int == 0:
            return 1.0
        return float(np.clip(r_int / r, lo, hi))

    boundary = ratio(r_bd) if _has_boundary(model) else 0.0
    return ResidualWeights(1.0, ratio(r_eq), boundary)


# ------------------------------------------------------------ schemes and init

@dataclass(frozen=True)
class SchemeSpec:
    """kind: 'hybrid', 'nn' or 'poly'."""
    kind: str
    family: str = "power"
    h: int = 0
    L: int = 0
    r: tuple = ()

    def __post_init__(self):
        if self.kind not in ("hybrid", "nn", "poly"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind in ("hybrid", "nn") and self.L < 1:
            raise ValueError("network width L must be >= 1")
        if self.kind == "hybrid" and self.family != "power" and any(v > 1 for v in self.r):
            raise ValueError("Legendre/Chebyshev hybrids require r_m <= 1")

    def describe(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def _init_poly(family, h, N, Y, rng, mode: str) -> PolyParams:
    poly = PolyParams.zeros(family, N, Y.shape[1], h)
    K = poly.block_size
    if mode == "naive":
        c = np.ones(K)
    elif mode == "parsimonious":
        c = np.abs(poly.design(Y)).max(axis=0)
        if np.any(c == 0):
            raise DegenerateNormalizer("a basis function vanishes at every collocation point")
    else:
        raise ValueError(f"unknown polynomial init {mode!r}")
    a = rng.uniform(-1.0, 1.0, (N, K)) / c
    a[:, 0] = 0.0
    return PolyParams(family, Y.shape[1], h, a)


def _init_nn(L, N, Y, rng) -> NnParams:
    M = Y.shape[1]
    span = Y.max(axis=0) - Y.min(axis=0)
    span = np.where(span > 0, span, 1.0)
    lim_in = np.sqrt(6.0 / (M + L))
    lim_out = np.sqrt(6.0 / (L + 1))
    W = rng.uniform(-lim_in, lim_in, (N, L, M)) / span
    b = rng.uniform(-1.0, 1.0, (N, L))
    w_out = rng.uniform(-lim_out, lim_out, (N, L))
    return NnParams(W, b, w_out, np.zeros(N))


def init_params(spec: SchemeSpec, N: int, cset: CollocationSet, seed, poly_init: str = "parsimonious"):
    """Initial model for a scheme. `seed` is an int or a numpy Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, 3)
    Y = cset.interior
    if spec.kind == "nn":
        return _init_nn(spec.L, N, Y, rng)
    poly = _init_poly(spec.family, spec.h, N, Y, rng, poly_init)
    if spec.kind == "poly":
        return poly
    return HybridModel(poly, _init_nn(spec.L, N, Y, rng), np.asarray(spec.r, float))


@dataclass
class TrainReport:
    final_loss: float
    iterations: int
    wall_time_s: float
    stop_reason: str  # FunctionTol, StepTol, MaxIter, or Failed
    seed: int
    scheme: dict
    initial_loss: float = float("nan")
    weights: dict = field(default_factory=dict)
    accepted_losses: list = field(default_factory=list)
    error: str = ""

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        d.pop("accepted_losses")
        if not timing:
            d.pop("wall_time_s")
        return d


def train(model, problem: Problem, cfg: LmConfig = LmConfig()):
    """Run LM from `model`; returns (trained model, LmResult)."""
    fit = lm_minimize(
        lambda v: assemble_residuals(model.with_flat(v), problem), None, model.flat(), cfg,
        jac_and_res=lambda v: assemble(model.with_flat(v), problem))
    return model.with_flat(fit.params), fit


def train_single(spec: SchemeSpec, sys: SystemModel, cset: CollocationSet, cfg: LmConfig, seed: int,
                 realization: int = 0, poly_init: str = "parsimonious"):
    """Initialize, balance the weights and train one realization."""
    t0 = time.perf_counter()
    run_seed = int(np.random.SeedSequence([int(seed), 100, realization]).generate_state(1, np.uint64)[0])
    try:
        model0 = init_params(spec, sys.N, cset, make_rng(run_seed), poly_init)
        w = balance_weights(model0, Problem(sys, cset, ResidualWeights()))
        problem = Problem(sys, cset, w)
        model, fit = train(model0, problem, cfg)
        rep = TrainReport(fit.final_loss, fit.iterations, time.perf_counter() - t0, fit.stop_reason,
                          run_seed, spec.describe(), fit.accepted_losses[0], asdict(w), fit.accepted_losses)
        return model, rep
    except HybridImError as exc:
        rep = TrainReport(float("nan"), 0, time.perf_counter() - t0, "Failed", run_seed, spec.describe(),
                          error=f"{type(exc).__name__}: {exc}")
        return None, rep


def default_collocation(spec: SchemeSpec, sys: SystemModel, seed: int, Q: int | None = None) -> CollocationSet:
    if Q is None:
        Q = collocation_count(sys.N, sys.M, spec.L if spec.L else 10)
    r = spec.r if spec.kind == "hybrid" else None
    return make_collocation(sys, Q, seed, r=r)


def train_ensemble(spec: SchemeSpec, sys: SystemModel, n_real: int, cfg: LmConfig = LmConfig(), seed: int = 0,
                   cset: CollocationSet | None = None, Q: int | None = None, poly_init: str = "parsimonious",
                   n_jobs: int = 1) -> list:
    """n_real independently initialized runs on one shared collocation set.

    Returns a list of (model or None, TrainReport); failed runs are reported,
    not raised."""
    if n_real < 1:
        raise ValueError("n_real must be >= 1")
    if cset is None:
        cset = default_collocation(spec, sys, seed, Q)
    if n_jobs == 1:
        return [train_single(spec, sys, cset, cfg, seed, i, poly_init) for i in range(n_real)]
    from joblib import Parallel, delayed
    return Parallel(n_jobs=n_jobs)(
        delayed(train_single)(spec, sys, cset, cfg, seed, i, poly_init) for i in range(n_real))
