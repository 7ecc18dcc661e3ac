"""Collocation points, boundary points, trajectory sampling and test sets."""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DegenerateTrajectory, InsufficientSamples, NonConvergentTrajectory
from .systems import SystemModel, inverse_optimal_velocity, optimal_velocity, step


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator for the substream (seed, *keys)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass
class CollocationSet:
    interior: np.ndarray  # (Q, M)
    boundary: np.ndarray  # (R, M), may be empty
    provenance: str  # "UniformGrid" or "Trajectory"
    seed: int

    @property
    def Q(self) -> int:
        return self.interior.shape[0]

    @property
    def R(self) -> int:
        return self.boundary.shape[0]


@dataclass
class TestSet:
    __test__ = False  # keep pytest from collecting it
    Y: np.ndarray  # (S, M)
    X: np.ndarray  # (S, N)
    source: str  # "SimulatedTrajectories" or "ExactMap"
    seed: int

    @property
    def S(self) -> int:
        return self.Y.shape[0]


def collocation_count(N: int, M: int, L: int) -> int:
    """Twenty points per network parameter of one output."""
    if L < 1:
        raise ValueError("L must be >= 1")
    return 20 * (L * (M + 2) + 1)


def boundary_points(r) -> np.ndarray:
    """Points on the faces of the box |y_m| <= r_m.

    M = 1: the two points -r, +r. M >= 2: on each of the 2M faces, a 5-per-axis
    cell-centred lattice over the free coordinates (2M * 5^(M-1) points).
    """
    r = np.asarray(r, dtype=float).reshape(-1)
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    M = r.size
    if M == 1:
        return np.array([[-r[0]], [r[0]]])
    ticks = (2 * np.arange(5) + 1) / 5 - 1  # -0.8, -0.4, 0, 0.4, 0.8
    pts = []
    for m in range(M):
        free = [j for j in range(M) if j != m]
        for sign in (-1.0, 1.0):
            for combo in product(ticks, repeat=M - 1):
                p = np.empty(M)
                p[m] = sign * r[m]
                p[free] = np.asarray(combo) * r[free]
                pts.append(p)
    return np.array(pts)


def on_box_boundary(Y, r, tol=1e-12) -> np.ndarray:
    Y = np.atleast_2d(Y)
    r = np.asarray(r, float)
    return np.all(np.abs(Y) <= r + tol, axis=1) & np.any(np.abs(np.abs(Y) - r) <= tol, axis=1)


def uniform_collocation(domain, Q: int, rng) -> np.ndarray:
    lo, hi = (np.asarray(d, float) for d in domain)
    return rng.uniform(lo, hi, size=(Q, lo.size))


# ------------------------------------------------------------------ trajectories

def _bioreactor_init(sys, rng, n):
    return rng.uniform(-1.0, 1.0, (n, 1)), np.full((n, 1), 4.3)


def _ln_init(sys, rng, n):
    # driver orbits only converge below the repelling fixed point y ~ 0.895 (beta = -0.4)
    return rng.uniform(-1.0, 1.0, (n, 1)), rng.uniform(-0.9, 0.85, (n, 1))


def _car_init(sys, rng, n):
    p = sys.params
    Nc = p["Nc"]
    x_eq, y_eq = np.asarray(p["x_eq"]), np.asarray(p["y_eq"])
    h = rng.uniform(35.0, 45.0, (n, Nc))
    h[:, -1] = 50.0  # the leader starts 50 m ahead of the last follower
    v = optimal_velocity(h, p["v0"], p["gamma"], p["beta"])
    z = rng.uniform(-10.0, 10.0, n)
    X = np.hstack([h, v]) - x_eq
    Y = np.column_stack([z, np.full(n, 27.7)]) - y_eq
    return X, Y


SAMPLING_DEFAULTS = {
    "bioreactor": dict(n_ic=10, k_trans=8, init=_bioreactor_init),
    "car_following": dict(n_ic=200, k_trans=800, init=_car_init),
    "ln_example": dict(n_ic=10, k_trans=20, init=_ln_init),
}


def sampling_defaults(sys: SystemModel) -> dict:
    if sys.label not in SAMPLING_DEFAULTS:
        raise ValueError(f"no default initial-condition sampler for system {sys.label!r}")
    return SAMPLING_DEFAULTS[sys.label]


def simulate_batch(sys: SystemModel, X0, Y0, k_trans: int, cutoff: float = 1e-3,
                   max_steps: int = 1_000_000) -> list:
    """Simulate from each initial condition; drop `k_trans` steps, then record
    states until every deviation variable is below `cutoff` in magnitude.

    Returns a list of (X_i, Y_i) arrays, one pair per initial condition.
    """
    X = np.array(X0, dtype=float, ndmin=2)
    Y = np.array(Y0, dtype=float, ndmin=2)
    n = X.shape[0]
    Bt, Ct, At = sys.B.T, sys.C.T, sys.A.T

    def step(sys, X, Y):
        return X @ Bt + Y @ Ct + sys.f_array(X, Y), Y @ At + sys.g_array(Y)

    for _ in range(k_trans):
        X, Y = step(sys, X, Y)
    hist_x, hist_y = [], []
    length = np.zeros(n, dtype=int)
    active = np.ones(n, dtype=bool)
    k = 0
    while True:
        inside = (np.abs(X).max(axis=1) < cutoff) & (np.abs(Y).max(axis=1) < cutoff)
        active &= ~inside
        if not active.any():
            break
        if k >= max_steps:
            raise NonConvergentTrajectory(f"{active.sum()} trajectories still outside the cutoff after {k} steps")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise NonConvergentTrajectory(f"trajectory diverged after {k} steps")
        hist_x.append(X)
        hist_y.append(Y)
        length[active] += 1
        X, Y = step(sys, X, Y)
        k += 1
    if not hist_x:
        return [(np.empty((0, X.shape[1])), np.empty((0, Y.shape[1]))) for _ in range(n)]
    HX, HY = np.stack(hist_x), np.stack(hist_y)  # (T, n, .)
    return [(HX[:length[i], i], HY[:length[i], i]) for i in range(n)]


def arc_length_resample(traj, n: int) -> np.ndarray:
    """n points at equal arc-length spacing along the polyline through `traj`."""
    P = np.asarray(traj, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[0] < 2 or n < 2:
        raise ValueError("need at least 2 trajectory points and n >= 2")
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        raise DegenerateTrajectory("trajectory has zero arc length")
    targets = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(targets, s, P[:, m]) for m in range(P.shape[1])])


def trajectory_collocation(sys: SystemModel, Q: int, seed: int, n_ic=None, k_trans=None,
                           init=None, oversample: int = 20) -> np.ndarray:
    """Q driver points drawn from arc-length-resampled trajectories inside the domain.

    Each trajectory is resampled on a grid about `oversample` times denser than
    Q / n_ic and Q points are then drawn from the pooled grid. Neighbouring
    trajectories share nearly the same arc-length parametrization, so a coarse
    per-trajectory grid would stack their points on top of each other."""
    d = sampling_defaults(sys) if init is None else {}
    n_ic = n_ic or d["n_ic"]
    k_trans = d["k_trans"] if k_trans is None else k_trans
    init = init or d["init"]
    rng = make_rng(seed, 1)
    base = max(2, int(np.ceil(oversample * Q / n_ic)))
    pool = []
    trajs = []
    # short pool: refine the grid a few times, then add a batch of trajectories
    for _round in range(4):
        X0, Y0 = init(sys, rng, n_ic)
        trajs += [ty for _, ty in simulate_batch(sys, X0, Y0, k_trans) if len(ty) >= 2]
        per_traj = base
        for _refine in range(4):
            pool = [arc_length_resample(ty, per_traj) for ty in trajs]
            pool = np.vstack(pool) if pool else np.empty((0, sys.M))
            pool = pool[sys.in_domain(pool)]
            if len(pool) >= Q:
                return pool[rng.choice(len(pool), Q, replace=False)]
            per_traj *= 2
    raise InsufficientSamples(f"only {len(pool)} trajectory points inside the domain, need {Q}")


def make_collocation(sys: SystemModel, Q: int, seed: int, r=None, n_ic=None, k_trans=None,
                     boundary_in_domain: bool = True) -> CollocationSet:
    """Interior points (uniform for M = 1, trajectory based otherwise) and,
    when a gate radius is given, boundary points on its box.

    By default boundary points outside the domain are dropped: there the
    network is otherwise unconstrained and the continuity residual only pulls
    the polynomial toward an arbitrary value."""
    if sys.M == 1:
        Y = uniform_collocation(sys.domain, Q, make_rng(seed, 1))
        prov = "UniformGrid"
    else:
        Y = trajectory_collocation(sys, Q, seed, n_ic, k_trans)
        prov = "Trajectory"
    B = np.empty((0, sys.M))
    if r is not None:
        B = boundary_points(r)
        if boundary_in_domain:
            B = B[sys.in_domain(B)]
    return CollocationSet(Y, B, prov, seed)


def build_test_set(sys: SystemModel, S: int = 10_000, seed: int = 0, n_ic=None, k_trans=None,
                   pool_out: list | None = None) -> TestSet:
    """S on-manifold (x, y) pairs with y in the domain.

    Uses the exact map when the system has one, otherwise post-transient
    trajectory records."""
    if S < 1:
        raise ValueError("S must be >= 1")
    rng = make_rng(seed, 2)
    if sys.exact_map is not None:
        Y = uniform_collocation(sys.domain, S, rng)
        return TestSet(Y, sys.exact_map(Y), "ExactMap", seed)
    d = sampling_defaults(sys)
    X0, Y0 = d["init"](sys, rng, n_ic or d["n_ic"])
    trajs = simulate_batch(sys, X0, Y0, d["k_trans"] if k_trans is None else k_trans)
    PX = np.vstack([tx for tx, _ in trajs])
    PY = np.vstack([ty for _, ty in trajs])
    keep = sys.in_domain(PY)
    PX, PY = PX[keep], PY[keep]
    if pool_out is not None:
        pool_out.extend([PX, PY])
    if len(PY) < S:
        raise InsufficientSamples(f"only {len(PY)} recorded points inside the domain, need {S}")
    idx = np.sort(rng.choice(len(PY), S, replace=False))
    return TestSet(PY[idx], PX[idx], "SimulatedTrajectories", seed)
