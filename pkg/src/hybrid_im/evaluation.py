"""Relative test errors and ensemble statistics."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroNormReference
from .sampling import TestSet

METRICS = ("l1", "l2", "linf")


@dataclass
class ErrorReport:
    l1: np.ndarray  # per component
    l2: np.ndarray
    linf: np.ndarray

    @property
    def component_mean(self) -> dict:
        return {m: float(np.mean(getattr(self, m))) for m in METRICS}

    def to_dict(self) -> dict:
        d = {m: getattr(self, m).tolist() for m in METRICS}
        d["component_mean"] = self.component_mean
        return d


@dataclass
class EnsembleStats:
    mean: dict
    p5: dict
    p95: dict
    n: int

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "p5": self.p5, "p95": self.p95}


def relative_errors(X, Xhat) -> ErrorReport:
    """Per-component ratios ||x_n - xhat_n||_p / ||x_n||_p over the sample index."""
    X = np.atleast_2d(np.asarray(X, float))
    Xhat = np.atleast_2d(np.asarray(Xhat, float))
    if X.shape != Xhat.shape:
        raise DimensionMismatch(f"reference {X.shape} and prediction {Xhat.shape} differ")
    E = X - Xhat
    out = {}
    for name, ord_ in (("l1", 1), ("l2", 2), ("linf", np.inf)):
        den = np.linalg.norm(X, ord=ord_, axis=0)
        if np.any(den == 0):
            raise ZeroNormReference(f"reference component has zero {name} norm")
        out[name] = np.linalg.norm(E, ord=ord_, axis=0) / den
    return ErrorReport(**out)


def error_report(model, tset: TestSet) -> ErrorReport:
    return relative_errors(tset.X, model(tset.Y))


def ensemble_stats(reports) -> EnsembleStats:
    """Mean and 5th/95th percentiles (linear interpolation) of the component-mean metrics."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    vals = {m: np.array([r.component_mean[m] for r in reports]) for m in METRICS}
    return EnsembleStats(
        {m: float(np.mean(v)) for m, v in vals.items()},
        {m: float(np.percentile(v, 5)) for m, v in vals.items()},
        {m: float(np.percentile(v, 95)) for m, v in vals.items()},
        len(reports))


def pointwise_dump(model, tset: TestSet) -> np.ndarray:
    """Rows [y_1..y_M, x_1..x_N, err_1..err_N] with err = |x - xhat| / |x|."""
    Xhat = model(tset.Y)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.abs(tset.X - Xhat) / np.abs(tset.X)
    err = np.where((tset.X == 0) & (tset.X == Xhat), 0.0, err)
    return np.hstack([tset.Y, tset.X, err])


def pointwise_header(M: int, N: int) -> list:
    return [f"y_{m + 1}" for m in range(M)] + [f"x_{n + 1}" for n in range(N)] + [f"err_{n + 1}" for n in range(N)]
