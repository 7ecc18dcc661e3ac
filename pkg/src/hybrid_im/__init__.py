"""Invariant-manifold approximation for discrete-time driven systems.

Polynomial, neural and hybrid (polynomial inside a box, network outside)
approximators of the map x = pi(y), trained by Levenberg-Marquardt on the
invariance residual, plus the classical order-by-order power series.
"""

from .approximators import HybridModel, NnParams, PolyParams
from .errors import (ConfigError, HybridImError, ModelFormatError, NumericalError,
                     SingularSystem)
from .evaluation import ensemble_stats, error_report, relative_errors
from .pse import gaussian_regression_demo, ln_series_model, pse_solve
from .sampling import build_test_set, make_collocation
from .series import TruncSeries
from .systems import (SystemModel, bioreactor, build_system, car_following,
                      check_assumptions, ln_example, step)
from .training import (LmConfig, SchemeSpec, default_collocation, lm_minimize, train_ensemble,
                       train_single)

__all__ = [
    "HybridModel", "NnParams", "PolyParams", "ConfigError", "HybridImError", "ModelFormatError",
    "NumericalError", "SingularSystem", "ensemble_stats", "error_report", "relative_errors",
    "gaussian_regression_demo", "ln_series_model", "pse_solve", "build_test_set", "make_collocation", "TruncSeries", "SystemModel", "bioreactor",
    "build_system", "car_following", "check_assumptions", "ln_example", "step", "LmConfig",
    "SchemeSpec", "default_collocation", "lm_minimize", "train_ensemble", "train_single",
]
