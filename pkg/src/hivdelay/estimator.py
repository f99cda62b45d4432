"""Estimator-style wrapper around :func:`hivdelay.estimation.fit`."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .estimation import (
    DEFAULT_GUESS,
    UGANDA_INITIAL,
    Dataset,
    FitProblem,
    NelderMeadConfig,
    builtin_uganda,
    fit,
    load_dataset,
    sse,
)
from .dde import SolverConfig

OBSERVABLES = ("susceptible", "infected", "info_fraction")


def check_dataset(X) -> Dataset:
    """Accept a :class:`Dataset`, a path, or the string ``"builtin"``."""
    if isinstance(X, Dataset):
        return X
    if isinstance(X, str) and X == "builtin":
        return builtin_uganda()
    if isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
        return load_dataset(X)
    raise TypeError(f"expected a Dataset, a path or 'builtin', got {type(X).__name__}")


def check_times(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim > 1:
        raise ValueError(f"times must be scalar or 1-d, got shape {t.shape}")
    t = np.atleast_1d(t)
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("times must be finite and non-negative")
    return t


def _check_positive(name, value):
    if not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")


class DelayHIVRegressor(BaseEstimator):
    """Fit ``(beta0, eta, gamma0, q)`` of the delayed model to yearly observations.

    Parameters
    ----------
    delay : float
        Fixed delay ``u`` in years.
    x0 : tuple of 4 floats
        Starting point ``(beta0, eta, gamma0, q)`` for the simplex search.
    Z0 : float
        Initial information level at the epoch.
    rtol, atol : float
        Integrator tolerances used by every objective evaluation.
    max_iter : int
        Simplex iteration budget.

    Attributes
    ----------
    params_ : ModelParams
        Fitted model parameters (tied ``beta1``, ``beta2``).
    result_ : FitResult
    sse_ : float
    n_iter_ : int
    dataset_ : Dataset
    """

    def __init__(self, delay=6.0, x0=DEFAULT_GUESS, Z0=UGANDA_INITIAL[3], rtol=1e-7, atol=1e-9,
                 max_iter=2000):
        self.delay = delay
        self.x0 = x0
        self.Z0 = Z0
        self.rtol = rtol
        self.atol = atol
        self.max_iter = max_iter

    def _validate_params(self):
        if not isinstance(self.delay, numbers.Real) or self.delay < 0:
            raise ValueError(f"delay must be non-negative, got {self.delay!r}")
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (4,) or np.any(x0 <= 0):
            raise ValueError("x0 must hold four positive values (beta0, eta, gamma0, q)")
        if not isinstance(self.Z0, numbers.Real) or self.Z0 < 0:
            raise ValueError(f"Z0 must be non-negative, got {self.Z0!r}")
        _check_positive("rtol", self.rtol)
        _check_positive("atol", self.atol)
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter!r}")

    def _problem(self) -> FitProblem:
        solver = SolverConfig(rel_tol=self.rtol, abs_tol=self.atol)
        return FitProblem(u=float(self.delay), solver=solver).with_Z0(float(self.Z0))

    def fit(self, X, y=None):
        """Fit to ``X`` (Dataset, path or ``"builtin"``); ``y`` is ignored."""
        self._validate_params()
        ds = check_dataset(X)
        cfg = NelderMeadConfig(max_iter=int(self.max_iter))
        problem = self._problem()
        self.result_ = fit(ds, self.delay, tuple(self.x0), problem=problem, cfg=cfg)
        self.problem_ = problem.with_free(self.result_.x)
        self.params_ = self.problem_.params()
        self.sse_ = self.result_.sse
        self.n_iter_ = self.result_.iterations
        self.dataset_ = ds
        return self

    def simulate(self, t_end: float):
        """Full-model trajectory over ``[0, t_end]`` at the fitted parameters."""
        check_is_fitted(self, "params_")
        return self.problem_.simulate(float(t_end))

    def predict(self, t) -> np.ndarray:
        """Observables ``(S0+S1+S2, I, Z)`` at years ``t`` after the epoch, shape ``(n, 3)``."""
        check_is_fitted(self, "params_")
        t = check_times(t)
        traj = self.simulate(max(float(t.max()), 1e-9))
        y = traj(t)
        return np.column_stack([y[:, 0] + y[:, 1] + y[:, 2], y[:, 4], y[:, 3]])

    def score(self, X, y=None) -> float:
        """Negative relative SSE on ``X`` (higher is better)."""
        check_is_fitted(self, "params_")
        return -sse(self.problem_, check_dataset(X))
