"""Constant-delay integrator using the explicit method of steps.

Steps use the classical fourth-order Runge-Kutta formula.  The local error
is estimated with Zonneveld's embedded third-order solution, which adds one
stage at ``t + 3h/4``.  The derivative at the new point is stored for dense
output and reused as the first stage of the next step.  For a positive delay ``u`` the
step is capped at ``u`` so that every lagged evaluation ``y(t - u)`` falls in
the history or in an already accepted step, and steps land exactly on the
breakpoints ``t0 + k*u`` where the solution loses smoothness.  Dense output is
the cubic Hermite interpolant through the stored nodes and derivatives.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class IntegrationError(RuntimeError):
    pass


class StepBudgetExceeded(IntegrationError):
    pass


class NonFiniteState(IntegrationError):
    pass


class OutOfSpan(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    h_init: float | None = None
    h_max: float = math.inf
    max_steps: int = 100_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.h_max > 0:
            raise ValueError("h_max must be positive")
        if self.h_init is not None and not self.h_init > 0:
            raise ValueError("h_init must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


def constant_history(y0) -> Callable[[float], np.ndarray]:
    y0 = np.array(y0, dtype=float)
    return lambda t: y0


def _hermite(t, ta, tb, ya, yb, fa, fb):
    h = tb - ta
    s = (t - ta) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * ya + h10 * h * fa + h01 * yb + h11 * h * fb


class Trajectory:
    """Accepted mesh ``(t, y, y')`` with cubic Hermite dense output.

    Calling ``traj(t)`` (or :func:`sample`) returns the interpolated state and
    reproduces stored nodes exactly.  Instances are not modified after
    :func:`integrate` returns.
    """

    def __init__(self, t, y, f, names=None):
        self.t = np.asarray(t, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.f = np.asarray(f, dtype=float)
        self.names = tuple(names) if names is not None else None
        self.n_rejected = 0
        self.n_rhs = 0

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def __len__(self):
        return len(self.t)

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(ts < self.t[0]) or np.any(ts > self.t[-1]):
            raise OutOfSpan(f"requested time outside [{self.t0}, {self.t1}]")
        k = np.searchsorted(self.t, ts, side="right") - 1
        k = np.clip(k, 0, len(self.t) - 2)
        out = _hermite(ts[:, None], self.t[k, None], self.t[k + 1, None],
                       self.y[k], self.y[k + 1], self.f[k], self.f[k + 1])
        exact = self.t[k] == ts
        out[exact] = self.y[k[exact]]
        last = ts == self.t[-1]
        out[last] = self.y[-1]
        return out[0] if scalar else out

    def component(self, name: str) -> np.ndarray:
        return self.y[:, self.names.index(name)]


def sample(traj: Trajectory, t):
    return traj(t)


class _Past:
    """Lag lookup over the history and the accepted mesh built so far."""

    def __init__(self, history, t0):
        self.history = history
        self.t0 = t0
        self.ts = []
        self.ys = []
        self.fs = []

    def append(self, t, y, f):
        self.ts.append(t)
        self.ys.append(y)
        self.fs.append(f)

    def __call__(self, t):
        if t <= self.t0:
            return np.asarray(self.history(t), dtype=float)
        ts = self.ts
        k = bisect.bisect_right(ts, t) - 1
        if k >= len(ts) - 1:
            if t - ts[-1] <= 1e-12 * max(1.0, abs(t)):
                return self.ys[-1]
            raise IntegrationError("lagged time beyond accepted solution; step cap violated")
        if t == ts[k]:
            return self.ys[k]
        return _hermite(t, ts[k], ts[k + 1], self.ys[k], self.ys[k + 1], self.fs[k], self.fs[k + 1])


def integrate(rhs, history, t_span, u: float = 0.0, cfg: SolverConfig | None = None,
              names=None) -> Trajectory:
    """Integrate ``y'(t) = rhs(t, y(t), y(t - u))``.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y, y_lag) -> dy``.  For ``u == 0`` the lagged argument is the
        current stage value.
    history : callable or array_like
        Function of ``t <= t0`` returning a state vector, or a constant state.
        ``history(t0)`` is the initial condition.
    t_span : (float, float)
    u : float
        Constant delay, ``>= 0``.
    cfg : SolverConfig, optional

    Returns
    -------
    Trajectory
    """
    cfg = cfg or SolverConfig()
    t0, t1 = (float(v) for v in t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    if u < 0:
        raise ValueError("delay must be non-negative")
    if not callable(history):
        history = constant_history(history)

    y = np.array(history(t0), dtype=float)
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(f"non-finite initial state at t={t0}")
    delayed = u > 0
    past = _Past(history, t0)

    def lag(t, y_now):
        return past(t - u) if delayed else y_now

    n_rhs = 1
    f = np.asarray(rhs(t0, y, lag(t0, y)), dtype=float)
    past.append(t0, y, f)

    h_max = min(cfg.h_max, t1 - t0)
    if delayed:
        h_max = min(h_max, u)
    rtol, atol = cfg.rel_tol, cfg.abs_tol

    if cfg.h_init is not None:
        h = min(cfg.h_init, h_max)
    else:
        scale = atol + rtol * np.abs(y)
        d0 = np.max(np.abs(y) / scale)
        d1 = np.max(np.abs(f) / scale)
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h, h_max)

    next_break = t0 + u if delayed else math.inf
    t = t0
    n_steps = 0
    n_rejected = 0
    while t < t1:
        if n_steps >= cfg.max_steps:
            raise StepBudgetExceeded(f"step budget {cfg.max_steps} exhausted at t={t}")
        n_steps += 1
        h = min(h, h_max)
        landing = min(t1, next_break)
        if t + h >= landing or landing - (t + h) < 1e-12 * max(1.0, abs(landing)):
            h = landing - t
            t_new = landing
        else:
            t_new = t + h

        half = t + 0.5 * h
        k1 = f
        y2 = y + 0.5 * h * k1
        k2 = np.asarray(rhs(half, y2, lag(half, y2)), dtype=float)
        y3 = y + 0.5 * h * k2
        k3 = np.asarray(rhs(half, y3, lag(half, y3)), dtype=float)
        y4 = y + h * k3
        k4 = np.asarray(rhs(t_new, y4, lag(t_new, y4)), dtype=float)
        t5 = t + 0.75 * h
        y5 = y + (h / 32.0) * (5.0 * k1 + 7.0 * k2 + 13.0 * k3 - k4)
        k5 = np.asarray(rhs(t5, y5, lag(t5, y5)), dtype=float)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        f_new = np.asarray(rhs(t_new, y_new, lag(t_new, y_new)), dtype=float)
        n_rhs += 5

        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
            raise NonFiniteState(f"non-finite state at t={t_new}")

        # fourth-order minus third-order weights
        err = h * ((2.0 / 3.0) * k1 - 2.0 * (k2 + k3) - 2.0 * k4 + (16.0 / 3.0) * k5)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.max(np.abs(err) / scale))

        if err_norm <= 1.0:
            t, y, f = t_new, y_new, f_new
            past.append(t, y, f)
            if t >= next_break:
                next_break += u
            factor = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.25))
            h = h * factor
        else:
            n_rejected += 1
            h = h * max(0.2, 0.9 * err_norm ** -0.25)
            if h < 1e-14 * max(1.0, abs(t)):
                raise IntegrationError(f"step size underflow at t={t}")

    traj = Trajectory(past.ts, past.ys, past.fs, names=names)
    traj.n_rejected = n_rejected
    traj.n_rhs = n_rhs
    return traj


# -- model wrappers -------------------------------------------------------


def simulate(p, y0, t_span, cfg: SolverConfig | None = None, history=None, full: bool | None = None):
    """Integrate the reduced (5 components) or full (6 components) model.

    ``history`` defaults to the constant initial state; a callable history is
    used for ``t <= t_span[0]``.
    """
    from .params import FULL_NAMES, REDUCED_NAMES, rhs_full, rhs_reduced

    y0 = np.asarray(y0, dtype=float)
    if full is None:
        full = y0.size == 6
    field = rhs_full if full else rhs_reduced

    def rhs(t, y, y_lag):
        return field(p, y, y_lag[4])

    return integrate(rhs, history if history is not None else y0, t_span, p.u, cfg,
                     names=FULL_NAMES if full else REDUCED_NAMES)


def simulate_si(p, S0_init, I_init, t_span, cfg: SolverConfig | None = None, history=None):
    """Integrate the information-free SI model; components are ``(S0, I)``."""
    from .params import rhs_si

    def rhs(t, y, y_lag):
        return np.array(rhs_si(p, y[0], y[1], y_lag[1]))

    y0 = np.array([S0_init, I_init], dtype=float)
    return integrate(rhs, history if history is not None else y0, t_span, p.u, cfg, names=("S0", "I"))


def export_samples(traj: Trajectory, times, path=None, fmt: str = "csv") -> str:
    """Write rows ``t,<components>`` at ``times`` as csv or json-lines."""
    from .io import write_table

    values = traj(np.asarray(times, dtype=float))
    header = ("t",) + (traj.names or tuple(f"y{i}" for i in range(values.shape[1])))
    rows = [[float(t), *map(float, row)] for t, row in zip(times, values)]
    return write_table(header, rows, path, fmt)
