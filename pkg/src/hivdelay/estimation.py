"""Fitting the full model to yearly observations.

The objective is the relative sum of squared errors between model and data,

    sum_j |S_model - S_data|^2 / |S_data| + |I_model - I_data|^2 / |I_data|
  + sum_k |Z_model - Z_data|^2 / |Z_data|

where ``S_model = S0 + S1 + S2`` and the model is sampled at whole years after
the epoch.  The free parameters are ``(beta0, eta, gamma0, q)``; ``beta1`` and
``beta2`` stay proportional to ``beta0``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dde import IntegrationError, SolverConfig, simulate
from .params import BETA1_RATIO, BETA2_RATIO, UGANDA_FIXED, ModelParams

log = logging.getLogger(__name__)

FREE_NAMES = ("beta0", "eta", "gamma0", "q")
DEFAULT_GUESS = (0.028, 0.041, 0.264, 0.071)
PENALTY = 1e12
PERSONS_PER_UNIT = 1e6
ORGANIZATIONS = 1200

#: Initial state in 1992 as ``(S0, S1, S2, Z, I, R)``, populations in millions.
UGANDA_INITIAL = (5.014983, 0.0, 0.0, 0.20, 0.884997, 0.0)
FIT_SOLVER = SolverConfig(rel_tol=1e-7, abs_tol=1e-9)


class DataError(ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingColumn(DataError):
    pass


class MaxIterations(RuntimeError):
    """Raised when the simplex search hits its iteration budget; ``result`` holds the best point."""

    def __init__(self, result):
        self.result = result
        super().__init__(f"no convergence after {result.iterations} iterations (best f={result.fun:.6g})")


# -- data -----------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Yearly observations in millions (populations) and fractions (information)."""

    susceptible_obs: tuple[tuple[int, float], ...]
    infected_obs: tuple[tuple[int, float], ...]
    info_obs: tuple[tuple[int, float], ...]
    epoch_year: int = 1992

    def __post_init__(self):
        for name in ("susceptible_obs", "infected_obs", "info_obs"):
            obs = tuple((int(y), float(v)) for y, v in getattr(self, name))
            object.__setattr__(self, name, obs)
            for year, value in obs:
                if year < self.epoch_year:
                    raise DataError(f"{name}: year {year} precedes epoch {self.epoch_year}")
                if not value > 0:
                    raise DataError(f"{name}: non-positive value {value} in {year}")
        for year, value in self.info_obs:
            if not value < 1:
                raise DataError(f"info fraction must be in (0, 1), got {value} in {year}")

    @property
    def years(self) -> list[int]:
        return sorted({y for y, _ in self.susceptible_obs + self.infected_obs + self.info_obs})

    @property
    def t_max(self) -> float:
        return float(max(self.years) - self.epoch_year)

    def times(self, obs) -> np.ndarray:
        return np.array([y - self.epoch_year for y, _ in obs], dtype=float)

    @classmethod
    def from_model(cls, traj, years, epoch_year: int = 1992) -> "Dataset":
        """Observations equal to a simulated trajectory (for self-consistency checks)."""
        names = traj.names
        t = np.array([y - epoch_year for y in years], dtype=float)
        y = traj(t)
        total = y[:, names.index("S0")] + y[:, names.index("S1")] + y[:, names.index("S2")]
        return cls(tuple(zip(years, total)), tuple(zip(years, y[:, names.index("I")])),
                   tuple(zip(years, y[:, names.index("Z")])), epoch_year)


def builtin_uganda() -> Dataset:
    """Uganda adults aged 15 to 59, 1997-2005."""
    persons = {
        1999: (6_700_000, 606_000),
        2000: (6_597_470, 573_693),
        2001: (7_130_000, 383_000),
        2003: (7_462_000, 544_000),
        2005: (7_636_000, 548_261),
    }
    organizations = {1997: 600, 2000: 700, 2001: 717, 2005: 778}
    return Dataset(
        tuple((y, s / PERSONS_PER_UNIT) for y, (s, _) in persons.items()),
        tuple((y, i / PERSONS_PER_UNIT) for y, (_, i) in persons.items()),
        tuple((y, n / ORGANIZATIONS) for y, n in organizations.items()),
    )


DATA_COLUMNS = ("year", "susceptible", "infected", "info_fraction")


def _parse_fraction(text: str) -> float:
    if "/" in text:
        return float(Fraction(text.replace(",", "").replace(" ", "")))
    return float(text)


def load_dataset(path, epoch_year: int = 1992) -> Dataset:
    """Read ``year,susceptible,infected,info_fraction`` rows.

    Susceptible and infected counts are raw persons; the information column
    holds fractions (``0.5`` or ``600/1200``).  Empty fields mean no observation.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(row for row in fh if not row.lstrip().startswith("#"))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        missing = [c for c in DATA_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"missing column(s): {', '.join(missing)}")
        idx = {c: header.index(c) for c in DATA_COLUMNS}
        sus, inf, info = [], [], []
        for row in reader:
            line = reader.line_num
            if not any(cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                row = row + [""] * (len(header) - len(row))
            try:
                year = int(row[idx["year"]])
                s, i, z = (row[idx[c]].strip() for c in DATA_COLUMNS[1:])
                if s:
                    sus.append((year, float(s) / PERSONS_PER_UNIT))
                if i:
                    inf.append((year, float(i) / PERSONS_PER_UNIT))
                if z:
                    info.append((year, _parse_fraction(z)))
            except (ValueError, ZeroDivisionError) as exc:
                raise ParseError(str(exc), line) from None
    return Dataset(tuple(sus), tuple(inf), tuple(info), epoch_year)


def export_dataset(ds: Dataset, path) -> None:
    rows: dict[int, list[str]] = {y: [str(y), "", "", ""] for y in ds.years}
    for y, v in ds.susceptible_obs:
        rows[y][1] = f"{v * PERSONS_PER_UNIT:.15g}"
    for y, v in ds.infected_obs:
        rows[y][2] = f"{v * PERSONS_PER_UNIT:.15g}"
    for y, v in ds.info_obs:
        rows[y][3] = repr(v)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATA_COLUMNS)
        writer.writerows(rows[y] for y in sorted(rows))


# -- objective ------------------------------------------------------------


@dataclass(frozen=True)
class FitProblem:
    """Free parameters, fixed rates and initial data for one fit."""

    beta0: float = DEFAULT_GUESS[0]
    eta: float = DEFAULT_GUESS[1]
    gamma0: float = DEFAULT_GUESS[2]
    q: float = DEFAULT_GUESS[3]
    u: float = 6.0
    B: float = UGANDA_FIXED["B"]
    mu: float = UGANDA_FIXED["mu"]
    d: float = UGANDA_FIXED["d"]
    gamma1: float = UGANDA_FIXED["gamma1"]
    gamma2: float = UGANDA_FIXED["gamma2"]
    beta1_ratio: float = BETA1_RATIO
    beta2_ratio: float = BETA2_RATIO
    initial_state: tuple = UGANDA_INITIAL
    solver: SolverConfig = field(default=FIT_SOLVER)

    @property
    def free(self) -> np.ndarray:
        return np.array([self.beta0, self.eta, self.gamma0, self.q])

    def with_free(self, x) -> "FitProblem":
        return replace(self, **dict(zip(FREE_NAMES, map(float, x))))

    def with_Z0(self, Z0: float) -> "FitProblem":
        y0 = list(self.initial_state)
        y0[3] = Z0
        return replace(self, initial_state=tuple(y0))

    def params(self, x=None) -> ModelParams:
        beta0, eta, gamma0, q = (float(v) for v in (self.free if x is None else x))
        return ModelParams(B=self.B, mu=self.mu, d=self.d, gamma0=gamma0, gamma1=self.gamma1,
                           gamma2=self.gamma2, beta0=beta0, beta1=self.beta1_ratio * beta0,
                           beta2=self.beta2_ratio * beta0, q=q, eta=eta, u=self.u)

    def simulate(self, t_end: float, x=None):
        return simulate(self.params(x), np.array(self.initial_state), (0.0, t_end), self.solver, full=True)


def sse_terms(fp: FitProblem, ds: Dataset, traj=None) -> dict[str, float]:
    """Susceptible, infected and information contributions to the objective."""
    if traj is None:
        traj = fp.simulate(ds.t_max)
    names = traj.names

    def rel(obs, col):
        if not obs:
            return 0.0
        t = ds.times(obs)
        data = np.array([v for _, v in obs])
        y = traj(t)
        model = sum(y[:, names.index(c)] for c in col)
        return float(np.sum((model - data) ** 2 / np.abs(data)))

    return {
        "susceptible": rel(ds.susceptible_obs, ("S0", "S1", "S2")),
        "infected": rel(ds.infected_obs, ("I",)),
        "info": rel(ds.info_obs, ("Z",)),
    }


def sse(fp: FitProblem, ds: Dataset) -> float:
    """Relative SSE at the free parameters stored in ``fp``.

    Returns ``PENALTY`` if any free parameter is non-positive; solver errors propagate.
    """
    if np.any(fp.free <= 0) or not np.all(np.isfinite(fp.free)):
        return PENALTY
    terms = sse_terms(fp, ds)
    return terms["susceptible"] + terms["infected"] + terms["info"]


def objective(fp: FitProblem, ds: Dataset):
    """``x -> sse`` for the simplex search; solver failures score ``PENALTY``."""

    def f(x):
        try:
            return sse(fp.with_free(x), ds)
        except IntegrationError as exc:
            log.debug("integration failed at %s: %s", x, exc)
            return PENALTY

    return f


# -- simplex search -------------------------------------------------------


@dataclass(frozen=True)
class NelderMeadConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    f_tol: float = 1e-8
    x_tol: float = 1e-8
    max_iter: int = 2000
    perturbation: float = 0.05
    zero_step: float = 0.00025


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    nfev: int
    converged: bool
    trace: list = field(default_factory=list)


def initial_simplex(x0, cfg: NelderMeadConfig) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for k in range(n):
        if abs(x0[k]) < 0.005:
            simplex[k + 1, k] = x0[k] + cfg.zero_step
        else:
            simplex[k + 1, k] = (1.0 + cfg.perturbation) * x0[k]
    return simplex


def nelder_mead(f, x0, cfg: NelderMeadConfig | None = None) -> SimplexResult:
    """Minimise ``f`` from ``x0`` with the Nelder-Mead simplex method.

    Stops when the simplex fits within ``x_tol`` of its best vertex
    (max-norm) or when the spread of function values drops below ``f_tol``.

    Raises
    ------
    MaxIterations
        If ``max_iter`` is reached; the exception carries the best point.
    """
    cfg = cfg or NelderMeadConfig()
    simplex = initial_simplex(x0, cfg)
    fvals = np.array([f(x) for x in simplex], dtype=float)
    if not np.isfinite(fvals[0]):
        raise ValueError("objective is not finite at the starting point")
    nfev = len(fvals)
    n = simplex.shape[1]
    rho, chi, psi, sigma = cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink
    trace = []

    def order():
        nonlocal simplex, fvals
        idx = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[idx], fvals[idx]

    order()
    iterations = 0
    converged = False
    while True:
        x_spread = float(np.max(np.abs(simplex[1:] - simplex[0])))
        f_spread = float(fvals[-1] - fvals[0])
        if x_spread <= cfg.x_tol or f_spread <= cfg.f_tol:
            converged = True
            break
        if iterations >= cfg.max_iter:
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + rho * (centroid - worst)
        fr = f(xr)
        nfev += 1
        if fr < fvals[0]:
            xe = centroid + rho * chi * (centroid - worst)
            fe = f(xe)
            nfev += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + psi * rho * (centroid - worst)
                fc = f(xc)
                nfev += 1
                accept = fc <= fr
            else:
                xc = centroid - psi * (centroid - worst)
                fc = f(xc)
                nfev += 1
                accept = fc < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
            else:
                for k in range(1, n + 1):
                    simplex[k] = simplex[0] + sigma * (simplex[k] - simplex[0])
                    fvals[k] = f(simplex[k])
                nfev += n
        order()
        trace.append((simplex[0].copy(), float(fvals[0])))

    result = SimplexResult(simplex[0].copy(), float(fvals[0]), iterations, nfev, converged, trace)
    if not converged:
        raise MaxIterations(result)
    return result


# -- fitting --------------------------------------------------------------


@dataclass
class FitResult:
    beta0: float
    eta: float
    gamma0: float
    q: float
    sse: float
    iterations: int
    converged: bool
    u: float
    nfev: int = 0
    trace: list = field(default_factory=list, repr=False)

    @property
    def x(self) -> np.ndarray:
        return np.array([self.beta0, self.eta, self.gamma0, self.q])

    @property
    def tau(self) -> float:
        return self.q / self.eta

    def as_row(self) -> list:
        return [self.u, self.beta0, self.eta, self.gamma0, self.q, self.tau, self.sse,
                self.iterations, int(self.converged)]


FIT_HEADER = ("u", "beta0", "eta", "gamma0", "q", "tau", "sse", "iterations", "converged")


def fit(ds: Dataset, u: float = 6.0, x0=DEFAULT_GUESS, problem: FitProblem | None = None,
        cfg: NelderMeadConfig | None = None) -> FitResult:
    """Estimate ``(beta0, eta, gamma0, q)`` for delay ``u`` starting from ``x0``."""
    fp = replace(problem or FitProblem(), u=float(u)).with_free(x0)
    f = objective(fp, ds)
    try:
        res = nelder_mead(f, np.asarray(x0, dtype=float), cfg)
    except MaxIterations as exc:
        log.warning("fit at u=%s stopped at iteration budget", u)
        res = exc.result
    beta0, eta, gamma0, q = (float(v) for v in res.x)
    return FitResult(beta0, eta, gamma0, q, res.fun, res.iterations, res.converged, float(u),
                     res.nfev, res.trace)


def _fit_task(args):
    ds, u, x0, problem, cfg = args
    return fit(ds, u, x0, problem, cfg)


def fit_grid(ds: Dataset, delays=(0, 3, 6, 9, 12), x0=DEFAULT_GUESS, problem=None, cfg=None,
             executor=None) -> list[FitResult]:
    """Independent fits for each delay, optionally on an executor."""
    work = [(ds, float(u), tuple(x0), problem, cfg) for u in delays]
    if executor is None:
        return [_fit_task(w) for w in work]
    return list(executor.map(_fit_task, work))


def is_strictly_decreasing(values) -> bool:
    values = list(values)
    return all(b < a for a, b in zip(values, values[1:]))


def relative_error(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference) if reference else math.inf
