"""Equilibria of the reduced system and their dependence on the education ratio.

Every equilibrium is determined by its ``I`` coordinate.  Endemic values of
``I`` are the roots of ``G(I) = mu + d`` where

    G(I) = B beta0 / (mu + b0 I) + (B tau / (mu + b0 I)) * sum_j beta_j gamma_j I / (mu + beta_j I)

with ``tau = q / eta`` and ``b0 = beta0 + tau * gamma``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .params import ModelParams

ROOT_XTOL = 1e-14
GOLDEN_TOL = 1e-10
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class BracketFailure(RuntimeError):
    pass


class EquilibriumKind(enum.Enum):
    DISEASE_FREE = "disease-free"
    ENDEMIC = "endemic"


class RootCase(enum.Enum):
    NO_ROOT = "NoRoot"
    TWO_ROOTS = "TwoRoots"
    BOUNDARY_UNIQUE = "BoundaryUnique"
    UNIQUE_SUPERCRITICAL = "UniqueSupercritical"


@dataclass(frozen=True)
class Equilibrium:
    kind: EquilibriumKind
    S0: float
    S1: float
    S2: float
    Z: float
    I: float
    stability_hint: bool | None = None

    def as_array(self) -> np.ndarray:
        return np.array([self.S0, self.S1, self.S2, self.Z, self.I])

    def as_tuple(self) -> tuple:
        return (self.S0, self.S1, self.S2, self.Z, self.I)


@dataclass(frozen=True)
class RootReport:
    case: RootCase
    roots: tuple[float, ...]
    slopes: tuple[float, ...]
    I_max: float | None = None
    G_max: float | None = None
    target: float = field(default=float("nan"))

    @property
    def n_roots(self) -> int:
        return len(self.roots)


# -- G and its derivative -------------------------------------------------


def eval_G(I, p: ModelParams, beta0: float | None = None, tau: float | None = None):
    """``G(I, beta0, tau)``; ``beta0`` and ``tau`` default to the values in ``p``."""
    beta0 = p.beta0 if beta0 is None else beta0
    tau = p.tau if tau is None else tau
    I = np.asarray(I, dtype=float)
    b0 = beta0 + tau * p.gamma
    denom = p.mu + b0 * I
    weighted = (p.beta1 * p.gamma1 * I / (p.mu + p.beta1 * I)
                + p.beta2 * p.gamma2 * I / (p.mu + p.beta2 * I))
    out = p.B * (beta0 + tau * weighted) / denom
    return float(out) if out.ndim == 0 else out


def dG_dI(I, p: ModelParams, beta0: float | None = None, tau: float | None = None):
    beta0 = p.beta0 if beta0 is None else beta0
    tau = p.tau if tau is None else tau
    I = np.asarray(I, dtype=float)
    b0 = beta0 + tau * p.gamma
    total = -beta0 * b0
    for beta_j, gamma_j in ((p.beta1, p.gamma1), (p.beta2, p.gamma2)):
        total = total + tau * gamma_j * beta_j * (p.mu ** 2 - beta_j * b0 * I ** 2) / (p.mu + beta_j * I) ** 2
    out = p.B * total / (p.mu + b0 * I) ** 2
    return float(out) if out.ndim == 0 else out


def _golden_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    # maximum on the boundary
    best = max((lo, hi, x), key=f)
    return best


def maximize_G(p: ModelParams, beta0: float | None = None, tau: float | None = None) -> tuple[float, float]:
    """Return ``(I_max, G_max)`` over ``0 <= I <= B/mu``.

    No equilibrium has ``I`` above ``B/mu``, and ``G`` is unimodal there.
    """
    beta0 = p.beta0 if beta0 is None else beta0
    tau = p.tau if tau is None else tau
    if dG_dI(0.0, p, beta0, tau) <= 0:
        return 0.0, eval_G(0.0, p, beta0, tau)
    I_max = _golden_max(lambda x: eval_G(x, p, beta0, tau), 0.0, p.B / p.mu)
    return I_max, eval_G(I_max, p, beta0, tau)


# -- equilibria -----------------------------------------------------------


def disease_free(p: ModelParams) -> Equilibrium:
    return Equilibrium(EquilibriumKind.DISEASE_FREE, p.B / p.mu, 0.0, 0.0, 0.0, 0.0)


def assemble(p: ModelParams, I: float) -> Equilibrium:
    """Build the equilibrium with infected coordinate ``I``."""
    if I == 0:
        return disease_free(p)
    denom = p.mu + p.b0u * I
    S0 = p.B / denom
    Z = p.q * I / p.eta
    S1 = p.q * p.gamma1 * I * p.B / (p.eta * (p.mu + p.beta1 * I) * denom)
    S2 = p.q * p.gamma2 * I * p.B / (p.eta * (p.mu + p.beta2 * I) * denom)
    return Equilibrium(EquilibriumKind.ENDEMIC, S0, S1, S2, Z, I)


def _root(f, lo: float, hi: float) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise BracketFailure(f"no sign change on [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def _is_equal(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=0.0)


def classify_roots(p: ModelParams) -> RootReport:
    """Locate and classify all non-negative roots of ``G(I) = mu + d``."""
    target = p.mu + p.d
    D0 = p.D0

    def excess(I):
        return eval_G(I, p) - target

    if p.beta0 > D0 and not _is_equal(p.beta0, D0):
        hi = p.B * (p.beta0 - D0) / (p.mu * p.beta0) + 1.0
        if excess(hi) > 0:
            hi = max(hi, p.B / p.mu)
        try:
            root = _root(excess, 0.0, hi)
        except BracketFailure as exc:
            raise BracketFailure(f"endemic root not bracketed: {exc}") from None
        I_max, G_max = maximize_G(p)
        return RootReport(RootCase.UNIQUE_SUPERCRITICAL, (root,), (dG_dI(root, p),),
                          I_max=I_max, G_max=G_max, target=target)

    I_max, G_max = maximize_G(p)
    upper = p.B / p.mu
    if _is_equal(p.beta0, D0):
        roots = [0.0]
        if I_max > 0 and G_max > target:
            roots.append(_root(excess, I_max, upper))
        return RootReport(RootCase.BOUNDARY_UNIQUE, tuple(roots), tuple(dG_dI(r, p) for r in roots),
                          I_max=I_max, G_max=G_max, target=target)
    if _is_equal(G_max, target):
        return RootReport(RootCase.BOUNDARY_UNIQUE, (I_max,), (dG_dI(I_max, p),),
                          I_max=I_max, G_max=G_max, target=target)
    if G_max < target:
        return RootReport(RootCase.NO_ROOT, (), (), I_max=I_max, G_max=G_max, target=target)
    lo_root = _root(excess, 0.0, I_max)
    hi_root = _root(excess, I_max, upper)
    return RootReport(RootCase.TWO_ROOTS, (lo_root, hi_root),
                      (dG_dI(lo_root, p), dG_dI(hi_root, p)),
                      I_max=I_max, G_max=G_max, target=target)


def solve_endemic(p: ModelParams) -> Equilibrium | None:
    """The unique endemic equilibrium when ``beta0 > D0``; ``None`` otherwise."""
    report = classify_roots(p)
    if report.case is not RootCase.UNIQUE_SUPERCRITICAL:
        return None
    return assemble(p, report.roots[0])


def endemic_equilibria(p: ModelParams) -> list[Equilibrium]:
    """All equilibria with ``I > 0``, including both branches of the two-root regime."""
    return [assemble(p, I) for I in classify_roots(p).roots if I > 0]


# -- thresholds in (beta0, tau) -------------------------------------------


def D1_tau(p: ModelParams, tau: float) -> float:
    """Threshold ``D_{1,tau}``: positive root of ``b (b + tau*gamma) = tau * sum_j gamma_j beta_j``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    s = p.weighted_beta_sum
    return (2.0 * s / p.gamma) / (1.0 + math.sqrt(1.0 + 4.0 * s / (tau * p.gamma ** 2)))


def D1_tau_quadratic(p: ModelParams, tau: float) -> float:
    """Same threshold from the quadratic formula; used as a cross-check."""
    b = tau * p.gamma
    c = -tau * p.weighted_beta_sum
    return (-b + math.sqrt(b * b - 4.0 * c)) / 2.0


def tau_star(p: ModelParams) -> float | None:
    """Smallest ``tau`` with ``D_{1,tau} >= D0``; ``None`` when ``D0 >= rel_weight``."""
    D0 = p.D0
    excess = p.weighted_beta_sum - D0 * p.gamma
    if excess <= 0:
        return None
    return D0 * D0 / excess


def beta0_tau(p: ModelParams, tau: float, tol: float = 1e-13) -> float:
    """Smallest ``beta0`` for which ``max_I G(I, beta0, tau)`` reaches ``mu + d``.

    The value of ``p.beta0`` is ignored.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    D0 = p.D0
    if D0 >= D1_tau(p, tau):
        return D0
    target = p.mu + p.d

    def reaches(beta0):
        return maximize_G(p, beta0, tau)[1] >= target

    lo, hi = 0.0, D0
    while hi - lo > tol * D0:
        mid = 0.5 * (lo + hi)
        if reaches(mid):
            hi = mid
        else:
            lo = mid
    return hi


# -- asymptotics as tau -> infinity ---------------------------------------


def I_star_bounds(p: ModelParams) -> tuple[float, float]:
    """Lower and upper bounds on ``I*`` valid when ``beta0 = max(beta) > D0``."""
    D0 = p.D0
    lower = p.B * (p.beta0 - D0) / ((p.mu + p.d) * (p.beta0 + p.tau * p.gamma))
    upper = min(p.B * (p.beta0 - D0) / (p.mu * p.beta0), p.mu / D0)
    return lower, upper


def limit_case(p: ModelParams) -> str:
    """Which asymptotic regime applies: ``"vanishing"``, ``"boundary"`` or ``"persistent"``.

    Compares ``D0`` with the relative infection weight of ``S1`` and ``S2``.
    """
    D0, w = p.D0, p.rel_weight
    if _is_equal(D0, w):
        return "boundary"
    return "vanishing" if D0 > w else "persistent"


def _require_dominant(p: ModelParams):
    if not (p.beta0 >= max(p.beta1, p.beta2) and p.beta0 > p.D0):
        raise ValueError("requires beta0 = max(beta0, beta1, beta2) > D0")


def I_star_limit(p: ModelParams) -> float:
    """Limit of ``I*`` as ``tau -> infinity``."""
    _require_dominant(p)
    D0 = p.D0
    if D0 >= p.rel_weight:
        return 0.0

    def residual(I):
        return (p.mu / p.gamma) * (p.beta1 * p.gamma1 / (p.mu + p.beta1 * I)
                                   + p.beta2 * p.gamma2 / (p.mu + p.beta2 * I)) - D0

    # the residual is decreasing and is negative at I = mu / D0
    return _root(residual, 0.0, p.mu / D0)


def Z_star_limit(p: ModelParams) -> float:
    """Limit of ``Z*`` as ``tau -> infinity`` when ``D0 > rel_weight``.

    Solves ``D0 (mu + gamma Z) = mu beta0 + Z sum_j beta_j gamma_j``, which is linear in ``Z``.
    """
    _require_dominant(p)
    D0 = p.D0
    denom = D0 * p.gamma - p.weighted_beta_sum
    if denom <= 0:
        raise ValueError("Z* limit is finite only when D0 > rel_weight")
    return p.mu * (p.beta0 - D0) / denom


def S_star_limits(p: ModelParams) -> tuple[float, float, float]:
    """Limits of ``(S0*, S1*, S2*)`` as ``tau -> infinity``."""
    _require_dominant(p)
    B, mu, g = p.B, p.mu, p.gamma
    case = limit_case(p)
    if case == "boundary":
        return 0.0, p.gamma1 * B / (mu * g), p.gamma2 * B / (mu * g)
    if case == "vanishing":
        Zinf = Z_star_limit(p)
        denom = mu + g * Zinf
        return B / denom, p.gamma1 * B * Zinf / (mu * denom), p.gamma2 * B * Zinf / (mu * denom)
    Iinf = I_star_limit(p)
    return (0.0, p.gamma1 * B / (g * (mu + p.beta1 * Iinf)),
            p.gamma2 * B / (g * (mu + p.beta2 * Iinf)))


@dataclass(frozen=True)
class SweepRow:
    tau: float
    I: float
    S0: float
    S1: float
    S2: float
    Z: float
    lower_bound: float
    upper_bound: float


SWEEP_HEADER = ("tau", "I*", "S0*", "S1*", "S2*", "Z*", "lower_bound", "upper_bound")


def _sweep_row(args) -> SweepRow:
    p, tau = args
    pt = p.with_tau(tau)
    eq = solve_endemic(pt)
    if eq is None:
        raise ValueError("sweep requires beta0 > D0")
    lo, hi = I_star_bounds(pt)
    return SweepRow(tau, eq.I, eq.S0, eq.S1, eq.S2, eq.Z, lo, hi)


def sweep_tau(p: ModelParams, tau_grid, executor=None) -> list[SweepRow]:
    """Endemic equilibrium along ``tau_grid``; ``q`` is rescaled with ``eta`` fixed."""
    if not p.beta0 > p.D0:
        raise ValueError("sweep requires beta0 > D0")
    grid = [float(t) for t in tau_grid]
    if any(t <= 0 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("tau grid must be positive and increasing")
    work = [(p, t) for t in grid]
    if executor is None:
        return [_sweep_row(w) for w in work]
    return list(executor.map(_sweep_row, work))


def sweep_rows(rows) -> list[list[float]]:
    return [[r.tau, r.I, r.S0, r.S1, r.S2, r.Z, r.lower_bound, r.upper_bound] for r in rows]
