"""Linear stability of equilibria and persistence bounds.

The linearisation of the reduced system at an equilibrium ``E`` gives the
characteristic function ``P(lambda) = det(lambda*I - M(lambda; E))`` where the
``I(t - u)`` column of ``M`` carries the factor ``exp(-lambda*u)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .equilibria import Equilibrium, solve_endemic
from .params import ModelParams


class NoConvergence(RuntimeError):
    pass


class PreconditionViolated(ValueError):
    pass


class DFEVerdict(enum.Enum):
    STABLE = "Stable"
    MARGINAL = "Marginal"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class DFEStability:
    verdict: DFEVerdict
    positive_root: float | None = None


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple[complex, ...]
    max_real_part: float
    stable: bool

    @classmethod
    def from_eigenvalues(cls, eigs) -> "SpectrumReport":
        eigs = tuple(complex(z) for z in sorted(eigs, key=lambda z: (-z.real, z.imag)))
        m = max(z.real for z in eigs)
        return cls(eigs, m, m < 0)

    def to_text(self) -> str:
        lines = ["re,im"]
        lines += [f"{z.real:.15g},{z.imag:.15g}" for z in self.eigenvalues]
        lines.append("max_real_part,stable")
        lines.append(f"{self.max_real_part:.15g},{str(self.stable).lower()}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PersistenceBounds:
    weak_lower: float
    upper: float


# -- characteristic function ----------------------------------------------


def _as_components(E) -> tuple[float, float, float, float, float]:
    if isinstance(E, Equilibrium):
        return E.as_tuple()
    s0, s1, s2, z, i = (float(v) for v in E)
    return s0, s1, s2, z, i


def linear_matrix(lam: complex, E, p: ModelParams, u: float | None = None) -> np.ndarray:
    """``M(lambda; E)``; the lagged column is scaled by ``exp(-lambda*u)``."""
    u = p.u if u is None else u
    s0, s1, s2, z, i = _as_components(E)
    lag = np.exp(-lam * u) if u else 1.0
    g = p.gamma
    b0, b1, b2 = p.beta0, p.beta1, p.beta2
    M = np.zeros((5, 5), dtype=complex if isinstance(lam, complex) or u else float)
    M[0] = [-(p.mu + b0 * i + g * z), 0, 0, -g * s0, -b0 * s0 * lag]
    M[1] = [p.gamma1 * z, -(p.mu + b1 * i), 0, p.gamma1 * s0, -b1 * s1 * lag]
    M[2] = [p.gamma2 * z, 0, -(p.mu + b2 * i), p.gamma2 * s0, -b2 * s2 * lag]
    M[3] = [0, 0, 0, -p.eta, p.q]
    M[4] = [b0 * i, b1 * i, b2 * i, 0, (b0 * s0 + b1 * s1 + b2 * s2) * lag - (p.mu + p.d)]
    return M


def char_function(lam: complex, E, p: ModelParams) -> complex:
    """``det(lambda*I - M(lambda; E))`` by LU factorisation."""
    lam = complex(lam)
    M = linear_matrix(lam, E, p).astype(complex)
    return complex(np.linalg.det(lam * np.eye(5) - M))


def char_function_dfe_factored(lam: complex, p: ModelParams) -> complex:
    """Closed form of the characteristic function at the disease-free equilibrium."""
    lam = complex(lam)
    BoverMu = p.B / p.mu
    scalar = lam - p.beta0 * BoverMu * np.exp(-lam * p.u) + p.D0 * BoverMu
    return complex(scalar * (lam + p.mu) ** 3 * (lam + p.eta))


def dfe_stability(p: ModelParams) -> DFEStability:
    """Classify the disease-free equilibrium from the sign of ``beta0 - D0``.

    When unstable, also returns the real root ``lambda > 0`` of
    ``lambda + D0*B/mu - (beta0*B/mu)*exp(-lambda*u) = 0``.
    """
    D0 = p.D0
    if math.isclose(p.beta0, D0, rel_tol=1e-12, abs_tol=0.0):
        return DFEStability(DFEVerdict.MARGINAL, 0.0)
    if p.beta0 < D0:
        return DFEStability(DFEVerdict.STABLE)
    return DFEStability(DFEVerdict.UNSTABLE, dfe_growth_rate(p))


def dfe_growth_rate(p: ModelParams) -> float:
    BoverMu = p.B / p.mu
    a, b = p.D0 * BoverMu, p.beta0 * BoverMu

    def residual(lam):
        return lam + a - b * math.exp(-lam * p.u)

    hi = b
    if residual(hi) <= 0:
        raise RuntimeError("growth-rate bracket check failed")
    return brentq(residual, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


# -- spectrum at u = 0 ----------------------------------------------------


def jacobian_u0(E, p: ModelParams) -> np.ndarray:
    """Jacobian of the reduced system at ``E`` with the delay set to zero."""
    return linear_matrix(0.0, E, p, u=0.0).real.astype(float)


def charpoly(M) -> np.ndarray:
    """Characteristic polynomial coefficients, highest degree first (Faddeev-LeVerrier)."""
    A = np.asarray(M, dtype=float)
    n = A.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    Mk = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = A @ Mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(A @ Mk) / k
    return coeffs


def _horner(coeffs, z):
    p = coeffs[0]
    dp = 0.0
    for c in coeffs[1:]:
        dp = dp * z + p
        p = p * z + c
    return p, dp


def _eval_bound(coeffs, z) -> float:
    """Rounding-error scale of evaluating the polynomial at ``z``."""
    return float(sum(abs(c) * abs(z) ** k for k, c in enumerate(coeffs[::-1])))


def aberth_roots(coeffs, max_iter: int = 500, tol: float = 1e-15) -> np.ndarray:
    """All complex roots of a monic-normalisable polynomial by Aberth-Ehrlich iteration."""
    coeffs = np.asarray(coeffs, dtype=complex)
    coeffs = coeffs / coeffs[0]
    n = len(coeffs) - 1
    if n == 0:
        return np.array([], dtype=complex)
    radius = 1.0 + max(abs(c) for c in coeffs[1:])
    small = max(abs(c) for c in coeffs[1:]) ** (1.0 / n) if np.any(coeffs[1:]) else 0.0
    radius = min(radius, 2.0 * small) if small > 0 else 1.0
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    z = radius * np.exp(1j * angles)
    for _ in range(max_iter):
        biggest = 0.0
        for k in range(n):
            pk, dpk = _horner(coeffs, z[k])
            if pk == 0:
                continue
            ratio = pk / dpk if dpk != 0 else pk
            repulsion = sum(1.0 / (z[k] - z[j]) for j in range(n) if j != k)
            step = ratio / (1.0 - ratio * repulsion)
            z[k] -= step
            biggest = max(biggest, abs(step) / (1.0 + abs(z[k])))
        if biggest < tol:
            return z
    # roots of high multiplicity stall above tol; accept if residuals are at rounding level
    residual = max(abs(_horner(coeffs, zk)[0]) / max(_eval_bound(coeffs, zk), 1e-300) for zk in z)
    if residual < 1e-9:
        return z
    raise NoConvergence("Aberth iteration did not converge")


def _newton_polish(coeffs, z, iters: int = 3):
    for _ in range(iters):
        p, dp = _horner(coeffs, z)
        if dp == 0:
            break
        step = p / dp
        if not np.isfinite(step):
            break
        z = z - step
    return z


def _sigma_min(A, z) -> float:
    return float(np.linalg.svd(A - z * np.eye(A.shape[0]), compute_uv=False)[-1])


def _merge_clusters(A, coeffs, roots, radius: float = 1e-3):
    """Replace clusters that approximate a multiple root by that root.

    Polynomial roots of multiplicity ``m`` scatter by about ``eps**(1/m)``.
    For a cluster of ``m`` nearby roots the zero of the ``(m-1)``-th
    derivative near the centroid is taken as the multiple root, and accepted
    only if it is as good an eigenvalue of ``A`` (smallest singular value of
    ``A - z I``) as the scattered roots themselves.
    """
    roots = list(roots)
    n = len(roots)
    scale = max(1e-300, max(abs(r) for r in roots))
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(n):
        for b in range(a + 1, n):
            if abs(roots[a] - roots[b]) < radius * max(abs(roots[a]), abs(roots[b]), 1e-8 * scale):
                parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    floor = 10 * np.finfo(float).eps * max(np.linalg.norm(A, 2), 1e-300)
    out = list(roots)
    for members in groups.values():
        m = len(members)
        if m < 2:
            continue
        centre = sum(roots[k] for k in members) / m
        deriv = np.array(coeffs, dtype=complex)
        for _ in range(m - 1):
            deriv = np.polyder(deriv)
        z = _newton_polish(deriv, centre, iters=20)
        spread = max(abs(roots[k] - centre) for k in members)
        if abs(z - centre) > 2 * spread + 1e-15 * scale:
            continue
        if abs(z.imag) <= 1e-12 * max(abs(z), 1e-300):
            z = complex(z.real, 0.0)
        worst = max(_sigma_min(A, roots[k]) for k in members)
        if _sigma_min(A, z) <= 2 * worst + floor:
            for k in members:
                out[k] = z
    return np.array(out)


def _pair_conjugates(roots, tol: float = 1e-9) -> np.ndarray:
    roots = list(roots)
    out = []
    used = [False] * len(roots)
    scale = max(1.0, max(abs(r) for r in roots))
    for a, z in enumerate(roots):
        if used[a]:
            continue
        used[a] = True
        if abs(z.imag) <= tol * scale:
            out.append(complex(z.real, 0.0))
            continue
        best, best_dist = None, math.inf
        for b in range(len(roots)):
            if not used[b]:
                dist = abs(roots[b] - z.conjugate())
                if dist < best_dist:
                    best, best_dist = b, dist
        if best is None:
            out.append(z)
            continue
        used[best] = True
        w = roots[best]
        re = 0.5 * (z.real + w.real)
        im = 0.5 * (abs(z.imag) + abs(w.imag))
        out += [complex(re, im), complex(re, -im)]
    return np.array(out)


def eigenvalues_5x5(M) -> SpectrumReport:
    """Eigenvalues of a small real matrix from its characteristic polynomial."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    coeffs = charpoly(A)
    roots = aberth_roots(coeffs)
    roots = np.array([_newton_polish(coeffs, z) for z in roots])
    roots = _merge_clusters(A, coeffs, roots)
    roots = _pair_conjugates(roots)
    return SpectrumReport.from_eigenvalues(roots)


def endemic_stable_u0(p: ModelParams) -> SpectrumReport:
    """Spectrum of the endemic equilibrium of the undelayed system."""
    p0 = p.replace(u=0.0) if p.u else p
    E = solve_endemic(p0)
    if E is None:
        raise PreconditionViolated("endemic equilibrium requires beta0 > D0")
    return eigenvalues_5x5(jacobian_u0(E, p0))


def stability_condition_u0(p: ModelParams) -> bool:
    """``D0 (D0 + tau*gamma) >= tau * sum_j beta_j gamma_j``."""
    D0, tau = p.D0, p.tau
    return D0 * (D0 + tau * p.gamma) >= tau * p.weighted_beta_sum


@dataclass(frozen=True)
class Beta0Scan:
    beta0_values: tuple[float, ...]
    max_real_parts: tuple[float, ...]
    first_unstable: float | None
    cap: float


def _scan_point(args):
    p, beta0, tie = args
    changes = {"beta0": beta0, "u": 0.0}
    if tie:
        changes.update(beta1=tie[0] * beta0, beta2=tie[1] * beta0)
    return endemic_stable_u0(p.replace(**changes)).max_real_part


def beta0_grid_scan(p: ModelParams, grid, tie: tuple[float, float] | None = None,
                    executor=None) -> Beta0Scan:
    """Largest eigenvalue real part of the ``u = 0`` endemic state along an explicit ``beta0`` grid.

    Grid points with ``beta0 <= D0`` have no endemic state and are rejected.
    """
    grid = [float(b) for b in grid]
    if not grid or min(grid) <= p.D0:
        raise PreconditionViolated("beta0 grid must lie above D0")
    work = [(p, b, tie) for b in grid]
    if executor is None:
        parts = [_scan_point(w) for w in work]
    else:
        parts = list(executor.map(_scan_point, work))
    first = next((b for b, m in zip(grid, parts) if m >= 0), None)
    return Beta0Scan(tuple(grid), tuple(parts), first, max(grid))


def beta0_max_scan(p: ModelParams, n: int = 40, cap_factor: float = 100.0,
                   tie: tuple[float, float] | None = None, executor=None) -> Beta0Scan:
    """Geometric scan of ``beta0`` in ``(D0, cap_factor*D0]`` for loss of endemic stability at ``u = 0``.

    ``tie`` keeps ``beta1, beta2`` at fixed multiples of ``beta0``.
    """
    grid = p.D0 * np.geomspace(1.0 + 1e-3, cap_factor, n)
    return beta0_grid_scan(p, grid, tie, executor)


def char_function_grid(E, p: ModelParams, lambdas) -> np.ndarray:
    """Evaluate the characteristic function on user-supplied points (diagnostic only)."""
    return np.array([char_function(lam, E, p) for lam in np.ravel(lambdas)])


# -- persistence ----------------------------------------------------------


def persistence_bounds(p: ModelParams) -> PersistenceBounds:
    D0 = p.D0
    if not p.beta0 > D0:
        raise PreconditionViolated("persistence bounds require beta0 > D0")
    weak_lower = p.mu * (p.beta0 - D0) / (D0 * (p.beta0 + p.tau * p.gamma))
    upper = (p.mu + p.d) * (p.beta0 - D0) / (D0 * p.beta0)
    return PersistenceBounds(weak_lower, upper)
