"""Model parameters, state vectors and right-hand sides.

State vectors are plain numpy arrays ordered ``(S0, S1, S2, Z, I)`` for the
reduced system and ``(S0, S1, S2, Z, I, R)`` for the full system.  Populations
are in millions and time is in years.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

S0, S1, S2, Z, I, R = range(6)
REDUCED_NAMES = ("S0", "S1", "S2", "Z", "I")
FULL_NAMES = REDUCED_NAMES + ("R",)

#: Fixed values used for the Uganda fit (rates per year, populations in millions).
UGANDA_FIXED = {"B": 0.55, "mu": 0.01176, "d": 0.14, "gamma1": 0.1, "gamma2": 0.8}
BETA1_RATIO = 0.05
BETA2_RATIO = 0.40

#: Fitted (beta0, eta, gamma0, q) for each delay of the Uganda data set.
UGANDA_FITTED = {
    0: (0.025801, 0.041590, 0.249756, 0.087683),
    3: (0.023290, 0.049984, 0.252212, 0.094138),
    6: (0.021509, 0.055251, 0.252445, 0.099323),
    9: (0.020364, 0.061623, 0.252566, 0.105675),
    12: (0.019605, 0.063318, 0.253071, 0.107944),
}
UGANDA_SSE = {0: 1.377340, 3: 1.350753, 6: 1.309197, 9: 1.267271, 12: 1.238921}


class ParameterError(ValueError):
    """Raised for parameter values outside the admissible set."""


@dataclass(frozen=True)
class DerivedQuantities:
    gamma_total: float
    b0u: float
    tau: float
    D0: float
    R0: float
    rel_weight: float


@dataclass(frozen=True)
class ModelParams:
    """Rate constants of the delayed HIV model with education campaigns.

    Parameters
    ----------
    B : float
        Recruitment rate into ``S0`` (millions per year).
    mu : float
        Natural death rate, shared by every class.
    d : float
        Disease-induced death rate of infectives.
    gamma0, gamma1, gamma2 : float
        Response rates of ``S0`` to information, moving individuals to
        ``R``, ``S1`` and ``S2`` respectively.
    beta0, beta1, beta2 : float
        Mass-action transmission rates of ``S0``, ``S1`` and ``S2``.
    q : float
        Information produced per infective per year.
    eta : float
        Information decay rate.
    u : float
        Delay between infection and infectiousness (years).
    """

    B: float
    mu: float
    d: float
    gamma0: float
    gamma1: float
    gamma2: float
    beta0: float
    beta1: float
    beta2: float
    q: float
    eta: float
    u: float = 0.0

    def __post_init__(self):
        for name in ("B", "mu", "d", "q", "eta", "beta0", "beta1", "beta2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")
        for name in ("gamma0", "gamma1", "gamma2", "u"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be non-negative and finite, got {value!r}")
        if self.gamma0 + self.gamma1 + self.gamma2 <= 0:
            raise ParameterError("gamma0 + gamma1 + gamma2 must be positive")

    # -- constructors -----------------------------------------------------

    @classmethod
    def uganda(cls, u: int = 6, **overrides) -> "ModelParams":
        """Fixed Uganda values merged with the fitted row for delay ``u``.

        ``beta1`` and ``beta2`` are tied to ``beta0`` unless overridden.
        """
        if u not in UGANDA_FITTED:
            raise ParameterError(f"no fitted row for delay {u}; choose from {sorted(UGANDA_FITTED)}")
        beta0, eta, gamma0, q = UGANDA_FITTED[u]
        beta0 = overrides.pop("beta0", beta0)
        values = dict(UGANDA_FIXED, beta0=beta0, beta1=BETA1_RATIO * beta0,
                      beta2=BETA2_RATIO * beta0, eta=eta, gamma0=gamma0, q=q, u=float(u))
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_mapping(cls, values: dict, base: "ModelParams | None" = None) -> "ModelParams":
        unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ParameterError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        if base is None:
            return cls(**{k: float(v) for k, v in values.items()})
        return base.replace(**{k: float(v) for k, v in values.items()})

    @classmethod
    def from_file(cls, path, base: "ModelParams | None" = None) -> "ModelParams":
        """Read ``name = value`` lines; ``#`` starts a comment.

        Keys missing from the file are taken from ``base`` when given.
        """
        return cls.from_mapping(read_keyvalue(path), base=base)

    def to_file(self, path) -> None:
        lines = [f"{f.name} = {getattr(self, f.name)!r}" for f in dataclasses.fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def with_tau(self, tau: float) -> "ModelParams":
        """Same parameters with ``q`` rescaled so that ``q / eta == tau``."""
        return self.replace(q=tau * self.eta)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    # -- derived scalars --------------------------------------------------

    @property
    def gamma(self) -> float:
        return self.gamma0 + self.gamma1 + self.gamma2

    @property
    def tau(self) -> float:
        return self.q / self.eta

    @property
    def D0(self) -> float:
        return self.mu * (self.mu + self.d) / self.B

    @property
    def b0u(self) -> float:
        return self.beta0 + self.tau * self.gamma

    @property
    def weighted_beta_sum(self) -> float:
        """``beta1*gamma1 + beta2*gamma2``."""
        return self.beta1 * self.gamma1 + self.beta2 * self.gamma2

    @property
    def rel_weight(self) -> float:
        return self.weighted_beta_sum / self.gamma

    @property
    def beta_max(self) -> float:
        return max(self.beta0, self.beta1, self.beta2)

    def derived(self) -> DerivedQuantities:
        return derived(self)


def derived(p: ModelParams) -> DerivedQuantities:
    return DerivedQuantities(
        gamma_total=p.gamma,
        b0u=p.b0u,
        tau=p.tau,
        D0=p.D0,
        R0=p.B * p.beta0 / (p.mu * (p.mu + p.d)),
        rel_weight=p.rel_weight,
    )


def read_keyvalue(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'name = value'")
        key, _, value = line.partition("=")
        try:
            values[key.strip()] = float(value)
        except ValueError:
            raise ParameterError(f"{path}:{lineno}: not a number: {value.strip()!r}") from None
    return values


@dataclass(frozen=True)
class State:
    """Named view of a compartment vector; ``R`` is ``None`` for the reduced system."""

    S0: float
    S1: float
    S2: float
    Z: float
    I: float
    R: float | None = None

    @classmethod
    def from_array(cls, y) -> "State":
        y = [float(v) for v in y]
        return cls(*y)

    def as_array(self) -> np.ndarray:
        values = [self.S0, self.S1, self.S2, self.Z, self.I]
        if self.R is not None:
            values.append(self.R)
        return np.array(values, dtype=float)

    @property
    def N(self) -> float:
        return self.S0 + self.S1 + self.S2 + self.I


def disease_free_state(p: ModelParams, full: bool = False) -> np.ndarray:
    y = np.zeros(6 if full else 5)
    y[S0] = p.B / p.mu
    return y


# -- right-hand sides -----------------------------------------------------


def rhs_reduced(p: ModelParams, y, I_delayed: float) -> np.ndarray:
    """Time derivatives of ``(S0, S1, S2, Z, I)``; ``I_delayed`` is ``I(t - u)``."""
    s0, s1, s2, z, i = y[0], y[1], y[2], y[3], y[4]
    contact = s0 * z
    return np.array([
        p.B - p.gamma * contact - p.beta0 * s0 * I_delayed - p.mu * s0,
        p.gamma1 * contact - p.beta1 * s1 * I_delayed - p.mu * s1,
        p.gamma2 * contact - p.beta2 * s2 * I_delayed - p.mu * s2,
        p.q * i - p.eta * z,
        (p.beta0 * s0 + p.beta1 * s1 + p.beta2 * s2) * I_delayed - (p.mu + p.d) * i,
    ])


def rhs_full(p: ModelParams, y, I_delayed: float) -> np.ndarray:
    """Time derivatives of ``(S0, S1, S2, Z, I, R)``."""
    out = np.empty(6)
    out[:5] = rhs_reduced(p, y, I_delayed)
    out[R] = p.gamma0 * y[0] * y[3] - p.mu * y[5]
    return out


def rhs_si(p: ModelParams, S0: float, I: float, I_delayed: float) -> tuple[float, float]:
    """Information-free SI model: only ``B``, ``mu``, ``d`` and ``beta0`` are used."""
    infection = p.beta0 * S0 * I_delayed
    return p.B - infection - p.mu * S0, infection - (p.mu + p.d) * I
