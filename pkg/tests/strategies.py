"""Hypothesis strategies and seeded draws of admissible parameter sets."""

import numpy as np
from hypothesis import strategies as st

from hivdelay.params import ModelParams

rates = st.floats(min_value=1e-3, max_value=1.0, allow_nan=False)


@st.composite
def model_params(draw, supercritical=None, dominant=False, u=None):
    """Parameters in a band around the Uganda values.

    ``supercritical`` forces ``beta0 > D0`` (True) or ``beta0 < D0`` (False).
    ``dominant`` forces ``beta0 >= max(beta1, beta2)``.
    """
    B = draw(st.floats(0.1, 2.0))
    mu = draw(st.floats(0.005, 0.05))
    d = draw(st.floats(0.05, 0.5))
    gamma0, gamma1, gamma2 = (draw(st.floats(0.0, 1.0)) for _ in range(3))
    if gamma0 + gamma1 + gamma2 < 0.05:
        gamma0 += 0.05
    D0 = mu * (mu + d) / B
    if supercritical is True:
        beta0 = D0 * draw(st.floats(1.01, 30.0))
    elif supercritical is False:
        beta0 = D0 * draw(st.floats(0.05, 0.99))
    else:
        beta0 = D0 * draw(st.floats(0.05, 30.0))
    top = beta0 if dominant else 0.2
    beta1 = draw(st.floats(1e-3, 1.0)) * top
    beta2 = draw(st.floats(1e-3, 1.0)) * top
    q = draw(st.floats(1e-3, 1.0))
    eta = draw(st.floats(1e-2, 1.0))
    delay = draw(st.floats(0.0, 12.0)) if u is None else u
    return ModelParams(B=B, mu=mu, d=d, gamma0=gamma0, gamma1=gamma1, gamma2=gamma2,
                       beta0=beta0, beta1=beta1, beta2=beta2, q=q, eta=eta, u=delay)


def random_supercritical(rng: np.random.Generator) -> ModelParams:
    """Seeded draw with ``beta0 > D0`` for bulk checks outside hypothesis."""
    B = rng.uniform(0.1, 2.0)
    mu = rng.uniform(0.005, 0.05)
    d = rng.uniform(0.05, 0.5)
    D0 = mu * (mu + d) / B
    gammas = rng.uniform(0.0, 1.0, 3) + np.array([0.01, 0.0, 0.0])
    beta0 = D0 * rng.uniform(1.01, 30.0)
    beta1, beta2 = rng.uniform(1e-3, 1.0, 2) * 0.1
    return ModelParams(B=B, mu=mu, d=d, gamma0=gammas[0], gamma1=gammas[1], gamma2=gammas[2],
                       beta0=beta0, beta1=beta1, beta2=beta2, q=rng.uniform(1e-3, 1.0),
                       eta=rng.uniform(1e-2, 1.0), u=rng.uniform(0.0, 12.0))


def two_root_params() -> ModelParams:
    """beta1, beta2 far above beta0 with beta0 between beta0^tau and D0 (tau = 0.003)."""
    base = ModelParams.uganda(6).replace(beta1=0.05, beta2=0.05, u=0.0).with_tau(0.003)
    return base.replace(beta0=0.85 * base.D0)
