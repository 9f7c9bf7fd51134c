"""Parametric jump-diffusion models.

The state equation is

    dX_t = b(mu, X_t) dt + a(sigma, X_t) dW_t + gamma(X_{t-}) z (mu - mu_bar)(dt, dz)

with a finite-activity Levy measure ``F = lam * F0`` and ``F0`` Gaussian.
Coefficients come with user-supplied derivative callbacks; nothing is
differentiated automatically.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

Fn = Callable[..., "np.ndarray | float"]

# probe points for the sampled assumption checks
_GAMMA_PROBES = np.linspace(-50.0, 50.0, 201)
_ERGODIC_PROBES = np.array([10.0, 100.0, 1000.0])


@dataclass(frozen=True)
class ParameterBox:
    mu_lo: float
    mu_hi: float
    sigma_lo: float
    sigma_hi: float

    def __post_init__(self):
        if not self.mu_lo < self.mu_hi:
            raise ValueError(f"empty drift range [{self.mu_lo}, {self.mu_hi}]")
        if not 0.0 < self.sigma_lo < self.sigma_hi:
            raise ValueError(f"volatility range must satisfy 0 < lo < hi, got [{self.sigma_lo}, {self.sigma_hi}]")

    def contains(self, mu: float, sigma: float) -> bool:
        return self.mu_lo <= mu <= self.mu_hi and self.sigma_lo <= sigma <= self.sigma_hi

    def clip(self, mu: float, sigma: float) -> tuple[float, float]:
        return (min(max(mu, self.mu_lo), self.mu_hi), min(max(sigma, self.sigma_lo), self.sigma_hi))

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.mu_lo, self.sigma_lo])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.mu_hi, self.sigma_hi])


@dataclass(frozen=True)
class JumpLaw:
    """Levy density ``lam * N(mu_j, sigma_j^2)``; ``lam == 0`` means no jumps."""

    lam: float = 0.0
    mu_j: float = 0.0
    sigma_j: float = 1.0
    family: str = "gaussian"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("jump intensity must be >= 0")
        if not self.sigma_j > 0:
            raise ValueError("jump-size std must be > 0")
        if self.family != "gaussian":
            raise ValueError(f"unsupported jump family {self.family!r}")

    def density(self, z):
        """Levy density ``F(z) = lam * F0(z)``."""
        return self.lam * stats.norm.pdf(z, loc=self.mu_j, scale=self.sigma_j)

    def first_moment(self) -> float:
        """``int z F(z) dz``."""
        return self.lam * self.mu_j

    def sample_sizes(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mu_j, self.sigma_j, size)


def _zero(*args):
    return np.zeros_like(np.asarray(args[-1], dtype=float))


@dataclass(frozen=True)
class ModelSpec:
    """Coefficients of a one-dimensional jump-diffusion and their derivatives.

    ``drift(mu, x)``, ``diffusion(sigma, x)`` and ``jump_coef(x)`` must accept
    numpy arrays for ``x``. ``gamma_const`` is set when the jump coefficient is
    constant, which the second-order moment expansion requires.
    ``ou_slope`` is the mean-reversion coefficient theta1 of the built-in linear
    family, whose free drift parameter ``mu`` is the intercept theta2.
    """

    drift: Fn
    drift_x: Fn
    drift_xx: Fn
    drift_mu: Fn
    diffusion: Fn
    diffusion_x: Fn
    diffusion_xx: Fn
    diffusion_sigma: Fn
    jump_coef: Fn
    jump_coef_x: Fn
    jumps: JumpLaw = JumpLaw()
    jump_coef_xx: Fn | None = None
    gamma_const: float | None = None
    is_linear_ou: bool = False
    ou_slope: float | None = None
    gamma_min: float = dataclasses.field(init=False, default=0.0)

    def __post_init__(self):
        g = np.abs(np.broadcast_to(np.asarray(self.jump_coef(_GAMMA_PROBES), dtype=float), _GAMMA_PROBES.shape))
        object.__setattr__(self, "gamma_min", float(g.min()))
        if self.jumps.lam > 0 and self.gamma_min <= 0:
            raise ValueError("jump coefficient must be bounded away from zero")
        if self.is_linear_ou and (self.ou_slope is None or self.gamma_const is None):
            raise ValueError("linear OU models need ou_slope and gamma_const")

    def with_slope(self, theta1: float) -> "ModelSpec":
        """Copy of a linear OU model with a different mean-reversion slope."""
        if not self.is_linear_ou:
            raise ValueError("with_slope only applies to linear OU models")
        return linear_ou(theta1, self.gamma_const, self.jumps)

    def with_jumps(self, jumps: JumpLaw) -> "ModelSpec":
        return dataclasses.replace(self, jumps=jumps)

    def check_assumptions(self, box: ParameterBox, probes=None) -> None:
        """Sampled sanity checks of non-degeneracy and mean reversion.

        Raises ``ValueError`` on the first violated probe. This is a smoke
        test at a handful of points, not a proof.
        """
        xs = np.linspace(-100.0, 100.0, 401) if probes is None else np.asarray(probes, dtype=float)
        for sig in (box.sigma_lo, 0.5 * (box.sigma_lo + box.sigma_hi), box.sigma_hi):
            a2 = np.asarray(self.diffusion(sig, xs), dtype=float) ** 2
            if np.min(a2) <= 0:
                raise ValueError(f"diffusion degenerates at sigma={sig}")
        big = np.concatenate([_ERGODIC_PROBES, -_ERGODIC_PROBES])
        for mu in (box.mu_lo, 0.5 * (box.mu_lo + box.mu_hi), box.mu_hi):
            if np.any(big * np.asarray(self.drift(mu, big), dtype=float) >= 0):
                raise ValueError(f"drift is not mean reverting at mu={mu}")


def linear_ou(theta1: float, gamma: float = 1.0, jumps: JumpLaw | None = None) -> ModelSpec:
    """Built-in linear family ``b = theta1*x + mu``, ``a = sigma``, ``gamma`` constant."""
    jumps = JumpLaw() if jumps is None else jumps
    t1 = float(theta1)
    g = float(gamma)
    return ModelSpec(
        drift=lambda mu, x: t1 * np.asarray(x, dtype=float) + mu,
        drift_x=lambda mu, x: np.full_like(np.asarray(x, dtype=float), t1),
        drift_xx=lambda mu, x: np.zeros_like(np.asarray(x, dtype=float)),
        drift_mu=lambda mu, x: np.ones_like(np.asarray(x, dtype=float)),
        diffusion=lambda sigma, x: np.full_like(np.asarray(x, dtype=float), sigma),
        diffusion_x=lambda sigma, x: np.zeros_like(np.asarray(x, dtype=float)),
        diffusion_xx=lambda sigma, x: np.zeros_like(np.asarray(x, dtype=float)),
        diffusion_sigma=lambda sigma, x: np.ones_like(np.asarray(x, dtype=float)),
        jump_coef=lambda x: np.full_like(np.asarray(x, dtype=float), g),
        jump_coef_x=_zero,
        jump_coef_xx=_zero,
        jumps=jumps,
        gamma_const=g,
        is_linear_ou=True,
        ou_slope=t1,
    )


def compensated_drift(model: ModelSpec, mu: float, x):
    """``b(mu, x) - gamma(x) * int z F(z) dz``."""
    x = np.asarray(x, dtype=float)
    out = model.drift(mu, x) - model.jump_coef(x) * model.jumps.first_moment()
    return out if np.ndim(out) else float(out)


def _compensated_drift_derivs(model: ModelSpec, mu: float, x):
    m1 = model.jumps.first_moment()
    b0 = model.drift(mu, x) - model.jump_coef(x) * m1
    b1 = model.drift_x(mu, x) - model.jump_coef_x(x) * m1
    if m1 != 0.0 and model.jump_coef_xx is None:
        raise ValueError("model lacks jump_coef_xx, required when the jump law is not centred")
    gxx = model.jump_coef_xx(x) if model.jump_coef_xx is not None else 0.0
    b2 = model.drift_xx(mu, x) - gxx * m1
    return b0, b1, b2


@dataclass(frozen=True)
class FunctionBundle:
    """A function together with its successive derivatives, ``derivs[0]`` = value."""

    derivs: tuple

    def __call__(self, x, order: int = 0):
        return self.derivs[order](x)

    @property
    def order(self) -> int:
        return len(self.derivs) - 1


def polynomial_bundle(coeffs, centre: float = 0.0, order: int = 4) -> FunctionBundle:
    """Bundle for ``sum_k coeffs[k] * (y - centre)^k`` with derivatives up to ``order``."""
    p = np.polynomial.Polynomial(coeffs)
    polys = [p]
    for _ in range(order):
        polys.append(polys[-1].deriv())
    return FunctionBundle(tuple((lambda y, q=q: q(np.asarray(y, dtype=float) - centre)) for q in polys))


def apply_generator_c(model: ModelSpec, theta: tuple[float, float], f: FunctionBundle) -> FunctionBundle:
    """Continuous generator ``g = bbar f' + a^2 f'' / 2``.

    Derivatives of ``g`` are produced up to ``f.order - 2`` (at most 2), so a
    bundle carrying 4 derivatives can be pushed through twice.
    """
    mu, sigma = theta
    if f.order < 2:
        raise ValueError("generator needs at least two derivatives of f")
    for name in ("drift_x", "drift_xx", "diffusion_x", "diffusion_xx"):
        if getattr(model, name) is None:
            raise ValueError(f"model lacks derivative callback {name}")

    def coeffs(y):
        y = np.asarray(y, dtype=float)
        b0, b1, b2 = _compensated_drift_derivs(model, mu, y)
        a0 = model.diffusion(sigma, y)
        a1 = model.diffusion_x(sigma, y)
        a2 = model.diffusion_xx(sigma, y)
        # derivatives of a^2 / 2
        q0 = 0.5 * a0 * a0
        q1 = a0 * a1
        q2 = a1 * a1 + a0 * a2
        return (b0, b1, b2), (q0, q1, q2)

    def g0(y):
        (b0, _, _), (q0, _, _) = coeffs(y)
        return b0 * f(y, 1) + q0 * f(y, 2)

    def g1(y):
        (b0, b1, _), (q0, q1, _) = coeffs(y)
        return b1 * f(y, 1) + (b0 + q1) * f(y, 2) + q0 * f(y, 3)

    def g2(y):
        (b0, b1, b2), (q0, q1, q2) = coeffs(y)
        return b2 * f(y, 1) + (2 * b1 + q2) * f(y, 2) + (b0 + 2 * q1) * f(y, 3) + q0 * f(y, 4)

    out = [g0, g1, g2][: min(3, f.order - 1)]
    return FunctionBundle(tuple(out))
