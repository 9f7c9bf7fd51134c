"""Approximations of the filtered conditional mean ``m`` and variance ``m2``.

Four variants are available, selected by name:

``euler``
    ``m = x + bbar*D``, ``m2 = a^2 * D``.
``second-order``
    Euler plus the jump corrections ``J1`` (mean) and ``J2`` (variance),
    integrals of the kernel against the Levy density. Constant ``gamma`` only.
``generator2``
    Order-two expansion obtained by iterating the continuous generator on
    ``y - x`` and ``(y - x)^2``.
``exact-ou``
    Closed-form conditional moments of the continuous part of a linear OU model.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .kernels import TruncationKernel
from .model import ModelSpec, apply_generator_c, compensated_drift, polynomial_bundle
from .quadrature import integrate_checked

VARIANTS = ("euler", "second-order", "generator2", "exact-ou")

# declared (rho1, rho2) accuracy orders; None = exact for linear models
ACCURACY_ORDERS = {
    "euler": ("2-2*beta", 1),
    "second-order": ("2-2*beta", 2),
    "generator2": (None, None),
    "exact-ou": (None, None),
}


@dataclass(frozen=True)
class FilterConfig:
    """Jump filter ``phi(dX / (c * D^beta))`` and state cut-off ``|X| <= D^-k``.

    ``c = inf`` switches the jump filter off (all weights equal 1) and
    ``k_trunc = inf`` switches the state cut-off off.
    """

    beta: float = 0.49
    c: float = 2.0
    k_trunc: float = 1.0

    def __post_init__(self):
        if not 0.25 < self.beta < 0.5:
            raise ValueError(f"beta must lie in (1/4, 1/2), got {self.beta}")
        if not self.c > 0:
            raise ValueError("threshold multiplier c must be > 0")
        if not self.k_trunc > 0:
            raise ValueError("state-truncation exponent must be > 0")

    def threshold(self, delta):
        return self.c * np.asarray(delta, dtype=float) ** self.beta


class _JCache:
    """Memo for jump integrals; concurrent readers, one writer at a time."""

    def __init__(self):
        self._data: dict = {}
        self._lock = threading.Lock()

    def get(self, key, compute):
        try:
            return self._data[key]
        except KeyError:
            pass
        val = compute()
        with self._lock:
            self._data.setdefault(key, val)
        return self._data[key]


_J_CACHE = _JCache()


def _require_constant_gamma(model: ModelSpec) -> float:
    if model.gamma_const is None:
        raise ValueError("jump corrections need a constant jump coefficient")
    return model.gamma_const


def _jump_integral(power: int, model: ModelSpec, kernel: TruncationKernel, filt: FilterConfig, delta: float,
                   panels: int = 256, nodes: int = 16) -> float:
    gamma = _require_constant_gamma(model)
    jl = model.jumps
    if jl.lam == 0 or np.isinf(filt.c):
        return 0.0
    delta = float(delta)
    key = (power, jl, kernel, filt.c, filt.beta, gamma, delta, panels, nodes)

    def compute():
        thr = filt.c * delta**filt.beta
        scale = thr / gamma
        r = kernel.support_radius
        val, _ = integrate_checked(lambda u: u**power * kernel(u) * jl.density(u * scale), -r, r, panels, nodes)
        return thr ** (power + 1) * delta / gamma * val

    return _J_CACHE.get(key, compute)


def jump_integral_J1(model: ModelSpec, kernel: TruncationKernel, filt: FilterConfig, delta: float) -> float:
    """``c^2 D^(1+2 beta) / gamma * int u phi(u) F(u c D^beta / gamma) du``."""
    return _jump_integral(1, model, kernel, filt, delta)


def jump_integral_J2(model: ModelSpec, kernel: TruncationKernel, filt: FilterConfig, delta: float) -> float:
    """``c^3 D^(1+3 beta) / gamma * int u^2 phi(u) F(u c D^beta / gamma) du``."""
    return _jump_integral(2, model, kernel, filt, delta)


def _per_delta(fn, delta):
    """Apply a scalar function of ``delta`` to an array, evaluating each distinct value once."""
    d = np.asarray(delta, dtype=float)
    if d.ndim == 0:
        return fn(float(d))
    uniq, inv = np.unique(d, return_inverse=True)
    return np.array([fn(float(u)) for u in uniq])[inv].reshape(d.shape)


# --- Euler ---------------------------------------------------------------

def m_euler(model: ModelSpec, theta, x, delta):
    mu, _ = theta
    x = np.asarray(x, dtype=float)
    return x + compensated_drift(model, mu, x) * delta


def m2_euler(model: ModelSpec, theta, x, delta):
    _, sigma = theta
    a = model.diffusion(sigma, np.asarray(x, dtype=float))
    return a * a * delta


# --- second order with jump corrections ----------------------------------

def m_second_order(model, theta, x, delta, kernel, filt):
    j1 = _per_delta(lambda d: jump_integral_J1(model, kernel, filt, d), delta)
    return m_euler(model, theta, x, delta) + j1


def m2_second_order(model, theta, x, delta, kernel, filt):
    j2 = _per_delta(lambda d: jump_integral_J2(model, kernel, filt, d), delta)
    return m2_euler(model, theta, x, delta) + j2


# --- generator expansion, order 2 ----------------------------------------

def kessler_coefficients(model: ModelSpec, theta, x):
    """``(A1^(1), A1^(2), B^(1), B^(2))`` at ``x``.

    ``A1^(k)`` iterates the generator on ``y - x``; ``B^(k)`` on ``(y - x)^2``,
    which equals the raw ``y^2`` iterates minus ``2x A1^(k)``.
    """
    x = np.asarray(x, dtype=float)
    h1 = polynomial_bundle([0.0, 1.0])
    a11 = apply_generator_c(model, theta, h1)
    a12 = apply_generator_c(model, theta, a11)
    A1 = a11(x)
    A2 = a12(x)
    h2 = polynomial_bundle([0.0, 0.0, 1.0])
    b1 = apply_generator_c(model, theta, h2)
    b2 = apply_generator_c(model, theta, b1)
    B1 = b1(x) - 2 * x * A1
    B2 = b2(x) - 2 * x * A2
    return A1, A2, B1, B2


def m_generator2(model, theta, x, delta, order: int = 2):
    x = np.asarray(x, dtype=float)
    A1, A2, _, _ = kessler_coefficients(model, theta, x)
    out = x + A1 * delta
    if order >= 2:
        out = out + A2 * delta**2 / 2
    return out


def m2_generator2(model, theta, x, delta, order: int = 2):
    x = np.asarray(x, dtype=float)
    A1, A2, B1, B2 = kessler_coefficients(model, theta, x)
    s1 = A1 * delta
    s2 = B1 * delta
    if order >= 2:
        s1 = s1 + A2 * delta**2 / 2
        s2 = s2 + B2 * delta**2 / 2
    return s2 - s1 * s1


def m2_generator2_raw(model, theta, x, delta):
    """Same quantity written with ``y^2`` iterates: ``x^2 + sum_k A2^(k) D^k/k! - (x + sum_k A1^(k) D^k/k!)^2``."""
    x = np.asarray(x, dtype=float)
    h1 = polynomial_bundle([0.0, 1.0])
    h2 = polynomial_bundle([0.0, 0.0, 1.0])
    g1 = apply_generator_c(model, theta, h1)
    g2 = apply_generator_c(model, theta, h2)
    m = x + g1(x) * delta + apply_generator_c(model, theta, g1)(x) * delta**2 / 2
    second = x * x + g2(x) * delta + apply_generator_c(model, theta, g2)(x) * delta**2 / 2
    return second - m * m


# --- exact OU --------------------------------------------------------------

def _check_ou(model: ModelSpec) -> float:
    if not model.is_linear_ou:
        raise ValueError("exact-ou moments need a linear OU model")
    t1 = model.ou_slope
    if t1 == 0:
        raise ValueError("exact-ou moments need theta1 != 0")
    return t1


def m_exact_ou(model: ModelSpec, theta, x, delta):
    """``(x + theta2/theta1 - g lam mu_j/theta1) e^(theta1 D) + (g lam mu_j - theta2)/theta1``."""
    t1 = _check_ou(model)
    mu, _ = theta
    jump_mean = model.gamma_const * model.jumps.first_moment()
    x = np.asarray(x, dtype=float)
    # expm1 form of the same expression, accurate for small theta1*D
    return x * np.exp(t1 * np.asarray(delta)) + (mu - jump_mean) * np.expm1(t1 * np.asarray(delta)) / t1


def m2_exact_ou(model: ModelSpec, theta, delta):
    """``sigma^2 / (2 theta1) * (e^(2 theta1 D) - 1)``."""
    t1 = _check_ou(model)
    _, sigma = theta
    return sigma**2 * np.expm1(2 * t1 * np.asarray(delta, dtype=float)) / (2 * t1)


@dataclass(frozen=True)
class MomentApproximator:
    """Strategy object producing ``(m~, m2~)`` arrays for the contrast."""

    variant: str = "exact-ou"
    kernel: TruncationKernel = field(default_factory=TruncationKernel)
    panels: int = 256
    nodes: int = 16

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown approximator {self.variant!r}; choose one of {VARIANTS}")

    @property
    def accuracy_orders(self):
        return ACCURACY_ORDERS[self.variant]

    def validate(self, model: ModelSpec) -> None:
        if self.variant == "exact-ou":
            _check_ou(model)
        if self.variant == "second-order":
            _require_constant_gamma(model)

    def moments(self, model: ModelSpec, theta, x, delta, filt: FilterConfig):
        v = self.variant
        if v == "euler":
            return m_euler(model, theta, x, delta), m2_euler(model, theta, x, delta)
        if v == "second-order":
            return (m_second_order(model, theta, x, delta, self.kernel, filt),
                    m2_second_order(model, theta, x, delta, self.kernel, filt))
        if v == "generator2":
            return m_generator2(model, theta, x, delta), m2_generator2(model, theta, x, delta)
        m2 = m2_exact_ou(model, theta, delta)
        return m_exact_ou(model, theta, x, delta), np.broadcast_to(m2, np.shape(x)).astype(float)

    def jump_corrections(self, model: ModelSpec, delta, filt: FilterConfig):
        """``(J1, J2)`` per interval; zero unless the variant is ``second-order``."""
        d = np.asarray(delta, dtype=float)
        if self.variant != "second-order":
            return np.zeros_like(d), np.zeros_like(d)
        return (_per_delta(lambda t: jump_integral_J1(model, self.kernel, filt, t), d),
                _per_delta(lambda t: jump_integral_J2(model, self.kernel, filt, t), d))
