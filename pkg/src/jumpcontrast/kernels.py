"""Smooth truncation functions used to filter jumps out of the contrast.

Two families are provided:

* the plain bump ``phi0``: equal to 1 on [-1, 1], 0 outside [-2, 2], with a
  C-infinity monotone transition in between;
* the oscillating family of level ``l`` and scale ``d``, built from ``phi0`` by
  a finite alternating sum of dilations. It keeps the plateau on [-1, 1] but
  also takes negative values, which cancels low-order moments.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .quadrature import composite_gauss_legendre


def _smooth_step(t):
    """C-infinity step from 0 (t <= 0) to 1 (t >= 1); s(1/2) = 1/2 exactly."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tt = np.where(inside, t, 0.5)
    # e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}) rewritten as a logistic in 1/t - 1/(1-t)
    expo = np.clip(1.0 / tt - 1.0 / (1.0 - tt), -700.0, 700.0)
    out = 1.0 / (1.0 + np.exp(expo))
    return np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, out))


def phi0_eval(x):
    """Plain bump: 1 on |x| <= 1, 0 on |x| >= 2, ``1 - s(|x| - 1)`` in between."""
    ax = np.abs(np.asarray(x, dtype=float))
    val = 1.0 - _smooth_step(ax - 1.0)
    val = np.where(ax <= 1.0, 1.0, np.where(ax >= 2.0, 0.0, val))
    return val if val.ndim else float(val)


def phi1_eval(x, d: float):
    """First oscillating kernel ``(d*phi0(x) - phi0(x/d)) / (d - 1)``; zero integral."""
    if d <= 1.0:
        raise ValueError(f"scale d must be > 1, got {d}")
    x = np.asarray(x, dtype=float)
    return (d * phi0_eval(x) - phi0_eval(x / d)) / (d - 1.0)


@dataclass(frozen=True)
class TruncationKernel:
    """Truncation function of a given oscillation ``level`` and ``scale``.

    ``level == 0`` is the plain bump and ignores ``scale``.
    """

    level: int = 0
    scale: float | None = None

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("kernel level must be >= 0")
        if self.level >= 1:
            if self.scale is None or not self.scale > 1.0:
                raise ValueError(f"oscillating kernel needs scale d > 1, got {self.scale}")

    @property
    def support_radius(self) -> float:
        if self.level == 0:
            return 2.0
        return 2.0 * self.scale * self.level

    @property
    def normaliser(self) -> float:
        # c_d in the alternating sum; only meaningful for level >= 1
        return sum(self._coefficients())

    def _coefficients(self) -> list[float]:
        l = self.level
        return [comb(l, k) * (-1) ** (k + 1) / k for k in range(1, l + 1)]

    def __call__(self, x):
        return phi_l_eval(self, x)

    def label(self) -> str:
        return "phi0" if self.level == 0 else f"phi{self.level}_{self.scale:g}"


def phi_l_eval(kernel: TruncationKernel, x):
    """Evaluate ``kernel`` at ``x`` (scalar or array)."""
    x_arr = np.asarray(x, dtype=float)
    if kernel.level == 0:
        return phi0_eval(x)
    if not kernel.scale > 1.0:
        raise ValueError("scale must be > 1")
    acc = np.zeros_like(x_arr)
    for k, coef in enumerate(kernel._coefficients(), start=1):
        acc = acc + coef * phi1_eval(x_arr / k, kernel.scale)
    val = acc / kernel.normaliser
    ax = np.abs(x_arr)
    val = np.where(ax <= 1.0, 1.0, np.where(ax > kernel.support_radius, 0.0, val))
    return val if val.ndim else float(val)


def kernel_moment(kernel: TruncationKernel, k: int, panels: int = 256, nodes: int = 16) -> float:
    """``int x^k phi(x) dx`` over the support by composite Gauss-Legendre."""
    if k < 0:
        raise ValueError("moment order must be >= 0")
    r = kernel.support_radius
    return composite_gauss_legendre(lambda u: u**k * kernel(u), -r, r, panels, nodes)


def moment_tolerance(kernel: TruncationKernel, k: int, rel: float = 1e-8) -> float:
    return rel * kernel.support_radius ** (k + 1)


def kernel_plot_data(kernel: TruncationKernel, n_points: int = 401) -> np.ndarray:
    """``(n_points, 2)`` array of ``(x, phi(x))`` uniformly spanning the support."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    r = kernel.support_radius
    xs = np.linspace(-r, r, n_points)
    return np.column_stack([xs, kernel(xs)])
