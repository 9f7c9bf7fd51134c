"""Jump-filtered Gaussian quasi-likelihood contrast and its minimisers.

For observations ``X_0..X_n`` the contrast is

    U(mu, sigma) = sum_i [ (X_{i+1} - m~_i)^2 / m2~_i + log(m2~_i / D_i) ] * w_i * 1{|X_i| <= D_i^-k}

with ``w_i = phi(dX_i / (c D_i^beta))``. Two estimators are provided: a
box-constrained multi-start Nelder-Mead on ``(mu, sigma)`` for any model,
and closed-form stationary points for the linear OU family.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .kernels import TruncationKernel
from .model import ModelSpec, ParameterBox
from .moments import FilterConfig, MomentApproximator
from .simulate import PathSample

SIGMA2_FLOOR = 1e-12


class DegenerateDataError(ValueError):
    """No increment contributes to the contrast, or a closed form has a zero denominator."""


def weight(increment, filt: FilterConfig, delta, kernel: TruncationKernel):
    """``phi(increment / (c * delta^beta))``; ``c = inf`` gives weight 1."""
    inc = np.asarray(increment, dtype=float)
    if np.isinf(filt.c):
        out = np.ones_like(inc)
        return out if out.ndim else float(out)
    return kernel(inc / filt.threshold(delta))


@dataclass
class ContrastProblem:
    data: PathSample
    model: ModelSpec
    approx: MomentApproximator
    filter: FilterConfig
    box: ParameterBox
    step_ratio_bound: float | None = None

    def __post_init__(self):
        self.approx.validate(self.model)
        if self.step_ratio_bound is not None and not self.data.grid.satisfies_step_condition(self.step_ratio_bound):
            raise ValueError(f"grid step ratio {self.data.grid.step_ratio:.3g} exceeds {self.step_ratio_bound}")
        x = self.data.values
        self.x = x[:-1]
        self.y = x[1:]
        self.delta = self.data.grid.steps
        self.weights = np.asarray(weight(self.y - self.x, self.filter, self.delta, self.approx.kernel), dtype=float)
        if np.isinf(self.filter.k_trunc):
            self.state_ok = np.ones(self.x.shape, dtype=bool)
        else:
            self.state_ok = np.abs(self.x) <= self.delta ** (-self.filter.k_trunc)
        self.active = self.state_ok & (self.weights != 0)
        if not self.active.any():
            raise DegenerateDataError("every increment has zero weight; nothing to estimate from")

    @property
    def n_filtered(self) -> int:
        return int(np.sum(self.weights < 1))

    @property
    def n_state_truncated(self) -> int:
        return int(np.sum(~self.state_ok))

    def terms(self, mu: float, sigma: float, model: ModelSpec | None = None):
        """Per-interval bracket ``(y - m~)^2/m2~ + log(m2~/D)`` over active intervals (``inf`` if m2~ <= 0)."""
        model = self.model if model is None else model
        a = self.active
        m, m2 = self.approx.moments(model, (mu, sigma), self.x[a], self.delta[a], self.filter)
        m2 = np.asarray(m2, dtype=float)
        if np.any(~(m2 > 0)):
            return None
        r = self.y[a] - m
        return r * r / m2 + np.log(m2 / self.delta[a])


def evaluate_contrast(problem: ContrastProblem, mu: float, sigma: float, model: ModelSpec | None = None,
                      check_box: bool = True) -> float:
    """Contrast value at ``(mu, sigma)``; ``inf`` when some contributing ``m2~ <= 0``."""
    if check_box and not problem.box.contains(mu, sigma):
        raise ValueError(f"(mu, sigma) = ({mu}, {sigma}) lies outside the parameter box")
    t = problem.terms(mu, sigma, model)
    if t is None:
        return float("inf")
    return float(np.dot(t, problem.weights[problem.active]))


@dataclass
class EstimationResult:
    mu_hat: float
    sigma_hat: float
    contrast_value: float
    n_filtered: int
    n_state_truncated: int
    iterations: int
    converged: bool
    K_hat: np.ndarray | None = None
    theta1_hat: float | None = None
    seed: int | None = None
    method: str = ""

    def to_record(self) -> dict:
        rec = {
            "mu_hat": self.mu_hat,
            "sigma_hat": self.sigma_hat,
            "contrast": self.contrast_value,
            "n_filtered": self.n_filtered,
            "n_state_truncated": self.n_state_truncated,
            "K_hat": None if self.K_hat is None else np.asarray(self.K_hat).tolist(),
            "converged": self.converged,
            "seed": self.seed,
        }
        if self.theta1_hat is not None:
            rec["theta1_hat"] = self.theta1_hat
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2)


@dataclass(frozen=True)
class MinimizerConfig:
    starts_per_axis: int = 3
    max_iter: int = 500
    xtol: float = 1e-8  # simplex size, relative to the box width


def minimize_box(fun, box: ParameterBox, config: MinimizerConfig = MinimizerConfig()):
    """Multi-start Nelder-Mead of ``fun(mu, sigma)`` over ``box``.

    Work happens in unit-square coordinates so the stopping rule is relative
    to the box. Only the simplex size is used to stop (``fatol = inf``).
    Returns ``(x_best, f_best, iterations, converged)``.
    """
    lo, hi = box.lower, box.upper
    width = hi - lo

    def f_unit(u):
        u = np.clip(u, 0.0, 1.0)
        p = lo + u * width
        v = fun(float(p[0]), float(p[1]))
        return v if np.isfinite(v) else 1e300

    k = config.starts_per_axis
    fracs = [0.5] if k == 1 else np.linspace(0.2, 0.8, k)
    best = None
    for u0 in fracs:
        for u1 in fracs:
            res = optimize.minimize(
                f_unit, np.array([u0, u1]), method="Nelder-Mead",
                bounds=[(0.0, 1.0), (0.0, 1.0)],
                options={"xatol": config.xtol, "fatol": np.inf, "maxiter": config.max_iter, "adaptive": False},
            )
            conv = bool(res.success)
            if best is None or res.fun < best[1]:
                best = (np.clip(res.x, 0.0, 1.0), float(res.fun), int(res.nit), conv)
    u, f, it, conv = best
    return lo + u * width, f, it, conv


def estimate_generic(problem: ContrastProblem, config: MinimizerConfig = MinimizerConfig(),
                     with_covariance: bool = True) -> EstimationResult:
    """``argmin`` of the contrast over the box by multi-start Nelder-Mead."""
    x, f, it, conv = minimize_box(lambda m, s: evaluate_contrast(problem, m, s, check_box=False), problem.box, config)
    res = EstimationResult(
        mu_hat=float(x[0]), sigma_hat=float(x[1]), contrast_value=float(f),
        n_filtered=problem.n_filtered, n_state_truncated=problem.n_state_truncated,
        iterations=it, converged=conv and np.isfinite(f), seed=problem.data.seed, method="generic",
    )
    if with_covariance and res.converged:
        res.K_hat = estimate_asymptotic_covariance(problem, res)
    return res


# --- closed forms for the linear OU family ---------------------------------

def _wsum(v, w):
    return float(np.dot(v, w))


def theta1_update(problem: ContrastProblem, theta2: float, j1=None) -> float:
    """Drift-slope stationarity given the intercept (Euler / second-order forms)."""
    x, dx, d, w = _linear_data(problem)
    j1 = np.zeros_like(d) if j1 is None else j1
    jm = _jump_mean(problem)
    den = _wsum(d * x * x, w)
    if den == 0:
        raise DegenerateDataError("sum of D X^2 phi vanishes")
    return _wsum((dx - d * theta2 + d * jm - j1) * x, w) / den


def theta2_update(problem: ContrastProblem, theta1: float, j1=None) -> float:
    """Intercept stationarity given the slope: Euler regression minus the ``J1`` correction."""
    x, dx, d, w = _linear_data(problem)
    j1 = np.zeros_like(d) if j1 is None else j1
    den = _wsum(d, w)
    if den == 0:
        raise DegenerateDataError("sum of D phi vanishes")
    return _wsum(dx - d * theta1 * x, w) / den + _jump_mean(problem) - _wsum(j1, w) / den


def sigma2_update(problem: ContrastProblem, theta1: float, theta2: float, j1=None, j2=None) -> float:
    """Volatility stationarity: weighted squared residuals minus the ``J2`` correction."""
    x, dx, d, w = _linear_data(problem)
    j1 = np.zeros_like(d) if j1 is None else j1
    j2 = np.zeros_like(d) if j2 is None else j2
    resid = dx - d * (theta1 * x + theta2 - _jump_mean(problem)) - j1
    den = _wsum(d * d, w)
    if den == 0:
        raise DegenerateDataError("sum of D^2 phi vanishes")
    return _wsum(resid * resid * d, w) / den - _wsum(d * j2, w) / den


def _linear_data(problem: ContrastProblem):
    a = problem.active
    x = problem.x[a]
    return x, problem.y[a] - x, problem.delta[a], problem.weights[a]


def _jump_mean(problem: ContrastProblem) -> float:
    return problem.model.gamma_const * problem.model.jumps.first_moment()


def estimate_linear_closed_form(problem: ContrastProblem, free_slope: bool = True,
                                with_covariance: bool = True) -> EstimationResult:
    """Stationary point of the contrast for the linear OU family.

    ``free_slope`` also estimates theta1; otherwise it stays at
    ``model.ou_slope``. ``mu_hat`` is the intercept theta2.

    * ``euler`` / ``second-order``: the slope and intercept conditions form a
      2x2 linear system solved directly (it is the fixed point of the
      alternating updates), then ``sigma2_update``.
    * ``exact-ou``: weighted AR(1) regression mapped back through
      ``alpha = exp(theta1 D)``; this is the exact argmin.
    """
    model = problem.model
    if not model.is_linear_ou:
        raise ValueError("closed form requires the linear OU family")
    variant = problem.approx.variant
    if variant in ("euler", "second-order"):
        theta1, theta2, sigma2 = _closed_form_euler(problem, free_slope)
    elif variant == "exact-ou":
        theta1, theta2, sigma2 = _closed_form_exact(problem, free_slope)
    else:
        raise ValueError(f"no closed form for approximator {variant!r}")

    sigma = float(np.sqrt(max(sigma2, SIGMA2_FLOOR)))
    inside = problem.box.contains(theta2, sigma) and theta1 < 0
    mu_c, sig_c = problem.box.clip(theta2, sigma)
    fitted = model.with_slope(theta1)
    try:
        value = evaluate_contrast(problem, mu_c, sig_c, model=fitted, check_box=False)
    except ValueError:
        value = float("inf")
    res = EstimationResult(
        mu_hat=float(mu_c), sigma_hat=float(sig_c), contrast_value=value,
        n_filtered=problem.n_filtered, n_state_truncated=problem.n_state_truncated,
        iterations=1, converged=bool(inside and np.isfinite(value)),
        theta1_hat=float(theta1), seed=problem.data.seed, method=f"closed-form/{variant}",
    )
    if with_covariance and res.converged:
        res.K_hat = estimate_asymptotic_covariance(problem, res, model=fitted)
    return res


def _closed_form_euler(problem: ContrastProblem, free_slope: bool):
    x, dx, d, w = _linear_data(problem)
    j1, j2 = problem.approx.jump_corrections(problem.model, d, problem.filter)
    if not free_slope:
        theta1 = problem.model.ou_slope
        theta2 = theta2_update(problem, theta1, j1)
    else:
        jm = _jump_mean(problem)
        # theta1 * S_xx + theta2 * S_x = R_x ;  theta1 * S_x + theta2 * S_1 = R_1
        s_xx, s_x, s_1 = _wsum(d * x * x, w), _wsum(d * x, w), _wsum(d, w)
        base = dx + d * jm - j1
        r_x, r_1 = _wsum(base * x, w), _wsum(base, w)
        det = s_xx * s_1 - s_x * s_x
        if s_xx == 0 or s_1 == 0 or det == 0:
            raise DegenerateDataError("singular normal equations for (theta1, theta2)")
        theta1 = (r_x * s_1 - r_1 * s_x) / det
        theta2 = (s_xx * r_1 - s_x * r_x) / det
    sigma2 = sigma2_update(problem, theta1, theta2, j1, j2)
    return theta1, theta2, sigma2


def _closed_form_exact(problem: ContrastProblem, free_slope: bool):
    x, dx, d, w = _linear_data(problem)
    y = x + dx
    jm = _jump_mean(problem)
    if free_slope:
        if not np.allclose(d, d[0], rtol=1e-9, atol=0):
            raise ValueError("free-slope exact-ou closed form needs a uniform grid; use estimate_generic")
        delta = float(d[0])
        sw, sx, sy = w.sum(), _wsum(x, w), _wsum(y, w)
        sxx, sxy = _wsum(x * x, w), _wsum(x * y, w)
        det = sw * sxx - sx * sx
        if sw == 0 or det == 0:
            raise DegenerateDataError("singular weighted AR(1) normal equations")
        alpha = (sw * sxy - sx * sy) / det
        kappa = (sy - alpha * sx) / sw
        if not alpha > 0:
            raise DegenerateDataError(f"fitted AR(1) coefficient {alpha:.4g} is not positive")
        theta1 = float(np.log(alpha) / delta)
        if theta1 == 0:
            raise DegenerateDataError("fitted mean-reversion slope is exactly zero")
        lin = np.expm1(theta1 * delta) / theta1
        theta2 = kappa / lin + jm
        r = y - alpha * x - kappa
        v = _wsum(r * r, w) / sw
        q = np.expm1(2 * theta1 * delta) / (2 * theta1)
        return theta1, theta2, v / q
    theta1 = problem.model.ou_slope
    alpha = np.exp(theta1 * d)
    lin = np.expm1(theta1 * d) / theta1
    q = np.expm1(2 * theta1 * d) / (2 * theta1)
    z = y - alpha * x
    den = _wsum(lin * lin / q, w)
    if den == 0:
        raise DegenerateDataError("zero weighted information for the intercept")
    eta = _wsum(z * lin / q, w) / den
    r = z - eta * lin
    sigma2 = _wsum(r * r / q, w) / w.sum()
    return theta1, eta + jm, sigma2


def estimate_asymptotic_covariance(problem: ContrastProblem, result: EstimationResult,
                                   model: ModelSpec | None = None) -> np.ndarray:
    """Plug-in asymptotic covariance from ergodic averages over the observed states.

    ``K11 = [mean (d_mu b / a)^2]^-1`` (rate sqrt(T)) and
    ``K22 = [2 mean (d_sigma a / a)^2]^-1`` (rate sqrt(n)).
    """
    model = problem.model if model is None else model
    xs = problem.x
    mu, sigma = result.mu_hat, result.sigma_hat
    a = np.asarray(model.diffusion(sigma, xs), dtype=float)
    i_mu = float(np.mean((np.asarray(model.drift_mu(mu, xs), dtype=float) / a) ** 2))
    i_sigma = float(np.mean((np.asarray(model.diffusion_sigma(sigma, xs), dtype=float) / a) ** 2))
    if not i_mu > 0:
        raise ValueError("drift parameter is not identifiable: mean (d_mu b / a)^2 vanishes")
    if not i_sigma > 0:
        raise ValueError("volatility parameter is not identifiable: mean (d_sigma a / a)^2 vanishes")
    return np.array([[1.0 / i_mu, 0.0], [0.0, 1.0 / (2.0 * i_sigma)]])
