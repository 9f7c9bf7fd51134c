"""Sample paths of the jump-diffusion on a (possibly irregular) grid.

Linear OU models are simulated exactly: between events the Gaussian OU
transition is used and each jump ``gamma * z`` decays with ``exp(theta1 * age)``.
Other models use Euler-Maruyama with ``substeps`` internal steps per grid
interval; jumps are inserted at their exact epochs and the compensator
``gamma(x) * lam * mu_j`` is subtracted from the drift, so the simulated
process is the compensated-measure SDE.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, signal

from .model import ModelSpec

EXPLOSION_BOUND = 1e12


class SimulationError(RuntimeError):
    """The path left the explosion guard; the model is not ergodic at this theta."""


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    """Counter-based generator; ``stream`` selects an independent sub-stream."""
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF] if stream is None else [int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class SamplingGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a grid needs at least two times")
        if t[0] != 0.0:
            raise ValueError("grids start at t0 = 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def n(self) -> int:
        return self.times.size - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def delta_max(self) -> float:
        return float(self.steps.max())

    @property
    def delta_min(self) -> float:
        return float(self.steps.min())

    @property
    def step_ratio(self) -> float:
        return self.delta_max / self.delta_min

    @property
    def is_uniform(self) -> bool:
        s = self.steps
        return bool(np.allclose(s, s[0], rtol=1e-9, atol=0.0))

    def satisfies_step_condition(self, c1: float, c2: float = 0.0) -> bool:
        return c2 <= self.step_ratio <= c1 * (1 + 1e-12)


def make_uniform_grid(T: float, n: int) -> SamplingGrid:
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if int(n) != n or n < 1:
        raise ValueError(f"number of steps must be a positive integer, got {n}")
    n = int(n)
    times = np.arange(n + 1) * (T / n)
    times[-1] = T
    return SamplingGrid(times)


def make_irregular_grid(T: float, n: int, ratio: float, seed: int) -> SamplingGrid:
    """Random steps in ``[T/n / sqrt(ratio), T/n * sqrt(ratio)]`` summing exactly to ``T``.

    The raw uniform draws are shifted by a common constant and clipped back
    into the admissible interval, the shift being chosen by root finding so
    the steps add up to ``T``.
    """
    if ratio < 1:
        raise ValueError(f"step ratio must be >= 1, got {ratio}")
    if not T > 0 or int(n) != n or n < 1:
        raise ValueError("need T > 0 and a positive integer n")
    n = int(n)
    mean = T / n
    lo, hi = mean / math.sqrt(ratio), mean * math.sqrt(ratio)
    if ratio == 1:
        return make_uniform_grid(T, n)
    raw = make_rng(seed).uniform(lo, hi, n)

    def excess(shift):
        return np.clip(raw + shift, lo, hi).sum() - T

    shift = optimize.brentq(excess, lo - hi, hi - lo, xtol=1e-15 * T)
    steps = np.clip(raw + shift, lo, hi)
    times = np.concatenate([[0.0], np.cumsum(steps)])
    times[-1] = T
    return SamplingGrid(times)


@dataclass
class PathSample:
    grid: SamplingGrid
    values: np.ndarray
    jump_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.empty(0))
    seed: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.times.shape:
            raise ValueError("values and grid times must have equal length")

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def to_csv(self, path: str | Path, jumps_path: str | Path | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x"])
            for t, x in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(x))])
        if jumps_path is not None:
            with open(jumps_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["jump_time", "jump_size"])
                for t, z in zip(self.jump_times, self.jump_sizes):
                    w.writerow([repr(float(t)), repr(float(z))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "PathSample":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if len(rows) < 2:
            raise ValueError(f"{path}: need at least two observations")
        t = np.array([float(r["t"]) for r in rows])
        x = np.array([float(r["x"]) for r in rows])
        return cls(SamplingGrid(t), x)


def draw_jumps(model: ModelSpec, T: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Compound-Poisson epochs on ``[0, T]`` from exponential inter-arrival times, plus F0 sizes."""
    lam = model.jumps.lam
    if lam == 0:
        return np.empty(0), np.empty(0)
    chunk = max(16, int(lam * T * 1.2) + 16)
    epochs = []
    t = 0.0
    while True:
        gaps = rng.exponential(1.0 / lam, chunk)
        arr = t + np.cumsum(gaps)
        keep = arr[arr <= T]
        epochs.append(keep)
        if keep.size < arr.size:
            break
        t = arr[-1]
    times = np.concatenate(epochs)
    sizes = model.jumps.sample_sizes(rng, times.size)
    return times, sizes


def _ou_coefficients(theta1: float, h):
    """``exp(theta1 h)``, ``(exp(theta1 h) - 1)/theta1`` and ``(exp(2 theta1 h) - 1)/(2 theta1)``."""
    h = np.asarray(h, dtype=float)
    alpha = np.exp(theta1 * h)
    if theta1 == 0.0:
        return alpha, h.copy(), h.copy()
    return alpha, np.expm1(theta1 * h) / theta1, np.expm1(2.0 * theta1 * h) / (2.0 * theta1)


def _linear_recursion(alpha, innov, x0: float) -> np.ndarray:
    """``x[i+1] = alpha[i] * x[i] + innov[i]``; ``alpha`` may be a scalar."""
    if np.ndim(alpha) == 0:
        out = signal.lfilter([1.0], [1.0, -float(alpha)], innov, zi=[float(alpha) * x0])[0]
        return np.concatenate([[x0], out])
    x = np.empty(innov.size + 1)
    x[0] = cur = x0
    a = alpha.tolist()
    e = innov.tolist()
    for i in range(len(e)):
        cur = a[i] * cur + e[i]
        x[i + 1] = cur
    return x


def ou_path(theta1: float, drift_const: float, sigma: float, times: np.ndarray, x0: float,
            normals: np.ndarray, jump_times=(), jump_effects=()) -> np.ndarray:
    """Exact OU path on ``times`` from standard normal innovations.

    ``drift_const`` is the constant part of the (compensated) drift, so the
    continuous dynamics are ``dX = (theta1 X + drift_const) dt + sigma dW``.
    ``jump_effects`` are the raw jump displacements ``gamma * z``.
    """
    steps = np.diff(times)
    alpha, lin, var = _ou_coefficients(theta1, steps)
    innov = drift_const * lin + sigma * np.sqrt(var) * normals
    jump_times = np.asarray(jump_times, dtype=float)
    if jump_times.size:
        idx = np.searchsorted(times, jump_times, side="left")  # jump in (t_{idx-1}, t_idx]
        idx = np.clip(idx, 1, times.size - 1)
        contrib = np.asarray(jump_effects, dtype=float) * np.exp(theta1 * (times[idx] - jump_times))
        np.add.at(innov, idx - 1, contrib)
    uniform = np.allclose(steps, steps[0], rtol=1e-9, atol=0.0)
    return _linear_recursion(float(alpha[0]) if uniform else alpha, innov, float(x0))


def simulate_path(model: ModelSpec, theta0: tuple[float, float], x0: float, grid: SamplingGrid,
                  substeps: int = 10, seed: int = 0, stream: int | None = None) -> PathSample:
    """Simulate ``X`` at the grid times under ``theta0 = (mu, sigma)``.

    The jump stream and the diffusion stream are independent children of
    ``(seed, stream)``: switching jumps on or off leaves the Brownian draws
    unchanged, which the bookkeeping tests rely on.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    mu, sigma = theta0
    root = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF] + ([] if stream is None else [int(stream)]))
    jump_ss, diff_ss = root.spawn(2)
    jump_rng = np.random.Generator(np.random.Philox(jump_ss))
    diff_rng = np.random.Generator(np.random.Philox(diff_ss))
    times = grid.times
    jt, jz = draw_jumps(model, grid.horizon, jump_rng)

    if model.is_linear_ou:
        gamma = model.gamma_const
        drift_const = mu - gamma * model.jumps.first_moment()
        normals = diff_rng.standard_normal(grid.n)
        values = ou_path(model.ou_slope, drift_const, sigma, times, x0, normals, jt, gamma * jz)
    else:
        values = _euler_path(model, mu, sigma, times, x0, substeps, jt, jz, diff_rng, jump_rng)

    if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > EXPLOSION_BOUND:
        raise SimulationError(f"path exceeded |X| > {EXPLOSION_BOUND:g}")
    return PathSample(grid, values, jt, jz, seed)


def _euler_path(model, mu, sigma, times, x0, substeps, jt, jz, diff_rng, jump_rng):
    m1 = model.jumps.first_moment()

    def drift(x):
        return float(model.drift(mu, x)) - float(model.jump_coef(x)) * m1

    def vol(x):
        return float(model.diffusion(sigma, x))

    # a jump splitting a substep needs one extra normal for the Brownian bridge
    bridge = jump_rng.standard_normal(jt.size).tolist()
    jt_l, jz_l = jt.tolist(), jz.tolist()
    dw_all = diff_rng.standard_normal((times.size - 1, substeps))
    out = np.empty(times.size)
    out[0] = x = float(x0)
    j = 0
    for i in range(times.size - 1):
        t0, h = times[i], (times[i + 1] - times[i]) / substeps
        for s in range(substeps):
            a, b = t0 + s * h, t0 + (s + 1) * h
            dw = dw_all[i, s] * math.sqrt(h)
            cur, w_used = a, 0.0
            while j < len(jt_l) and jt_l[j] <= b:
                tau = jt_l[j]
                frac = (tau - a) / h
                w_tau = frac * dw + math.sqrt(max(frac * (1 - frac) * h, 0.0)) * bridge[j]
                x += drift(x) * (tau - cur) + vol(x) * (w_tau - w_used)
                x += float(model.jump_coef(x)) * jz_l[j]
                cur, w_used = tau, w_tau
                j += 1
            x += drift(x) * (b - cur) + vol(x) * (dw - w_used)
            if not abs(x) <= EXPLOSION_BOUND:
                raise SimulationError(f"path exceeded |X| > {EXPLOSION_BOUND:g} at t={b:.6g}")
        out[i + 1] = x
    return out


def simulate_one_step(model: ModelSpec, theta0: tuple[float, float], x: float, delta: float, size: int,
                      rng: np.random.Generator, substeps: int = 50) -> np.ndarray:
    """``size`` independent draws of ``X_delta`` started at ``X_0 = x`` (vectorised)."""
    mu, sigma = theta0
    lam = model.jumps.lam
    counts = rng.poisson(lam * delta, size) if lam > 0 else np.zeros(size, dtype=int)
    if model.is_linear_ou:
        t1 = model.ou_slope
        alpha, lin, var = _ou_coefficients(t1, delta)
        drift_const = mu - model.gamma_const * model.jumps.first_moment()
        out = alpha * x + drift_const * lin + sigma * np.sqrt(var) * rng.standard_normal(size)
        total = counts.sum()
        if total:
            owner = np.repeat(np.arange(size), counts)
            ages = rng.uniform(0.0, delta, total)
            z = model.jumps.sample_sizes(rng, total)
            np.add.at(out, owner, model.gamma_const * z * np.exp(t1 * ages))
        return out
    # vectorised Euler across replications; jumps land at substep ends
    h = delta / substeps
    m1 = model.jumps.first_moment()
    xs = np.full(size, float(x))
    slot = rng.integers(0, substeps, counts.sum())
    owner = np.repeat(np.arange(size), counts)
    z = model.jumps.sample_sizes(rng, counts.sum())
    for s in range(substeps):
        dw = rng.standard_normal(size) * math.sqrt(h)
        xs = xs + (model.drift(mu, xs) - model.jump_coef(xs) * m1) * h + model.diffusion(sigma, xs) * dw
        hit = slot == s
        if hit.any():
            np.add.at(xs, owner[hit], model.jump_coef(xs[owner[hit]]) * z[hit])
    return xs
