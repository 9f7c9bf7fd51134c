"""Monte Carlo harness: replicated simulate -> estimate runs and empirical diagnostics.

Every replication ``r`` draws its path from the stream ``(base_seed, r)``, so a
report depends only on the config, never on the number of workers. Statistics
are accumulated with Welford's recursion in replication order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .contrast import (
    ContrastProblem,
    DegenerateDataError,
    MinimizerConfig,
    estimate_generic,
    estimate_linear_closed_form,
    weight,
)
from .kernels import TruncationKernel
from .model import JumpLaw, ModelSpec, ParameterBox, linear_ou
from .moments import FilterConfig, MomentApproximator
from .simulate import (
    SamplingGrid,
    SimulationError,
    make_irregular_grid,
    make_rng,
    make_uniform_grid,
    simulate_one_step,
    simulate_path,
)

FAILURE_LIMIT = 0.10
ESTIMATORS = ("closed-form", "generic")
GRID_KINDS = ("uniform", "irregular")

# fields a paired comparison may vary; anything else changes the simulated paths
ESTIMATION_FIELDS = frozenset({
    "beta", "c", "k_trunc", "kernel_level", "kernel_d", "variant", "estimator", "free_slope", "box", "label",
})


class ExperimentAborted(RuntimeError):
    """More than ``FAILURE_LIMIT`` of the replications failed."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment on the linear OU family with Gaussian jumps."""

    theta1: float = -1.0
    theta2: float = 2.0
    sigma: float = 0.5
    gamma: float = 1.0
    lam: float = 0.0
    mu_j: float = 0.0
    sigma_j: float = 1.0
    T: float = 1000.0
    n: int = 10_000
    grid: str = "uniform"
    grid_ratio: float = 1.0
    x0: float = 0.0
    beta: float = 0.49
    c: float = 2.0
    k_trunc: float = math.inf  # the OU experiments use no state cut-off
    kernel_level: int = 0
    kernel_d: float | None = None
    variant: str = "exact-ou"
    replications: int = 200
    base_seed: int = 0
    estimator: str = "closed-form"
    free_slope: bool = True
    box: tuple[float, float, float, float] = (-10.0, 10.0, 0.01, 5.0)
    label: str = ""

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.grid not in GRID_KINDS:
            raise ValueError(f"grid must be one of {GRID_KINDS}, got {self.grid!r}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.estimator == "generic" and self.free_slope:
            raise ValueError("the generic estimator fits (theta2, sigma) only; set free_slope=False")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        object.__setattr__(self, "box", tuple(float(b) for b in self.box))
        # building every sub-object runs its own validation
        self.build_model()
        self.build_grid()
        self.build_filter()
        self.build_approximator().validate(self.build_model())
        self.build_box()

    def build_model(self) -> ModelSpec:
        return linear_ou(self.theta1, self.gamma, JumpLaw(self.lam, self.mu_j, self.sigma_j))

    def build_grid(self) -> SamplingGrid:
        if self.grid == "uniform":
            return make_uniform_grid(self.T, self.n)
        return make_irregular_grid(self.T, self.n, self.grid_ratio, self.base_seed)

    def build_filter(self) -> FilterConfig:
        return FilterConfig(self.beta, self.c, self.k_trunc)

    def build_kernel(self) -> TruncationKernel:
        return TruncationKernel(self.kernel_level, self.kernel_d)

    def build_approximator(self) -> MomentApproximator:
        return MomentApproximator(self.variant, self.build_kernel())

    def build_box(self) -> ParameterBox:
        return ParameterBox(*self.box)

    @property
    def param_names(self) -> tuple[str, ...]:
        names = ("theta2", "sigma", "sigma2")
        return ("theta1",) + names if self.free_slope else names

    @property
    def true_values(self) -> dict[str, float]:
        return {"theta1": self.theta1, "theta2": self.theta2, "sigma": self.sigma, "sigma2": self.sigma**2}

    def display_label(self) -> str:
        if self.label:
            return self.label
        return f"{self.variant}/{self.build_kernel().label()}"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["box"] = list(self.box)
        return d


class Welford:
    """Streaming mean and (sample) variance of vectors."""

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    def push(self, v) -> None:
        v = np.asarray(v, dtype=float)
        self.count += 1
        delta = v - self.mean
        self.mean = self.mean + delta / self.count
        self._m2 = self._m2 + delta * (v - self.mean)

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean)
        return self._m2 / (self.count - 1)


@dataclass
class MCReport:
    """Aggregated replication statistics; ``M`` counts successful replications only."""

    config: ExperimentConfig
    params: tuple[str, ...]
    true_values: dict[str, float]
    mean: dict[str, float]
    std: dict[str, float]
    bias: dict[str, float]
    se_mean: dict[str, float]
    M: int
    failures: int
    wall_time: float
    std_defined: bool
    estimates: np.ndarray = field(repr=False)
    replication_ids: np.ndarray = field(repr=False)

    @property
    def label(self) -> str:
        return self.config.display_label()

    def rows(self) -> list[dict]:
        return [
            {
                "variant": self.label, "param": p, "true_value": self.true_values[p], "mean": self.mean[p],
                "std": self.std[p], "bias": self.bias[p], "se_mean": self.se_mean[p], "M": self.M,
                "failures": self.failures,
            }
            for p in self.params
        ]

    def column(self, param: str) -> np.ndarray:
        return self.estimates[:, self.params.index(param)]

    def summary(self) -> dict:
        return {
            "label": self.label, "M": self.M, "failures": self.failures, "wall_time": self.wall_time,
            "std_defined": self.std_defined, "config": self.config.to_dict(),
            "stats": {p: {"mean": self.mean[p], "std": self.std[p], "bias": self.bias[p], "se_mean": self.se_mean[p]}
                      for p in self.params},
        }


@dataclass(frozen=True)
class _Job:
    """Picklable unit of work: one replication, possibly several estimators on the same path."""

    path_config: ExperimentConfig
    estimators: tuple[ExperimentConfig, ...]
    index: int


def _estimate_once(cfg: ExperimentConfig, path) -> np.ndarray | None:
    """Estimates in ``cfg.param_names`` order, or ``None`` for a failed replication."""
    try:
        problem = ContrastProblem(path, cfg.build_model(), cfg.build_approximator(), cfg.build_filter(),
                                  cfg.build_box())
        if cfg.estimator == "closed-form":
            res = estimate_linear_closed_form(problem, free_slope=cfg.free_slope, with_covariance=False)
        else:
            res = estimate_generic(problem, MinimizerConfig(), with_covariance=False)
    except DegenerateDataError:
        return None
    if not res.converged:
        return None
    vals = {"theta1": res.theta1_hat, "theta2": res.mu_hat, "sigma": res.sigma_hat, "sigma2": res.sigma_hat**2}
    return np.array([vals[p] for p in cfg.param_names])


def _run_job(job: _Job) -> list[np.ndarray | None]:
    cfg = job.path_config
    try:
        path = simulate_path(cfg.build_model(), (cfg.theta2, cfg.sigma), cfg.x0, cfg.build_grid(),
                             seed=cfg.base_seed, stream=job.index)
    except SimulationError:
        return [None] * len(job.estimators)
    return [_estimate_once(e, path) for e in job.estimators]


def _map_jobs(jobs: list[_Job], workers: int) -> list[list[np.ndarray | None]]:
    if workers <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order, which keeps the reduction deterministic
        return list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _aggregate(cfg: ExperimentConfig, outcomes: list[np.ndarray | None], wall: float) -> MCReport:
    params = cfg.param_names
    acc = Welford(len(params))
    kept, ids = [], []
    for r, est in enumerate(outcomes):
        if est is None:
            continue
        acc.push(est)
        kept.append(est)
        ids.append(r)
    failures = len(outcomes) - acc.count
    if failures > FAILURE_LIMIT * len(outcomes):
        raise ExperimentAborted(
            f"{failures} of {len(outcomes)} replications failed for {cfg.display_label()}; check the configuration"
        )
    truth = cfg.true_values
    std = np.sqrt(acc.variance)
    se = std / math.sqrt(acc.count)
    return MCReport(
        config=cfg, params=params, true_values={p: truth[p] for p in params},
        mean={p: float(acc.mean[i]) for i, p in enumerate(params)},
        std={p: float(std[i]) for i, p in enumerate(params)},
        bias={p: float(acc.mean[i] - truth[p]) for i, p in enumerate(params)},
        se_mean={p: float(se[i]) for i, p in enumerate(params)},
        M=acc.count, failures=failures, wall_time=wall, std_defined=acc.count >= 2,
        estimates=np.array(kept).reshape(-1, len(params)), replication_ids=np.array(ids, dtype=int),
    )


def run_experiment(config: ExperimentConfig, workers: int = 1) -> MCReport:
    """Run ``config.replications`` independent replications and aggregate them."""
    t0 = time.perf_counter()
    jobs = [_Job(config, (config,), r) for r in range(config.replications)]
    outcomes = [o[0] for o in _map_jobs(jobs, workers)]
    return _aggregate(config, outcomes, time.perf_counter() - t0)


@dataclass
class PairedDifference:
    reference: str
    other: str
    param: str
    mean: float
    se: float
    n_pairs: int


@dataclass
class Comparison:
    reports: list[MCReport]
    differences: list[PairedDifference]

    def rows(self) -> list[dict]:
        return [row for rep in self.reports for row in rep.rows()]


def compare_estimators(config: ExperimentConfig, variants: list, workers: int = 1) -> Comparison:
    """Estimate every variant on the same simulated paths.

    ``variants`` holds approximator names or dicts of estimation-side
    overrides (filter, kernel, approximator, estimator). Differences are
    paired against the first variant over replications where both succeeded.
    """
    if len(variants) < 2:
        raise ValueError("compare_estimators needs at least two variants")
    cfgs = []
    for v in variants:
        changes = {"variant": v} if isinstance(v, str) else dict(v)
        bad = set(changes) - ESTIMATION_FIELDS
        if bad:
            raise ValueError(f"variant overrides may only touch estimation settings, got {sorted(bad)}")
        cfgs.append(config.replace(**changes))
    seen: dict[str, int] = {}
    for i, c in enumerate(cfgs):
        lab = c.display_label()
        if lab in seen:
            seen[lab] += 1
            cfgs[i] = c.replace(label=f"{lab}#{seen[lab]}")
        else:
            seen[lab] = 1

    t0 = time.perf_counter()
    jobs = [_Job(config, tuple(cfgs), r) for r in range(config.replications)]
    outcomes = _map_jobs(jobs, workers)
    wall = time.perf_counter() - t0
    reports = [_aggregate(c, [o[k] for o in outcomes], wall) for k, c in enumerate(cfgs)]

    ref = reports[0]
    diffs = []
    for rep in reports[1:]:
        common, ia, ib = np.intersect1d(ref.replication_ids, rep.replication_ids, return_indices=True)
        for p in ref.params:
            if p not in rep.params:
                continue
            d = rep.column(p)[ib] - ref.column(p)[ia]
            se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
            diffs.append(PairedDifference(ref.label, rep.label, p, float(d.mean()), se, int(common.size)))
    return Comparison(reports, diffs)


# --- output ------------------------------------------------------------------

CSV_COLUMNS = ("variant", "param", "true_value", "mean", "std", "bias", "se_mean", "M", "failures")


def reports_to_csv(reports: list[MCReport], path=None) -> str:
    """CSV text of all reports; also written to ``path`` when given."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        for row in rep.rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def format_table(reports: list[MCReport], digits: int = 4) -> str:
    """Aligned text table, one row per report, cells ``mean (std)``."""
    params: list[str] = []
    for rep in reports:
        params.extend(p for p in rep.params if p not in params)
    head = [""] + [f"{p}={reports[0].true_values.get(p, rep.true_values.get(p)):g}" for p in params]
    body = []
    for rep in reports:
        cells = [rep.label]
        for p in params:
            cells.append(f"{rep.mean[p]:.{digits}f} ({rep.std[p]:.{digits}f})" if p in rep.params else "-")
        body.append(cells)
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(r, widths)).rstrip() for r in [head] + body]
    return "\n".join(lines)


# --- diagnostics -------------------------------------------------------------

@dataclass
class ConditionalMomentReport:
    deltas: np.ndarray
    second_moments: np.ndarray
    coefficient: float
    slope: float
    target: float

    @property
    def ratio(self) -> float:
        return self.coefficient / self.target if self.target != 0 else float("nan")


def check_conditional_moment(model: ModelSpec, theta0, x: float, filt: FilterConfig, kernel: TruncationKernel,
                             deltas, M: int, approx: MomentApproximator | None = None, seed: int = 0
                             ) -> ConditionalMomentReport:
    """Monte Carlo check that the filtered second moment is ``D a(sigma0, x)^2 + o(D)``.

    For each ``D`` the mean of ``(X_D - m~)^2 phi(dX / (c D^beta))^2`` over
    ``M`` one-step draws is divided by ``D`` and regressed on ``D``; the
    intercept is the leading coefficient.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size < 2:
        raise ValueError("need at least two step sizes to fit a leading coefficient")
    if approx is None:
        approx = MomentApproximator("exact-ou" if model.is_linear_ou else "generator2", kernel)
    e = np.empty(deltas.size)
    for j, d in enumerate(deltas):
        rng = make_rng(seed, j)
        xs = simulate_one_step(model, theta0, x, d, M, rng)
        m, _ = approx.moments(model, theta0, np.array([x]), np.array([d]), filt)
        w = weight(xs - x, filt, d, kernel)
        e[j] = float(np.mean((xs - m[0]) ** 2 * w**2))
    slope, intercept = np.polyfit(deltas, e / deltas, 1)
    target = float(np.asarray(model.diffusion(theta0[1], x), dtype=float) ** 2)
    return ConditionalMomentReport(deltas, e, float(intercept), float(slope), target)


@dataclass
class FilterRateReport:
    false_positive_rate: float
    detection_rate: float
    n_clean: int
    n_big_jumps: int
    gaussian_tail: float


def check_filter_rate(model: ModelSpec, theta0, T: float, n: int, filt: FilterConfig, M: int,
                      kernel: TruncationKernel = TruncationKernel(), seed: int = 0, x0: float = 0.0
                      ) -> FilterRateReport:
    """Empirical filter error rates on simulated paths.

    False positives: share of jump-free intervals whose weight is below 1.
    Detection: share of intervals holding a jump larger than ``4 c D^beta``
    whose weight is exactly 0. ``gaussian_tail`` is ``P(|N(0, a^2 D)| > c D^beta)``
    at ``x0``, a reference value for the false-positive arm.
    """
    grid = make_uniform_grid(T, n)
    delta = grid.steps[0]
    thr = float(filt.threshold(delta))
    fp = clean = det = big = 0
    for r in range(M):
        path = simulate_path(model, theta0, x0, grid, seed=seed, stream=r)
        w = np.asarray(weight(path.increments, filt, grid.steps, kernel), dtype=float)
        hit = np.zeros(grid.n, dtype=bool)
        large = np.zeros(grid.n, dtype=bool)
        if path.jump_times.size:
            idx = np.clip(np.searchsorted(grid.times, path.jump_times, side="left") - 1, 0, grid.n - 1)
            hit[idx] = True
            size = np.abs(np.asarray(model.jump_coef(path.values[idx]), dtype=float) * path.jump_sizes)
            large[idx[size > 4 * thr]] = True
        clean += int((~hit).sum())
        fp += int(((w < 1.0) & ~hit).sum())
        big += int(large.sum())
        det += int(((w == 0.0) & large).sum())
    a = float(np.asarray(model.diffusion(theta0[1], x0), dtype=float))
    tail = 0.0 if np.isinf(filt.c) or a == 0 else float(2 * stats.norm.sf(thr / (a * math.sqrt(delta))))
    return FilterRateReport(
        false_positive_rate=fp / clean if clean else 0.0,
        detection_rate=det / big if big else float("nan"),
        n_clean=clean, n_big_jumps=big, gaussian_tail=tail,
    )
