"""Monte Carlo ensembles, error metrics and convergence studies."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SimulationOverflowError
from .geometry import PointCloud
from .problems import AnalyticSolution
from .sde import (
    Discretization,
    ProblemSpec,
    auto_dt,
    discretize,
    draw_increments,
    integrate,
    realization_rng,
    require_stable,
)
from .weights import WeightSpec

log = logging.getLogger(__name__)

# Realizations are reduced in fixed-size blocks taken in index order, so the
# floating-point result does not depend on the number of worker threads.
BLOCK_SIZE = 50

REPORT_COLUMNS = ("problem", "N", "M", "weight", "n", "rho", "mu", "dt", "Nt", "R", "seed",
                  "l2_error", "linf_error")


def thread_count(requested: int | None = None) -> int:
    """Worker count: ``requested`` (default 1), capped by GFDM_THREADS when set."""
    n = requested if requested is not None else 1
    env = os.environ.get("GFDM_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise InvalidArgumentError(f"GFDM_THREADS must be an integer, got {env!r}") from None
        n = min(n, cap) if requested is not None else cap
    return max(1, int(n))


@dataclass(frozen=True)
class EnsembleConfig:
    realizations: int = 1000
    seed: int = 0
    snapshots: tuple = ()
    noise: str = "scalar"
    workers: int | None = None
    force: bool = False

    def __post_init__(self):
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise InvalidArgumentError("realizations must be a positive integer")


@dataclass(frozen=True, eq=False)
class MeanField:
    """Ensemble mean per step (row k is t_k = k*dt) and node."""

    times: np.ndarray
    mean: np.ndarray
    realizations: int
    # Monte Carlo estimate of E||u^k||_inf^2 and its standard error
    supnorm2: np.ndarray | None = None
    supnorm2_se: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def at(self, t: float) -> np.ndarray:
        k = int(round(t / (self.times[1] - self.times[0]))) if self.n_steps else 0
        return self.mean[k]


@dataclass(frozen=True)
class ErrorReport:
    problem: str
    N: int
    M: int
    weight: str
    n: float
    rho: float
    mu: float
    dt: float
    Nt: int
    R: int
    seed: int
    l2_error: float
    linf_error: float
    extra: dict = field(default_factory=dict, compare=False)

    def row(self) -> list[str]:
        vals = [getattr(self, c) for c in REPORT_COLUMNS]
        return [repr(v) if isinstance(v, float) else str(v) for v in vals]


def _run_block(disc, spec, ens, start, stop, n_steps):
    inc = np.stack([draw_increments(realization_rng(ens.seed, r), spec.dt, n_steps,
                                    disc.cloud.n, ens.noise) for r in range(start, stop)])
    total = np.empty((n_steps + 1, disc.cloud.n))
    sup2 = np.empty(n_steps + 1)
    sup4 = np.empty(n_steps + 1)

    def on_step(k, u):
        with np.errstate(over="ignore"):
            total[k] = u.sum(axis=0)
            s2 = np.max(np.abs(u), axis=1) ** 2
            sup2[k] = s2.sum()
            sup4[k] = (s2 * s2).sum()

    try:
        integrate(disc, spec, inc, on_step)
    except SimulationOverflowError as exc:
        r = start + (exc.realization or 0)
        raise SimulationOverflowError(
            f"realization {r} (master seed {ens.seed}) overflowed: {exc}",
            step=exc.step, report=exc.report, realization=r, seed=ens.seed) from exc
    return total, sup2, sup4


def run_ensemble(disc: Discretization, spec: ProblemSpec, ens: EnsembleConfig) -> MeanField:
    """Monte Carlo mean over ``ens.realizations`` independent sample paths.

    Realization r draws its increments from ``realization_rng(ens.seed, r)``.
    With ``mu == 0`` every path coincides, so one deterministic path is run.
    """
    require_stable(disc, spec, ens.force)
    n_steps = spec.n_steps
    times = np.arange(n_steps + 1) * spec.dt
    r_total = int(ens.realizations)

    if spec.mu == 0:
        hist = np.empty((n_steps + 1, disc.cloud.n))

        def record(k, u):
            hist[k] = u[0]

        integrate(disc, spec, np.zeros((1, n_steps)), record)
        sup2 = np.max(np.abs(hist), axis=1) ** 2
        return MeanField(times, hist, r_total, sup2, np.zeros_like(sup2))

    bounds = [(a, min(a + BLOCK_SIZE, r_total)) for a in range(0, r_total, BLOCK_SIZE)]
    workers = min(thread_count(ens.workers), len(bounds))

    def job(b):
        return _run_block(disc, spec, ens, b[0], b[1], n_steps)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]

    total, s2, s4 = parts[0]
    total, s2, s4 = total.copy(), s2.copy(), s4.copy()
    for t_, a_, b_ in parts[1:]:
        total += t_
        s2 += a_
        s4 += b_
    mean = total / r_total
    sup2 = s2 / r_total
    if r_total > 1:
        var = np.maximum(s4 / r_total - sup2**2, 0.0) * r_total / (r_total - 1)
        se = np.sqrt(var / r_total)
    else:
        se = np.full_like(sup2, np.nan)
    return MeanField(times, mean, r_total, sup2, se)


def _deviation(mean: MeanField, exact: AnalyticSolution, cloud: PointCloud) -> np.ndarray:
    if mean.n_steps < 1:
        raise InvalidArgumentError("mean field has no time steps")
    t = mean.times[1:, None]
    v = exact(cloud.coords[None, :, :], t)
    return v - mean.mean[1:]


def l2_error(mean: MeanField, exact: AnalyticSolution, cloud: PointCloud) -> float:
    """Root mean square deviation over all nodes and steps k = 1..Nt."""
    dev = _deviation(mean, exact, cloud)
    return float(np.sqrt(np.mean(dev**2)))


def linf_error(mean: MeanField, exact: AnalyticSolution, cloud: PointCloud,
               final_only: bool = False) -> float:
    """Maximum absolute deviation over all nodes and, unless ``final_only``, all steps."""
    dev = np.abs(_deviation(mean, exact, cloud))
    return float(dev[-1].max() if final_only else dev.max())


def solve_problem(exact: AnalyticSolution, cloud: PointCloud, mu: float, T: float = 1.0,
                  dt="auto", safety: float = 0.5, m: int | None = None,
                  weight: WeightSpec | None = None, ens: EnsembleConfig | None = None,
                  disc: Discretization | None = None):
    """Discretize, run the ensemble and score it. Returns (MeanField, ErrorReport, disc)."""
    ens = ens or EnsembleConfig()
    weight = weight or WeightSpec()
    if disc is None:
        disc = discretize(cloud, m, weight, workers=thread_count(ens.workers))
    if dt == "auto":
        dt = auto_dt(exact.rho, disc, T, safety)
    spec = exact.problem_spec(mu, T, float(dt))
    mean = run_ensemble(disc, spec, ens)
    report = ErrorReport(
        exact.problem, cloud.n, disc.star_size, weight.kind, float(weight.n), float(exact.rho),
        float(mu), float(spec.dt), spec.n_steps, int(ens.realizations), int(ens.seed),
        l2_error(mean, exact, cloud), linf_error(mean, exact, cloud),
        extra={"linf_final": linf_error(mean, exact, cloud, final_only=True),
               "max_theta_c": disc.max_theta_c})
    return mean, report, disc


def convergence_study(exact: AnalyticSolution, clouds, mu: float, T: float = 1.0, dt="auto",
                      safety: float = 0.5, m: int | None = None,
                      weight: WeightSpec | None = None,
                      ens: EnsembleConfig | None = None) -> list[ErrorReport]:
    """One ErrorReport per cloud at fixed physical parameters.

    ``dt`` is ``"auto"`` (stability rule per cloud), ``"common"`` (the
    smallest auto step over all clouds, shared so every level sees the same
    Brownian paths) or a number.
    """
    ens = ens or EnsembleConfig()
    weight = weight or WeightSpec()
    clouds = list(clouds)
    if not clouds:
        raise InvalidArgumentError("empty cloud sequence")
    workers = thread_count(ens.workers)
    discs = [discretize(c, m, weight, workers=workers) for c in clouds]
    if dt == "common":
        dt = min(auto_dt(exact.rho, d, T, safety) for d in discs)
    reports = []
    for cloud, disc in zip(clouds, discs):
        _, rep, _ = solve_problem(exact, cloud, mu, T, dt, safety, m, weight, ens, disc)
        log.info("N=%d dt=%.4g L2=%.4e Linf=%.4e", rep.N, rep.dt, rep.l2_error, rep.linf_error)
        reports.append(rep)
    return reports


def write_reports_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(REPORT_COLUMNS)
        for r in reports:
            out.writerow(r.row())


def format_reports(reports) -> str:
    head = f"{'N':>7} {'Nt':>7} {'dt':>11} {'L2-error':>11} {'Linf-error':>11}"
    lines = [head]
    for r in reports:
        lines.append(f"{r.N:>7d} {r.Nt:>7d} {r.dt:>11.4e} {r.l2_error:>11.4e} {r.linf_error:>11.4e}")
    return "\n".join(lines)


def write_mean_snapshots(mean: MeanField, cloud: PointCloud, times, outdir,
                         prefix: str = "mean") -> list[str]:
    """One CSV per requested time with columns (coords..., mean_u)."""
    os.makedirs(outdir, exist_ok=True)
    dt = mean.times[1] - mean.times[0] if mean.n_steps else 1.0
    names = ["x", "y", "z"][: cloud.dim]
    paths = []
    for t in times:
        k = int(round(float(t) / dt))
        if not 0 <= k <= mean.n_steps:
            raise InvalidArgumentError(f"snapshot time {t} outside the run")
        path = os.path.join(outdir, f"{prefix}_t{float(t):.6g}.csv")
        with open(path, "w", newline="") as fh:
            fh.write(",".join(names + ["mean_u"]) + "\n")
            for x, u in zip(cloud.coords, mean.mean[k]):
                fh.write(",".join(f"{v:.17g}" for v in x) + f",{u:.17g}\n")
        paths.append(path)
    return paths

