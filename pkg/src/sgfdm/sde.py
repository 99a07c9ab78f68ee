"""Explicit Euler-Maruyama stepping of the semi-discrete stochastic diffusion system.

Interior nodes follow

    u_c <- u_c + rho*dt*(-theta_c u_c + sum_i theta_i u_i) + mu*u_c*dW

with one scalar Brownian increment dW shared by every node per step (the
noise is white in time only). Boundary nodes are overwritten with the
Dirichlet data F(x, t_{k+1}) after each step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DegenerateStencilError,
    InvalidArgumentError,
    SimulationOverflowError,
    StabilityError,
)
from .geometry import PointCloud
from .stars import DEFAULT_STAR_SIZE, StarSet, build_all_stars
from .stencil import build_laplacian_stencils, laplacian_matrix
from .weights import WeightSpec

log = logging.getLogger(__name__)

NOISE_MODES = ("scalar", "per-node")
STEP_RTOL = 1e-9
# slack on the stability bound for rounding in theta_c
STABILITY_RTOL = 1e-12


@dataclass(frozen=True)
class ProblemSpec:
    rho: float
    mu: float
    initial: Callable[[np.ndarray], np.ndarray]
    boundary: Callable[[np.ndarray, float], np.ndarray]
    T: float
    dt: float

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidArgumentError(f"rho must be positive, got {self.rho}")
        if not self.mu >= 0:
            raise InvalidArgumentError(f"mu must be nonnegative, got {self.mu}")
        if not self.T > 0:
            raise InvalidArgumentError(f"T must be positive, got {self.T}")
        if not 0 < self.dt <= self.T:
            raise InvalidArgumentError(f"dt must lie in (0, T], got {self.dt}")

    @property
    def n_steps(self) -> int:
        """Number of steps; T/dt must be an integer to within 1e-9."""
        ratio = self.T / self.dt
        n = round(ratio)
        if n < 1 or abs(ratio - n) > STEP_RTOL * max(1.0, ratio):
            raise InvalidArgumentError(f"T/dt = {ratio!r} is not an integer step count")
        return int(n)


@dataclass(frozen=True)
class StabilityReport:
    rho: float
    dt: float
    max_theta_c: float
    product: float
    passed: bool
    max_stable_dt: float

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"max theta_c          = {self.max_theta_c:.10g}\n"
                f"rho*dt*max theta_c   = {self.product:.10g}\n"
                f"largest stable dt    = {self.max_stable_dt:.10g}\n"
                f"stability            = {verdict}")


@dataclass(frozen=True)
class FieldState:
    k: int
    t: float
    u: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.u)):
            raise SimulationOverflowError(f"non-finite values at step {self.k}", step=self.k)


@dataclass(frozen=True, eq=False)
class Discretization:
    """Cloud plus the assembled GFDM Laplacian (boundary rows empty)."""

    cloud: PointCloud
    stars: StarSet
    stencils: list
    operator: object  # scipy.sparse.csr_matrix
    weight: WeightSpec = field(default_factory=WeightSpec)

    @property
    def star_size(self) -> int:
        return self.stars[0].size

    @property
    def theta_c(self) -> np.ndarray:
        return np.array([s.theta_c for s in self.stencils])

    @property
    def max_theta_c(self) -> float:
        return float(self.theta_c.max())


def discretize(cloud: PointCloud, m: int | None = None, weight: WeightSpec | None = None,
               workers: int = 1) -> Discretization:
    weight = weight or WeightSpec()
    m = m or DEFAULT_STAR_SIZE[cloud.dim]
    stars = build_all_stars(cloud, m, workers=workers)
    stencils = build_laplacian_stencils(stars, weight, workers=workers)
    return Discretization(cloud, stars, stencils, laplacian_matrix(stencils, cloud.n), weight)


def _max_theta(stencils) -> float:
    if isinstance(stencils, Discretization):
        return stencils.max_theta_c
    thetas = [s.theta_c for s in stencils]
    if not thetas:
        raise InvalidArgumentError("no stencils given")
    return float(max(thetas))


def max_stable_dt(rho: float, stencils, safety: float = 1.0) -> float:
    """``safety / (rho * max theta_c)``."""
    if not 0 < safety <= 1:
        raise InvalidArgumentError(f"safety must lie in (0, 1], got {safety}")
    if not rho > 0:
        raise InvalidArgumentError(f"rho must be positive, got {rho}")
    theta = _max_theta(stencils)
    if not theta > 0:
        raise DegenerateStencilError(f"max theta_c = {theta} is not positive")
    return safety / (rho * theta)


def check_stability(rho: float, dt: float, stencils) -> StabilityReport:
    theta = _max_theta(stencils)
    product = rho * dt * theta
    largest = 1.0 / (rho * theta) if theta > 0 and rho > 0 else math.inf
    passed = bool(0 <= product <= 1 + STABILITY_RTOL)
    return StabilityReport(rho, dt, theta, product, passed, largest)


def fit_dt(T: float, dt_max: float) -> float:
    """Largest dt <= dt_max that divides T into a whole number of steps."""
    n = max(1, math.ceil(T / dt_max - STEP_RTOL))
    return T / n


def auto_dt(rho: float, stencils, T: float, safety: float = 0.5) -> float:
    return fit_dt(T, max_stable_dt(rho, stencils, safety))


def realization_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for realization ``index`` of a master seed.

    Philox keyed by ``SeedSequence(master_seed, spawn_key=(index,))``; the
    mapping is injective in (master_seed, index) and independent of how
    realizations are scheduled.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def sample_wiener_increment(rng: np.random.Generator, dt: float, size=None):
    """Draw W(t+dt) - W(t) ~ Normal(0, dt)."""
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    return math.sqrt(dt) * rng.standard_normal(size)


def draw_increments(rng: np.random.Generator, dt: float, n_steps: int, n_nodes: int,
                    noise: str = "scalar") -> np.ndarray:
    """All increments of one realization: shape (n_steps,) or (n_steps, n_nodes)."""
    if noise == "scalar":
        return sample_wiener_increment(rng, dt, n_steps)
    if noise == "per-node":
        return sample_wiener_increment(rng, dt, (n_steps, n_nodes))
    raise InvalidArgumentError(f"unknown noise mode {noise!r}; choose from {NOISE_MODES}")


def initial_field(disc: Discretization, spec: ProblemSpec) -> np.ndarray:
    x = disc.cloud.coords
    u = np.array(spec.initial(x), dtype=float).reshape(-1)
    b = disc.cloud.boundary
    if b.any():
        u[b] = np.asarray(spec.boundary(x[b], 0.0), dtype=float).reshape(-1)
    return u


def _advance(u: np.ndarray, disc: Discretization, spec: ProblemSpec, dw, t_next: float):
    """One step for a (N,) or (B, N) array of fields; ``dw`` broadcasts against u."""
    # non-finite results are detected and reported by the callers
    with np.errstate(over="ignore", invalid="ignore"):
        lap = (disc.operator @ u.T).T
        u_new = u + (spec.rho * spec.dt) * lap + spec.mu * u * dw
    b = disc.cloud.boundary
    if b.any():
        u_new[..., b] = np.asarray(spec.boundary(disc.cloud.coords[b], t_next), dtype=float)
    return u_new


def step(state: FieldState, disc: Discretization, spec: ProblemSpec, dw) -> FieldState:
    """Advance one time step with Brownian increment ``dw``.

    ``dw`` is a scalar (shared by all nodes) or, in per-node mode, a length-N array.
    """
    t_next = (state.k + 1) * spec.dt
    u_new = _advance(np.asarray(state.u, dtype=float), disc, spec, dw, t_next)
    if not np.all(np.isfinite(u_new)):
        report = check_stability(spec.rho, spec.dt, disc)
        raise SimulationOverflowError(
            f"non-finite values at step {state.k + 1}\n{report}", step=state.k + 1, report=report)
    return FieldState(state.k + 1, t_next, u_new)


def require_stable(disc: Discretization, spec: ProblemSpec, force: bool = False) -> StabilityReport:
    report = check_stability(spec.rho, spec.dt, disc)
    if not report.passed:
        if not force:
            raise StabilityError(f"stability condition violated\n{report}", report)
        log.warning("running with violated stability condition (product %.4g)", report.product)
    return report


def integrate(disc: Discretization, spec: ProblemSpec, increments: np.ndarray,
              on_step: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Run a batch of realizations from the initial field.

    ``increments`` has shape (B, n_steps) for scalar noise or
    (B, n_steps, N) for per-node noise. ``on_step(k, u)`` is called for
    k = 0..n_steps with the (B, N) state. Returns the final (B, N) state.
    Raises SimulationOverflowError on the first non-finite value; its
    ``realization`` attribute is the row within the batch.
    """
    n_steps = spec.n_steps
    inc = np.asarray(increments, dtype=float)
    if inc.shape[1] != n_steps:
        raise InvalidArgumentError(f"{inc.shape[1]} increments for {n_steps} steps")
    per_node = inc.ndim == 3
    u = np.tile(initial_field(disc, spec), (inc.shape[0], 1))
    if on_step is not None:
        on_step(0, u)
    for k in range(n_steps):
        dw = inc[:, k, :] if per_node else inc[:, k, None]
        u = _advance(u, disc, spec, dw, (k + 1) * spec.dt)
        finite = np.isfinite(u).all(axis=1)
        if not finite.all():
            report = check_stability(spec.rho, spec.dt, disc)
            row = int(np.argmin(finite))
            raise SimulationOverflowError(
                f"non-finite values at step {k + 1}\n{report}",
                step=k + 1, report=report, realization=row)
        if on_step is not None:
            on_step(k + 1, u)
    return u


@dataclass(frozen=True, eq=False)
class Realization:
    final: FieldState
    snapshots: dict       # time -> (N,) field
    history: np.ndarray | None = None  # (n_steps + 1, N) when recorded


def run_realization(disc: Discretization, spec: ProblemSpec, seed: int | np.random.Generator,
                    snapshots=(), record: bool = False, force: bool = False,
                    noise: str = "scalar") -> Realization:
    """One sample path.

    An integer ``seed`` is treated as realization 0 of that master seed, so a
    one-member ensemble reproduces this path exactly.
    """
    require_stable(disc, spec, force)
    n_steps = spec.n_steps
    rng = seed if isinstance(seed, np.random.Generator) else realization_rng(seed, 0)
    inc = draw_increments(rng, spec.dt, n_steps, disc.cloud.n, noise)[None]
    snap_steps = snapshot_steps(snapshots, spec)
    snaps = {}
    hist = np.empty((n_steps + 1, disc.cloud.n)) if record else None

    def on_step(k, u):
        if hist is not None:
            hist[k] = u[0]
        if k in snap_steps:
            snaps[snap_steps[k]] = u[0].copy()

    try:
        u = integrate(disc, spec, inc, on_step)
    except SimulationOverflowError as exc:
        exc.realization = None
        raise
    return Realization(FieldState(n_steps, n_steps * spec.dt, u[0]), snaps, hist)


def snapshot_steps(times, spec: ProblemSpec) -> dict:
    """Map requested snapshot times to step indices (nearest step)."""
    out = {}
    n_steps = spec.n_steps
    for t in times:
        k = int(round(float(t) / spec.dt))
        if not 0 <= k <= n_steps:
            raise InvalidArgumentError(f"snapshot time {t} outside [0, {spec.T}]")
        out[k] = float(t)
    return out
