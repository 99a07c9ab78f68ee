"""Built-in test problems with closed-form expected solutions.

Each solution is the mean field E[v], which solves the deterministic heat
equation because the multiplicative noise term has zero mean. Errors
computed against it therefore measure the ensemble mean, not individual
sample paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import Domain
from .sde import ProblemSpec

PROBLEMS = ("diffusion1d", "diffusion2d", "diffusion3d")

# physical parameters of the built-in runs; the 2D noise level is a chosen default
DEFAULTS = {
    "diffusion1d": {"rho": 0.005, "mu": 0.1, "T": 1.0},
    "diffusion2d": {"rho": 0.01, "mu": 0.1, "T": 1.0},
    "diffusion3d": {"rho": 1.0, "mu": 0.5, "T": 1.0},
}


@dataclass(frozen=True)
class AnalyticSolution:
    problem: str
    rho: float

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise InvalidArgumentError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")

    @property
    def dim(self) -> int:
        return PROBLEMS.index(self.problem) + 1

    @property
    def domain(self) -> Domain:
        return Domain.unit(self.dim)

    def __call__(self, x, t):
        return analytic_eval(self, x, t)

    def problem_spec(self, mu: float, T: float, dt: float) -> ProblemSpec:
        return ProblemSpec(self.rho, mu, lambda x: self(x, 0.0), self, T, dt)


def analytic_eval(sol: AnalyticSolution, x, t):
    """Expected solution at points ``x`` (shape (..., D) or scalar in 1D) and time ``t``."""
    x = np.asarray(x, dtype=float)
    if sol.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != sol.dim:
        raise InvalidArgumentError(f"{sol.problem} expects {sol.dim}D points")
    t = np.asarray(t, dtype=float)
    pi = np.pi
    if sol.problem == "diffusion1d":
        v = np.exp(-sol.rho * pi**2 * t) * np.sin(pi * x[..., 0])
    elif sol.problem == "diffusion2d":
        v = np.exp(-sol.rho * t / 2) * np.sin((x[..., 0] + x[..., 1]) / 2)
    else:
        v = (np.exp(-3 * sol.rho * pi**2 * t)
             * np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1]) * np.sin(pi * x[..., 2]))
    return float(v) if np.ndim(v) == 0 else v
