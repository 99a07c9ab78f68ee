"""Distance weight functions for the weighted least-squares fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

KINDS = ("potential", "exponential", "cubic_spline")


@dataclass(frozen=True)
class WeightSpec:
    kind: str = "potential"
    n: float = 3.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown weight kind {self.kind!r}; choose from {KINDS}")
        if self.kind != "cubic_spline" and not self.n > 0:
            raise InvalidArgumentError(f"weight parameter n must be positive, got {self.n}")


def _cubic_spline(s):
    s = np.asarray(s, dtype=float)
    inner = 2.0 / 3.0 - 4.0 * s**2 + 4.0 * s**3
    outer = 4.0 / 3.0 - 4.0 * s + 4.0 * s**2 - (4.0 / 3.0) * s**3
    # clamp rounding noise near s = 1
    return np.where(s <= 0.5, inner, np.where(s <= 1.0, np.maximum(outer, 0.0), 0.0))


def weight(spec: WeightSpec, delta, delta_max=None):
    """Weight of a neighbour at distance ``delta`` (scalar or array).

    ``delta_max`` is only used by the cubic spline, which is evaluated in
    ``s = delta / delta_max`` and vanishes at ``s = 1``.
    """
    d = np.asarray(delta, dtype=float)
    if np.any(d <= 0):
        raise InvalidArgumentError("neighbour distance must be positive")
    if spec.kind == "potential":
        w = d ** (-float(spec.n))
    elif spec.kind == "exponential":
        w = np.exp(-float(spec.n) * d**2)
    else:
        if delta_max is None or not delta_max > 0:
            raise InvalidArgumentError("cubic spline weight needs a positive delta_max")
        w = _cubic_spline(d / float(delta_max))
    return float(w) if w.ndim == 0 else w


def star_weights(spec: WeightSpec, star) -> np.ndarray:
    return np.asarray(weight(spec, star.distances, star.radius), dtype=float).reshape(-1)
