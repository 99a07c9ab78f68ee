"""Flat ``key = value`` run configuration.

One key per line, ``#`` starts a comment. Unknown keys are rejected.
Command-line overrides are applied on top with the same keys.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .errors import ConfigError
from .problems import DEFAULTS, PROBLEMS
from .stars import DEFAULT_STAR_SIZE
from .weights import KINDS

CLOUD_KINDS = ("random", "regular", "perturbed", "file")
REFINE_RULES = ("midpoint", "axis", "files")

# cloud used when a problem is run without cloud keys
DEFAULT_CLOUD = {
    "diffusion1d": {"cloud": "random", "n_interior": 8, "boundary_points": 2},
    "diffusion2d": {"cloud": "perturbed", "points_per_axis": 17},
    "diffusion3d": {"cloud": "regular", "points_per_axis": 6},
}


@dataclass
class RunConfig:
    problem: str = "diffusion1d"
    rho: float | None = None
    mu: float | None = None
    T: float | None = None
    cloud: str | None = None
    cloud_file: str | None = None
    cloud_seed: int = 0
    points_per_axis: int | None = None
    n_interior: int | None = None
    boundary_points: int = 2
    jitter: float = 0.25
    M: int | None = None
    weight: str = "potential"
    weight_n: float = 3.0
    dt: str = "auto"
    safety: float = 0.5
    realizations: int = 1000
    seed: int = 0
    noise: str = "scalar"
    snapshots: str | None = None
    out: str = "out"
    force_unstable: bool = False
    threads: int | None = None
    debug_stencils: bool = False
    linf_mode: str = "all"
    refine: str = "midpoint"
    levels: int = 3
    axis_counts: str | None = None
    cloud_files: str | None = None

    def resolved(self) -> "RunConfig":
        """Copy with problem defaults filled in and every field validated."""
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        cfg = dataclasses.replace(self)
        for key, val in DEFAULTS[cfg.problem].items():
            if getattr(cfg, key) is None:
                setattr(cfg, key, val)
        if cfg.cloud is None:
            for key, val in DEFAULT_CLOUD[cfg.problem].items():
                if getattr(cfg, key) is None or key == "cloud":
                    setattr(cfg, key, val)
        dim = self.dim
        if cfg.M is None:
            cfg.M = DEFAULT_STAR_SIZE[dim]
        if cfg.snapshots is None:
            cfg.snapshots = repr(float(cfg.T))
        cfg.validate()
        return cfg

    @property
    def dim(self) -> int:
        return PROBLEMS.index(self.problem) + 1

    def validate(self) -> None:
        if not self.rho > 0:
            raise ConfigError("rho must be positive")
        if not self.mu >= 0:
            raise ConfigError("mu must be nonnegative")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.cloud not in CLOUD_KINDS:
            raise ConfigError(f"cloud must be one of {CLOUD_KINDS}")
        if self.cloud == "file" and not self.cloud_file:
            raise ConfigError("cloud = file needs cloud_file")
        if self.cloud in ("regular", "perturbed") and not self.points_per_axis:
            raise ConfigError(f"cloud = {self.cloud} needs points_per_axis")
        if self.cloud == "random" and not self.n_interior:
            raise ConfigError("cloud = random needs n_interior")
        if self.weight not in KINDS:
            raise ConfigError(f"weight must be one of {KINDS}")
        if self.dt not in ("auto", "common"):
            try:
                if not float(self.dt) > 0:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"dt must be 'auto', 'common' or a positive number, "
                                  f"got {self.dt!r}") from None
        if not 0 < self.safety <= 1:
            raise ConfigError("safety must lie in (0, 1]")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.noise not in ("scalar", "per-node"):
            raise ConfigError("noise must be 'scalar' or 'per-node'")
        if self.linf_mode not in ("all", "final"):
            raise ConfigError("linf_mode must be 'all' or 'final'")
        if self.refine not in REFINE_RULES:
            raise ConfigError(f"refine must be one of {REFINE_RULES}")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.M < 1:
            raise ConfigError("M must be positive")
        self.snapshot_times()

    def snapshot_times(self) -> list[float]:
        try:
            return [float(v) for v in str(self.snapshots).split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"snapshots must be comma-separated times, got "
                              f"{self.snapshots!r}") from None

    def dt_value(self):
        return self.dt if self.dt in ("auto", "common") else float(self.dt)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, float):
                v = repr(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    typ = _TYPES[key]
    raw = raw.strip()
    if raw.lower() in ("", "none") and "None" in typ:
        return None
    try:
        if typ.startswith("bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def apply_overrides(cfg: RunConfig, items) -> RunConfig:
    """Apply (key, raw string) pairs, rejecting unknown keys."""
    for key, raw in items:
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, str(raw)))
    return cfg


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    items = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        items.append((key, raw))
    return apply_overrides(RunConfig(), items)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))
