"""Command-line front end.

Exit status: 0 success, 1 stability refusal, 2 configuration or input
error, 3 runtime overflow.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from .config import RunConfig, apply_overrides, load_config
from .ensemble import (
    EnsembleConfig,
    ErrorReport,
    convergence_study,
    format_reports,
    l2_error,
    linf_error,
    run_ensemble,
    thread_count,
    write_mean_snapshots,
    write_reports_csv,
)
from .errors import ConfigError, GFDMError, SimulationOverflowError, StabilityError
from .geometry import (
    Domain,
    generate_perturbed_grid,
    generate_random_cloud,
    generate_regular_grid,
    load_cloud,
    refine_midpoints,
    save_cloud,
)
from .problems import AnalyticSolution
from .sde import auto_dt, check_stability, discretize, fit_dt, max_stable_dt
from .stencil import dump_stencil_debug
from .weights import WeightSpec

log = logging.getLogger("sgfdm")

EXIT_OK, EXIT_UNSTABLE, EXIT_CONFIG, EXIT_OVERFLOW = 0, 1, 2, 3


def make_cloud(cfg: RunConfig, points_per_axis=None):
    domain = Domain.unit(cfg.dim)
    if cfg.cloud == "file":
        cloud = load_cloud(cfg.cloud_file, dim=cfg.dim)
        if cloud.dim != cfg.dim:
            raise ConfigError(f"{cfg.cloud_file} is {cloud.dim}D but {cfg.problem} is {cfg.dim}D")
        return cloud
    n = points_per_axis or cfg.points_per_axis
    if cfg.cloud == "regular":
        return generate_regular_grid(domain, n)
    if cfg.cloud == "perturbed":
        return generate_perturbed_grid(domain, n, cfg.jitter, cfg.cloud_seed)
    return generate_random_cloud(domain, cfg.n_interior, cfg.boundary_points, cfg.cloud_seed)


def make_clouds(cfg: RunConfig) -> list:
    if cfg.refine == "midpoint":
        clouds = [make_cloud(cfg)]
        for _ in range(cfg.levels - 1):
            clouds.append(refine_midpoints(clouds[-1]))
        return clouds
    if cfg.refine == "axis":
        if not cfg.axis_counts:
            raise ConfigError("refine = axis needs axis_counts")
        if cfg.cloud not in ("regular", "perturbed"):
            raise ConfigError("refine = axis needs cloud = regular or perturbed")
        counts = [int(v) for v in cfg.axis_counts.split(",") if v.strip()]
        return [make_cloud(cfg, n) for n in counts]
    if not cfg.cloud_files:
        raise ConfigError("refine = files needs cloud_files")
    return [load_cloud(p.strip(), dim=cfg.dim) for p in cfg.cloud_files.split(",") if p.strip()]


def _ensemble(cfg: RunConfig) -> EnsembleConfig:
    return EnsembleConfig(cfg.realizations, cfg.seed, tuple(cfg.snapshot_times()), cfg.noise,
                          thread_count(cfg.threads), cfg.force_unstable)


def _write_echo(cfg: RunConfig) -> None:
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "config.txt"), "w") as fh:
        fh.write(cfg.to_text())


def cmd_solve(cfg: RunConfig) -> int:
    cloud = make_cloud(cfg)
    weight = WeightSpec(cfg.weight, cfg.weight_n)
    ens = _ensemble(cfg)
    disc = discretize(cloud, cfg.M, weight, workers=ens.workers)
    exact = AnalyticSolution(cfg.problem, cfg.rho)
    dt = cfg.dt_value()
    dt = auto_dt(cfg.rho, disc, cfg.T, cfg.safety) if dt in ("auto", "common") else dt
    report = check_stability(cfg.rho, dt, disc)
    print(report)
    _write_echo(cfg)
    if cfg.debug_stencils:
        dump_stencil_debug(os.path.join(cfg.out, "stencils.csv"), disc.stars, weight)
    if not report.passed and not cfg.force_unstable:
        print("refusing to run: stability condition violated (use --force-unstable)",
              file=sys.stderr)
        return EXIT_UNSTABLE
    spec = exact.problem_spec(cfg.mu, cfg.T, dt)
    mean = run_ensemble(disc, spec, ens)
    sup = np.abs(mean.mean).max(axis=1)
    if sup[0] > 0 and sup.max() > 10 * sup[0]:
        k = int(np.argmax(sup > 10 * sup[0]))
        log.warning("mean-field sup-norm grew above 10x its initial value at t=%.6g "
                    "(max growth %.3e)", mean.times[k], sup.max() / sup[0])
    linf = linf_error(mean, exact, cloud, final_only=cfg.linf_mode == "final")
    rep = ErrorReport(cfg.problem, cloud.n, cfg.M, weight.kind, float(weight.n), float(cfg.rho),
                      float(cfg.mu), float(dt), spec.n_steps, cfg.realizations, cfg.seed,
                      l2_error(mean, exact, cloud), linf)
    write_reports_csv([rep], os.path.join(cfg.out, "error_report.csv"))
    write_mean_snapshots(mean, cloud, cfg.snapshot_times(), cfg.out)
    print(format_reports([rep]))
    return EXIT_OK


def cmd_convergence(cfg: RunConfig) -> int:
    clouds = make_clouds(cfg)
    weight = WeightSpec(cfg.weight, cfg.weight_n)
    exact = AnalyticSolution(cfg.problem, cfg.rho)
    _write_echo(cfg)
    reports = convergence_study(exact, clouds, cfg.mu, cfg.T, cfg.dt_value(), cfg.safety, cfg.M,
                                weight, _ensemble(cfg))
    if cfg.linf_mode == "final":
        reports = [dataclasses.replace(r, linf_error=r.extra["linf_final"]) for r in reports]
    write_reports_csv(reports, os.path.join(cfg.out, "convergence.csv"))
    print(format_reports(reports))
    return EXIT_OK


def cmd_stability(cfg: RunConfig) -> int:
    cloud = make_cloud(cfg)
    disc = discretize(cloud, cfg.M, WeightSpec(cfg.weight, cfg.weight_n),
                      workers=thread_count(cfg.threads))
    dt = cfg.dt_value()
    if dt in ("auto", "common"):
        dt = max_stable_dt(cfg.rho, disc, cfg.safety)
    report = check_stability(cfg.rho, dt, disc)
    print(report)
    neg = sum(int((s.theta < 0).sum()) for s in disc.stencils)
    if neg:
        print(f"warning: {neg} negative neighbour coefficients; the bound above assumes "
              f"nonnegative stencils")
    if report.passed:
        n_dt = fit_dt(cfg.T, dt)
        print(f"solve step           = {n_dt:.10g} ({round(cfg.T / n_dt)} steps)")
    return EXIT_OK if report.passed else EXIT_UNSTABLE


def cmd_gen_cloud(cfg: RunConfig) -> int:
    cloud = make_cloud(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "cloud.csv")
    save_cloud(cloud, path)
    print(f"wrote {cloud.n} nodes ({len(cloud.interior_indices)} interior) to {path}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "stability": cmd_stability,
    "gen-cloud": cmd_gen_cloud,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgfdm", description="Meshless GFDM solver for stochastic diffusion equations")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--problem", choices=["diffusion1d", "diffusion2d", "diffusion3d"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--realizations", type=int)
    parser.add_argument("--dt", help="time step, 'auto' or (convergence only) 'common'")
    parser.add_argument("--safety", type=float)
    parser.add_argument("--force-unstable", action="store_true", default=None)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    items = []
    for kv in args.set:
        if "=" not in kv:
            raise ConfigError(f"--set expects KEY=VALUE, got {kv!r}")
        items.append(tuple(kv.split("=", 1)))
    for key in ("problem", "seed", "realizations", "dt", "safety", "force_unstable", "out"):
        val = getattr(args, key)
        if val is not None:
            items.append((key, str(val)))
    return apply_overrides(cfg, items).resolved()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except StabilityError as exc:
        print(exc, file=sys.stderr)
        return EXIT_UNSTABLE
    except SimulationOverflowError as exc:
        print(f"overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (GFDMError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
