"""Command-line entry point: ``eplim {profiles,run,residuals,study,dispersion}``.

Exit codes: 0 all checks pass, 1 a rate or self-test check fails, 2 bad
configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .gaslaw import GasLaw, Regime, enthalpy
from .grid import write_csv
from .harness import ConfigError, StudyConfig

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("eplim")


def _positive_float_list(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eplim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="TOML study configuration")
        p.add_argument("--regime", choices=[r.value for r in (Regime.ZERO_ELECTRON,
                                                              Regime.INFINITY_ION)])
        p.add_argument("--m", type=int, choices=(0, 1))
        p.add_argument("--eps-list", type=_positive_float_list)
        p.add_argument("--n-points", type=int)
        p.add_argument("--t-end", type=float)
        p.add_argument("--output", help="output directory")
        return p

    common(sub.add_parser("profiles", help="build and persist expansion profiles"))
    run = common(sub.add_parser("run", help="single well-prepared bipolar integration"))
    run.add_argument("--eps", type=float, help="mass-ratio root (default: smallest in eps_list)")
    common(sub.add_parser("residuals", help="remainder slope table"))
    common(sub.add_parser("study", help="convergence-rate study"))
    disp = sub.add_parser("dispersion", help="linear plasma-wave self-test")
    disp.add_argument("--config", type=Path)
    disp.add_argument("--eps", type=float, default=0.5)
    disp.add_argument("--amplitude", type=float, default=1e-6)
    disp.add_argument("--n-points", type=int, default=32)
    disp.add_argument("--output", help="output directory")
    return parser


def load_config(args) -> StudyConfig:
    regime = getattr(args, "regime", None)
    m = getattr(args, "m", None)
    if args.config is not None:
        config = StudyConfig.from_toml(args.config)
    else:
        config = harness.default_config(regime or Regime.INFINITY_ION,
                                        1 if m is None else m)
    return config.with_overrides(
        regime=Regime(regime) if regime else None,
        m=m,
        eps_list=getattr(args, "eps_list", None),
        n_points=getattr(args, "n_points", None),
        t_end=getattr(args, "t_end", None),
        output_dir=getattr(args, "output", None),
    )


def _out(config: StudyConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_profiles(config: StudyConfig) -> int:
    profiles = harness.profiles_for(config)
    out = _out(config)
    profiles.save(out / "profiles")
    grid = profiles.grid
    checks = {"chebyshev_tail": profiles.chebyshev_tail()}
    drift = 0.0
    for prof in profiles.orders:
        for dens in (prof.n_e, prof.n_i):
            mass = [grid.integral(d) for d in dens]
            drift = max(drift, (max(mass) - min(mass)) / max(1.0, abs(mass[0])))
    checks["mass_drift"] = drift
    if profiles.regime is Regime.ZERO_ELECTRON:
        o0 = profiles.orders[0]
        checks["boltzmann_identity"] = max(
            grid.sobolev_norm(grid.zero_mean(enthalpy(profiles.laws[0], ne) - phi), 0)
            for ne, phi in zip(o0.n_e, o0.phi))
    ok = drift <= 1e-8 and checks.get("boltzmann_identity", 0.0) <= 1e-9
    rows = [(float(t), j, name, float(grid.sobolev_norm(arr[k], 0)))
            for j, prof in enumerate(profiles.orders)
            for name, arr in prof.arrays().items()
            for k, t in enumerate(profiles.times)]
    harness.write_rows(out / "profiles.csv", ("t", "order", "field", "l2_norm"), rows)
    harness.write_json(out / "profiles.json", {
        "schema": harness.SCHEMA, "kind": "profiles", "regime": profiles.regime.value,
        "m": profiles.m, "times": list(profiles.times), "checks": checks, "pass": ok,
        "directory": str(out / "profiles")})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_run(config: StudyConfig, eps: float | None) -> int:
    eps = config.eps_list[-1] if eps is None else eps
    if not 0 < eps < 1:
        raise ConfigError("eps must lie in (0, 1)")
    profiles = harness.profiles_for(config)
    result, traj = harness.run_single(config, profiles, eps, keep_state=True)
    out = _out(config)
    if not result.ok:
        harness.write_json(out / "run.json", {"schema": harness.SCHEMA, "kind": "run",
                                              "eps": eps, "status": result.status,
                                              "pass": False})
        log.error("%s", result.status)
        return EXIT_NUMERICAL
    final = traj.states[-1]
    for name, values in zip(("n_e", "u_e", "n_i", "u_i"), final.fields()):
        write_csv(out / f"run_{name}.csv", final.grid, values)
    write_csv(out / "run_phi.csv", final.grid, final.phi)
    ok = max(result.mass_drift) <= 1e-8 and result.neutrality_drift <= 1e-10
    harness.write_json(out / "run.json", {
        "schema": harness.SCHEMA, "kind": "run", "eps": eps, "status": result.status,
        "steps": result.steps, "mass_drift": list(result.mass_drift),
        "neutrality_drift": result.neutrality_drift,
        "weighted_total": {str(s): v for s, v in result.weighted_total.items()},
        "energy": result.energy, "energy_fit": result.energy_fit, "pass": ok})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_residuals(config: StudyConfig) -> int:
    report = harness.run_residual_study(config)
    out = _out(config)
    harness.write_rows(out / "residuals.csv", harness.RESIDUAL_HEADER, report.rows())
    harness.write_json(out / "residuals.json", report.to_json())
    for s, fit in sorted(report.fits.items()):
        print(f"s={s} slope={fit['slope']:.3f} +/- {fit['stderr']:.3f} "
              f"(predicted {report.predicted})")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_study(config: StudyConfig) -> int:
    report = harness.run_convergence_study(config)
    out = _out(config)
    harness.write_rows(out / "study.csv", harness.STUDY_HEADER, report.rows())
    harness.write_json(out / "study.json", report.to_json())
    for r in report.runs:
        print(f"eps={r.eps:g} {r.status}")
    fit = report.fits.get(report.s)
    if fit:
        print(f"slope={fit['slope']:.3f} +/- {fit['stderr']:.3f} predicted {report.predicted}")
    if not report.complete:
        return EXIT_NUMERICAL
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_dispersion(args) -> int:
    lam, laws, out = 1.0, (GasLaw(), GasLaw()), Path(args.output or "eplim_out")
    if args.config is not None:
        config = StudyConfig.from_toml(args.config)
        lam, laws = config.lam, config.laws
        out = Path(args.output or config.output_dir)
    result = harness.run_dispersion(eps=args.eps, amplitude=args.amplitude,
                                    n_points=args.n_points, lam=lam, laws=laws)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_rows(out / "dispersion.csv", ("quantity", "value"),
                       [(k, float(result[k])) for k in
                        ("measured", "predicted", "predicted_two_fluid", "relative_error")])
    harness.write_json(out / "dispersion.json", result)
    print(f"omega measured={result['measured']:.6f} predicted={result['predicted']:.6f} "
          f"rel.err={result['relative_error']:.2e}")
    return EXIT_OK if result["pass"] else EXIT_FAIL


def _dispatch(args) -> int:
    if args.command == "dispersion":
        return cmd_dispersion(args)
    config = load_config(args)
    if args.command == "profiles":
        return cmd_profiles(config)
    if args.command == "run":
        return cmd_run(config, args.eps)
    if args.command == "residuals":
        return cmd_residuals(config)
    return cmd_study(config)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(over="raise", invalid="raise"):
            return _dispatch(args)
    except ConfigError as exc:
        print(f"eplim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except harness.NUMERICAL_ERRORS as exc:
        print(f"eplim: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
