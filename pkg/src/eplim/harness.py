"""Study configuration, rate fitting, convergence and residual studies, reports."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .bipolar import BlowUp, BipolarState, energy_functional, integrate
from .elliptic import CompatibilityError, NonConvergence
from .expansion import (approximate_fields, build_approximate, residual, residual_norms,
                        residual_via_rhs, well_prepared_initial)
from .gaslaw import GasLaw, GasLawDomainError, Regime, ScalingParams
from .grid import Grid, NonFiniteFieldError
from .profiles import VARS, CharacteristicCrossing, ProfileInit, ProfileSet, build_profiles

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

SCHEMA = 1
RATE_TOL = 0.6
RESIDUAL_TOL = 0.4
ENERGY_LIMIT = 50.0
NUMERICAL_ERRORS = (BlowUp, NonConvergence, CompatibilityError, CharacteristicCrossing,
                    NonFiniteFieldError, GasLawDomainError, FloatingPointError)


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------------

@dataclass(frozen=True)
class InitialRecipe:
    """Named smooth family for the order-0 and order-1 profile data.

    ``modes``: ``n = 1 + A cos(kx)``, ``u = A sin(kx)`` (electron velocity
    offset by ``u_e_mean``).  ``bump``: the same amplitudes on a periodic
    bump ``exp((cos(kx) - 1) / width**2)`` with its mean removed.  Order-1
    data use amplitude ``order1`` on shifted shapes.
    """

    family: str = "modes"
    n_e: float = 0.2
    u_e: float = 0.2
    n_i: float = 0.2
    u_i: float = 0.3
    u_e_mean: float = 0.1
    order1: float = 0.5
    mode: int = 1
    width: float = 0.5

    def shapes(self, grid: Grid):
        kx = 2.0 * math.pi * self.mode * grid.x / grid.length
        if self.family == "modes":
            return np.cos(kx), np.sin(kx), np.sin(2 * kx), np.cos(2 * kx)
        if self.family == "bump":
            def bump(shift):
                b = np.exp((np.cos(kx - shift) - 1.0) / self.width**2)
                b = b - b.mean()
                return b / np.abs(b).max()
            return bump(0.0), bump(math.pi / 2), bump(math.pi), bump(1.5 * math.pi)
        raise ConfigError(f"unknown initial family {self.family!r}")

    def build(self, grid: Grid) -> list[ProfileInit]:
        even, odd, second, _ = self.shapes(grid)
        order0 = ProfileInit(1.0 + self.n_e * even, self.u_e_mean + self.u_e * odd,
                             1.0 + self.n_i * even, self.u_i * odd)
        a = self.order1
        order1 = ProfileInit(a * odd, a * even, a * second, a * even)
        return [order0, order1]


@dataclass(frozen=True)
class StudyConfig:
    regime: Regime = Regime.INFINITY_ION
    m: int = 1
    n_points: int = 256
    length: float = 1.0
    law_e: GasLaw = GasLaw()
    law_i: GasLaw = GasLaw()
    lam: float = 1.0
    t_end: float = 0.1
    cfl: float = 0.4
    eps_list: tuple = (0.4, 0.28, 0.2, 0.14, 0.1)
    sobolev_s: int = 0
    report_s: tuple = (0, 1, 2)
    initial: InitialRecipe = InitialRecipe()
    perturbation_scale: float = 0.1
    output_dir: str = "eplim_out"
    samples: int = 0
    profile_nodes: int = 25
    profile_cfl: float = 0.2

    def __post_init__(self):
        try:
            object.__setattr__(self, "regime", Regime(self.regime))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "eps_list", tuple(float(e) for e in self.eps_list))
        object.__setattr__(self, "report_s", tuple(sorted(set(int(s) for s in self.report_s)
                                                          | {int(self.sobolev_s)})))
        self.validate()

    def validate(self):
        if self.regime is Regime.RAW:
            raise ConfigError("studies need a limit regime")
        if self.m not in (0, 1):
            raise ConfigError("m must be 0 or 1")
        eps = self.eps_list
        if len(eps) < 2 or any(not 0 < e < 1 for e in eps) or \
                any(a <= b for a, b in zip(eps, eps[1:])):
            raise ConfigError("eps_list must be strictly decreasing with values in (0, 1)")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if not 0 < self.cfl <= 1 or not 0 < self.profile_cfl <= 1:
            raise ConfigError("cfl must lie in (0, 1]")
        if self.sobolev_s < 0:
            raise ConfigError("sobolev_s must be >= 0")
        if self.perturbation_scale < 0:
            raise ConfigError("perturbation_scale must be >= 0")
        if self.profile_nodes < 4 or self.samples < 0:
            raise ConfigError("profile_nodes must be >= 4 and samples >= 0")
        try:
            Grid(self.n_points, self.length)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def grid(self) -> Grid:
        return Grid(self.n_points, self.length)

    @property
    def laws(self) -> tuple[GasLaw, GasLaw]:
        return self.law_e, self.law_i

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        data = dict(data)
        kwargs = {}
        try:
            grid = data.pop("grid", {})
            if "n_points" in grid:
                kwargs["n_points"] = int(grid["n_points"])
            if "length" in grid:
                kwargs["length"] = float(grid["length"])
            laws = data.pop("laws", {})
            if "electron" in laws:
                kwargs["law_e"] = GasLaw(**laws["electron"])
            if "ion" in laws:
                kwargs["law_i"] = GasLaw(**laws["ion"])
            if "initial" in data:
                kwargs["initial"] = InitialRecipe(**data.pop("initial"))
            if "lambda" in data:
                kwargs["lam"] = float(data.pop("lambda"))
            known = {f for f in cls.__dataclass_fields__}
            for key, value in data.items():
                if key not in known:
                    raise ConfigError(f"unknown config key {key!r}")
                kwargs[key] = value
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None

    @classmethod
    def from_toml(cls, path) -> "StudyConfig":
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        return cls.from_dict(data)

    def with_overrides(self, **changes) -> "StudyConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        try:
            return replace(self, **changes)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        d["eps_list"] = list(self.eps_list)
        d["report_s"] = list(self.report_s)
        return d


def default_config(regime=Regime.INFINITY_ION, m: int = 1) -> StudyConfig:
    """Desk-scale defaults: ``N=256``, ``t_end=0.1``, isothermal laws."""
    regime = Regime(regime)
    scale = 1.0 if regime is Regime.ZERO_ELECTRON else 0.1
    return StudyConfig(regime=regime, m=m, perturbation_scale=scale,
                       output_dir=f"eplim_out/{regime.value}-m{m}")


# -- rate fitting --------------------------------------------------------------------

def fit_rate(pairs) -> tuple[float, float]:
    """Least-squares slope of ``ln value`` against ``ln eps`` and its standard error."""
    pairs = [(float(e), float(v)) for e, v in pairs]
    if len(pairs) < 2:
        raise ValueError("need at least two points")
    if any(e <= 0 or v <= 0 for e, v in pairs):
        raise ValueError("eps and values must be positive")
    x = np.log([e for e, _ in pairs])
    if np.ptp(x) == 0:
        raise ValueError("degenerate fit: all eps equal")
    y = np.log([v for _, v in pairs])
    res = stats.linregress(x, y)
    stderr = float(res.stderr) if len(pairs) > 2 else 0.0
    return float(res.slope), stderr


def predicted_slopes(regime: Regime, m: int, s: int) -> dict:
    """Exponents of the squared-error bounds the convergence theorems give."""
    if Regime(regime) is Regime.ZERO_ELECTRON:
        return {"theorem": 2 * (2 * m + 1 - s), "energy_lemma": 4 * m + 2}
    return {"theorem": 4 * m + 2}


def error_weights(regime: Regime, eps: float) -> dict:
    """Weights of the squared norms in the theorems' error combination."""
    if Regime(regime) is Regime.ZERO_ELECTRON:
        return {"n_e": 1.0, "u_e": eps, "n_i": 1.0, "u_i": 1.0, "grad_phi": 1.0}
    return {"n_e": 1.0, "u_e": 1.0, "n_i": 1.0, "u_i": eps**-2, "grad_phi": 1.0}


# -- profiles ---------------------------------------------------------------------------

def profiles_for(config: StudyConfig, m: int | None = None) -> ProfileSet:
    m = config.m if m is None else m
    return build_profiles(config.regime, config.grid, config.initial.build(config.grid),
                          config.laws, config.lam, config.t_end, m,
                          nodes=config.profile_nodes, cfl=config.profile_cfl)


def sample_times(config: StudyConfig, profiles: ProfileSet) -> np.ndarray:
    if config.samples == 0:
        return profiles.times.copy()
    return np.linspace(0.0, config.t_end, config.samples + 1)


# -- single well-prepared run -----------------------------------------------------

@dataclass
class RunResult:
    eps: float
    status: str
    times: list = field(default_factory=list)
    sup_norm_sq: dict = field(default_factory=dict)     # s -> var -> value
    weighted_total: dict = field(default_factory=dict)  # s -> value
    energy: list = field(default_factory=list)
    energy_fit: dict = field(default_factory=dict)
    steps: int = 0
    mass_drift: tuple = (0.0, 0.0)
    neutrality_drift: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def energy_constants(times, energies, floor: float) -> dict:
    """Gronwall-type growth constants of ``log E(t) <= log(E(0) + floor) + C t``.

    ``c_fit`` is the least-squares slope through the origin; ``c_envelope``
    is the smallest ``C >= 0`` for which the inequality holds at every sample.
    """
    t = np.asarray(times[1:], float)
    y = np.log(np.asarray(energies[1:], float)) - math.log(energies[0] + floor)
    if t.size == 0:
        return {"c_fit": 0.0, "c_envelope": 0.0}
    c_fit = float(np.dot(t, y) / np.dot(t, t))
    c_env = float(max(0.0, np.max(y / t)))
    return {"c_fit": c_fit, "c_envelope": c_env}


def run_single(config: StudyConfig, profiles: ProfileSet, eps: float,
               keep_state: bool = False):
    """Integrate well-prepared data at ``eps`` and measure the theorem's error combination."""
    grid = profiles.grid
    params = ScalingParams(eps, config.lam, config.regime)
    weights = error_weights(config.regime, eps)
    result = RunResult(eps=eps, status="ok")
    try:
        initial = well_prepared_initial(profiles, eps, config.perturbation_scale,
                                        config.sobolev_s)
        times = sample_times(config, profiles)
        traj = integrate(initial, params, config.laws, config.t_end, config.cfl,
                         sample_times=times[1:])
    except NUMERICAL_ERRORS as exc:
        result.status = f"failed: {type(exc).__name__}: {exc}"
        return (result, None) if keep_state else result

    sups = {s: {k: 0.0 for k in weights} for s in config.report_s}
    totals = {s: 0.0 for s in config.report_s}
    energies = []
    for t, state in zip(traj.times, traj.states):
        approx = approximate_fields(profiles, eps, float(t))
        diffs = {
            "n_e": state.electron.n - approx["n_e"], "u_e": state.electron.u - approx["u_e"],
            "n_i": state.ion.n - approx["n_i"], "u_i": state.ion.u - approx["u_i"],
        }
        phi_diff = state.phi - approx["phi"]
        diffs["grad_phi"] = grid.derivative(phi_diff)
        for s in config.report_s:
            sq = {k: grid.sobolev_norm(v, s) ** 2 for k, v in diffs.items()}
            for k, v in sq.items():
                sups[s][k] = max(sups[s][k], v)
            totals[s] = max(totals[s], sum(weights[k] * v for k, v in sq.items()))
        energies.append(energy_functional(
            grid, [diffs[k] for k in VARS], phi_diff, (approx["n_e"], approx["n_i"]),
            params, config.laws, config.sobolev_s))
    result.times = [float(t) for t in traj.times]
    result.sup_norm_sq = sups
    result.weighted_total = totals
    result.energy = energies
    result.energy_fit = energy_constants(result.times, energies, eps ** (4 * config.m + 2))
    result.steps = traj.steps
    result.mass_drift = traj.mass_drift()
    result.neutrality_drift = traj.neutrality_drift()
    return (result, traj) if keep_state else result


def _worker_count(n_tasks: int) -> int:
    env = os.environ.get("EPLIM_THREADS")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        cap = 1
    return max(1, min(cap, n_tasks))


def _map(func, args_list):
    workers = _worker_count(len(args_list))
    if workers == 1:
        return [func(*args) for args in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, *args) for args in args_list]
        return [f.result() for f in futures]


# -- convergence study ----------------------------------------------------------------

@dataclass
class RateReport:
    kind: str
    regime: Regime
    m: int
    s: int
    runs: list
    fits: dict
    predicted: dict
    flags: dict
    fallback: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return all(r.ok for r in self.runs)

    @property
    def passed(self) -> bool:
        return bool(self.flags.get("pass", False))

    def rows(self) -> list[tuple]:
        species = {"n_e": ("electron", "n"), "u_e": ("electron", "u"),
                   "n_i": ("ion", "n"), "u_i": ("ion", "u"), "grad_phi": ("field", "grad_phi")}
        out = []
        for r in self.runs:
            if not r.ok:
                continue
            for s in sorted(r.sup_norm_sq):
                for k, v in r.sup_norm_sq[s].items():
                    out.append((r.eps, s, *species[k], v))
                out.append((r.eps, s, "all", "weighted_total", r.weighted_total[s]))
        return out

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "regime": self.regime.value,
            "m": self.m,
            "s": self.s,
            "complete": self.complete,
            "pass": self.passed,
            "flags": self.flags,
            "predicted_slopes": self.predicted,
            "fits": {str(k): v for k, v in self.fits.items()},
            "fallback_slopes": self.fallback,
            "runs": [_run_json(r) for r in self.runs],
            **self.extra,
        }


def _run_json(r: RunResult) -> dict:
    out = {"eps": r.eps, "status": r.status}
    if r.ok:
        out.update({
            "weighted_total": {str(s): v for s, v in r.weighted_total.items()},
            "energy_fit": r.energy_fit,
            "steps": r.steps,
            "mass_drift": list(r.mass_drift),
            "neutrality_drift": r.neutrality_drift,
        })
    return out


def _fit_table(runs, key, s_values):
    fits = {}
    ok = [r for r in runs if r.ok]
    for s in s_values:
        pairs = [(r.eps, key(r, s)) for r in ok]
        pairs = [(e, v) for e, v in pairs if v > 0]
        if len(pairs) >= 2:
            slope, err = fit_rate(pairs)
            fits[s] = {"slope": slope, "stderr": err, "points": len(pairs)}
    return fits


def fallback_slopes(pairs, min_points: int = 3) -> list[dict]:
    """Slopes with the largest eps values dropped one by one."""
    pairs = sorted(pairs, key=lambda p: -p[0])
    out = []
    for k in range(0, len(pairs) - min_points + 1):
        slope, err = fit_rate(pairs[k:])
        out.append({"dropped": k, "slope": slope, "stderr": err})
    return out


def run_convergence_study(config: StudyConfig, profiles: ProfileSet | None = None) -> RateReport:
    """Exact-vs-approximate convergence study over ``config.eps_list``."""
    if profiles is None:
        profiles = profiles_for(config)
    runs = _map(run_single, [(config, profiles, e) for e in config.eps_list])
    s = config.sobolev_s
    fits = _fit_table(runs, lambda r, s_: r.weighted_total[s_], config.report_s)
    predicted = predicted_slopes(config.regime, config.m, s)
    flags = {"complete": all(r.ok for r in runs)}
    fallback = []
    slope = fits.get(s, {}).get("slope", float("nan"))
    ok_runs = [r for r in runs if r.ok]
    flags["enough_points"] = len(ok_runs) >= 4
    flags["theorem_band"] = bool(slope >= predicted["theorem"] - RATE_TOL)
    flags["within_theorem"] = bool(abs(slope - predicted["theorem"]) <= RATE_TOL)
    rate_ok = flags["theorem_band"]
    if "energy_lemma" in predicted:
        flags["within_energy_lemma"] = bool(abs(slope - predicted["energy_lemma"]) <= RATE_TOL)
        if len(ok_runs) >= 3:
            fallback = fallback_slopes([(r.eps, r.weighted_total[s]) for r in ok_runs])
            seq = [f["slope"] for f in fallback]
            flags["fallback_trend"] = bool(len(seq) >= 2 and
                                           all(b > a for a, b in zip(seq, seq[1:])))
            rate_ok = rate_ok or flags["fallback_trend"]
    c_env = [r.energy_fit["c_envelope"] for r in ok_runs]
    flags["energy_bounded"] = bool(c_env and all(math.isfinite(c) and c < ENERGY_LIMIT
                                                 for c in c_env))
    flags["pass"] = bool(flags["complete"] and flags["enough_points"] and rate_ok
                         and flags["energy_bounded"])
    return RateReport("study", config.regime, config.m, s, runs, fits, predicted, flags,
                      fallback, {"config": config.to_dict()})


def planted_rate_study(config: StudyConfig, profiles: ProfileSet, power: float = 3.0,
                       amplitude: float = 1.0) -> RateReport:
    """Fitter self-test: the 'exact' solution is the approximation plus ``amplitude eps^power``.

    The squared error then scales exactly like ``eps^(2 power)``.
    """
    grid = profiles.grid
    shape = np.sin(2 * math.pi * grid.x / grid.length)
    shape = shape / grid.sobolev_norm(shape, config.sobolev_s)
    runs = []
    for eps in config.eps_list:
        r = RunResult(eps=eps, status="ok")
        sup = 0.0
        for t in sample_times(config, profiles):
            exact = build_approximate(profiles, eps, float(t))
            diff = exact.ion.n + amplitude * eps**power * shape - exact.ion.n
            sup = max(sup, grid.sobolev_norm(diff, config.sobolev_s) ** 2)
        r.weighted_total = {config.sobolev_s: sup}
        r.sup_norm_sq = {config.sobolev_s: {"n_i": sup}}
        runs.append(r)
    fits = _fit_table(runs, lambda r, s_: r.weighted_total[s_], [config.sobolev_s])
    slope = fits[config.sobolev_s]["slope"]
    flags = {"complete": True, "pass": bool(abs(slope - 2 * power) <= 0.05)}
    return RateReport("planted", config.regime, config.m, config.sobolev_s, runs, fits,
                      {"planted": 2 * power}, flags)


# -- residual study ----------------------------------------------------------------------

@dataclass
class ResidualReport:
    regime: Regime
    m: int
    eps_list: tuple
    norms: dict            # eps -> s -> equation -> sup norm
    fits: dict             # s -> {slope, stderr}
    predicted: float
    consistency: float     # max difference between the two evaluation paths
    density_integral: float
    flags: dict

    @property
    def passed(self) -> bool:
        return bool(self.flags["pass"])

    def rows(self) -> list[tuple]:
        out = []
        for eps in self.eps_list:
            for s, eqs in self.norms[eps].items():
                for eq, v in eqs.items():
                    out.append((eps, s, eq, v))
        return out

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": "residuals",
            "regime": self.regime.value,
            "m": self.m,
            "pass": self.passed,
            "flags": self.flags,
            "predicted_slope": self.predicted,
            "fits": {str(k): v for k, v in self.fits.items()},
            "path_consistency": self.consistency,
            "density_residual_integral": self.density_integral,
            "sup_norms": {str(e): {str(s): v for s, v in d.items()}
                          for e, d in self.norms.items()},
        }


def _residual_task(profiles, eps, s_values):
    return residual_norms(profiles, eps, s_values)


def run_residual_study(config: StudyConfig, profiles: ProfileSet | None = None) -> ResidualReport:
    """Sup-in-time remainder norms over the eps sweep and their fitted slope."""
    if profiles is None:
        profiles = profiles_for(config)
    profiles = profiles.truncated(config.m) if profiles.m > config.m else profiles
    if profiles.m != config.m:
        raise ConfigError(f"profile set has order {profiles.m}, study needs {config.m}")
    results = _map(_residual_task, [(profiles, e, config.report_s) for e in config.eps_list])
    norms = dict(zip(config.eps_list, results))
    fits = {}
    for s in config.report_s:
        pairs = [(e, norms[e][s]["total"]) for e in config.eps_list]
        if all(v > 0 for _, v in pairs):
            slope, err = fit_rate(pairs)
            fits[s] = {"slope": slope, "stderr": err}
    predicted = 2 * config.m + 2
    consistency = 0.0
    dens = 0.0
    grid = profiles.grid
    for eps in (config.eps_list[0], config.eps_list[-1]):
        for t in profiles.times[:: max(1, profiles.times.size // 4)]:
            a = residual(profiles, eps, float(t))
            b = residual_via_rhs(profiles, eps, float(t))
            consistency = max(consistency, max(float(np.abs(a[k] - b[k]).max()) for k in a))
            dens = max(dens, abs(grid.integral(a["n_e"])), abs(grid.integral(a["n_i"])))
    slope = fits.get(0, {}).get("slope", float("nan"))
    flags = {
        "slope_band": bool(abs(slope - predicted) <= RESIDUAL_TOL),
        "paths_agree": bool(consistency <= 1e-8),
        "density_divergence_form": bool(dens <= 1e-10),
    }
    flags["pass"] = all(flags.values())
    return ResidualReport(config.regime, config.m, config.eps_list, norms, fits, predicted,
                          consistency, dens, flags)


# -- dispersion self-test ----------------------------------------------------------------

def two_fluid_frequencies(kappa: float, eps: float, lam: float = 1.0, a_e: float = 1.0,
                          a_i: float = 1.0) -> tuple[float, float]:
    """Linear frequencies (fast, slow) of the zero-electron scaled bipolar system."""
    mat = np.array([[(a_e**2 * kappa**2 + lam**-2) / eps**2, -1.0 / (lam**2 * eps**2)],
                    [-1.0 / lam**2, a_i**2 * kappa**2 + lam**-2]])
    w2 = np.sort(np.linalg.eigvals(mat).real)
    return math.sqrt(w2[1]), math.sqrt(w2[0])


def run_dispersion(eps: float = 0.5, amplitude: float = 1e-6, mode: int = 1,
                   n_points: int = 32, length: float = 1.0, lam: float = 1.0,
                   laws=(GasLaw(), GasLaw()), periods: float = 3.0, cfl: float = 0.4,
                   samples_per_period: int = 200) -> dict:
    """Excite the electron plasma branch at small amplitude and time its zero crossings."""
    grid = Grid(n_points, length)
    kappa = 2 * math.pi * mode / length
    a_e, a_i = laws[0].a, laws[1].a
    w_fast, _ = two_fluid_frequencies(kappa, eps, lam, a_e, a_i)
    w_formula = math.sqrt((a_e**2 * kappa**2 + lam**-2) / eps**2)
    # electron-branch eigenvector of the density amplitudes
    top = 1.0 / (lam**2 * eps**2)
    low = (a_e**2 * kappa**2 + lam**-2) / eps**2 - w_fast**2
    scale = amplitude / max(abs(top), abs(low))
    shape = np.cos(kappa * grid.x)
    state = BipolarState.from_fields(grid, 1.0 + scale * top * shape, grid.zeros(),
                                     1.0 + scale * low * shape, grid.zeros(), lam)
    params = ScalingParams(eps, lam, Regime.ZERO_ELECTRON)
    t_end = periods * 2 * math.pi / w_fast
    times = np.linspace(0.0, t_end, int(periods * samples_per_period) + 1)
    traj = integrate(state, params, laws, t_end, cfl, sample_times=times[1:])
    signal = np.array([2.0 * np.fft.rfft(s.electron.n)[mode].real / n_points
                       for s in traj.states])
    crossings = []
    for k in range(signal.size - 1):
        a, b = signal[k], signal[k + 1]
        if a == 0.0 or a * b < 0:
            crossings.append(times[k] + (times[k + 1] - times[k]) * a / (a - b))
    if len(crossings) < 2:
        raise BlowUp("no oscillation detected")
    measured = math.pi * (len(crossings) - 1) / (crossings[-1] - crossings[0])
    rel = abs(measured - w_formula) / w_formula
    return {
        "schema": SCHEMA, "kind": "dispersion", "eps": eps, "amplitude": amplitude,
        "wavenumber": kappa, "measured": measured, "predicted": w_formula,
        "predicted_two_fluid": w_fast, "relative_error": rel,
        "relative_error_two_fluid": abs(measured - w_fast) / w_fast,
        "mass_drift": list(traj.mass_drift()), "pass": bool(rel <= 0.01),
    }


# -- output --------------------------------------------------------------------------------

def write_rows(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (Regime,)):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


STUDY_HEADER = ("eps", "s", "species", "variable", "sup_norm_sq")
RESIDUAL_HEADER = ("eps", "s", "equation", "sup_norm")
