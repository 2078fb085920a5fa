"""Truncated expansions, their remainders, and well-prepared initial data."""
from __future__ import annotations

import math

import numpy as np

from .bipolar import BipolarState, FluidState, rhs_bipolar
from .elliptic import solve_screened
from .gaslaw import Regime, ScalingParams, enthalpy, enthalpy_derivative
from .profiles import VARS, ProfileSet

_RATES = {"n_e": "dn_e", "u_e": "du_e", "n_i": "dn_i", "u_i": "du_i"}


def _check_eps(eps):
    if not eps >= 0 or not math.isfinite(eps):
        raise ValueError(f"eps must be a finite nonnegative number, got {eps}")


def approximate_fields(profiles: ProfileSet, eps: float, t: float) -> dict:
    """``sum_j eps^(2j) f^j`` for every stored field, including time derivatives."""
    _check_eps(eps)
    total = None
    for j in range(profiles.m + 1):
        w = eps ** (2 * j)
        snap = profiles.at(t, j)
        if total is None:
            total = {k: w * v for k, v in snap.items()}
        else:
            for k, v in snap.items():
                total[k] = total[k] + w * v if k in total else w * v
    return total


def build_approximate(profiles: ProfileSet, eps: float, t: float) -> BipolarState:
    """Approximate bipolar state at ``t``; ``phi`` is the weighted profile sum, not re-solved."""
    f = approximate_fields(profiles, eps, t)
    return BipolarState(profiles.grid, FluidState(f["n_e"], f["u_e"]),
                        FluidState(f["n_i"], f["u_i"]), f["phi"], t)


def scaling_for(profiles: ProfileSet, eps: float) -> ScalingParams:
    return ScalingParams(eps, profiles.lam, profiles.regime)


def residual(profiles: ProfileSet, eps: float, t: float, regime=None) -> dict:
    """Remainders ``R_n_e, R_u_e, R_n_i, R_u_i`` of the approximate solution.

    Density remainders are ``dn/dt + (n u)'``.  The electron momentum
    remainder is ``m_e (du_e/dt + u_e u_e') + (h_e(n_e) - phi)'`` (so it
    carries the ``eps^2`` factor in the zero-electron regime) and the ion one
    is ``du_i/dt + u_i u_i' + (h_i(n_i) + phi)' / m_i``.  Uses the weighted
    profile potential.
    """
    regime = Regime(regime) if regime is not None else profiles.regime
    if regime is not profiles.regime:
        raise ValueError("profile set was built for another regime")
    grid = profiles.grid
    law_e, law_i = profiles.laws
    m_e, m_i = ScalingParams(max(eps, 1e-300), profiles.lam, regime).masses
    f = approximate_fields(profiles, eps, t)
    d = grid.derivative
    r_ue = m_e * (f["du_e"] + f["u_e"] * d(f["u_e"])) + d(enthalpy(law_e, f["n_e"]) - f["phi"])
    r_ui = f["du_i"] + f["u_i"] * d(f["u_i"]) + d(enthalpy(law_i, f["n_i"]) + f["phi"]) / m_i
    return {
        "n_e": f["dn_e"] + d(f["n_e"] * f["u_e"]),
        "u_e": r_ue,
        "n_i": f["dn_i"] + d(f["n_i"] * f["u_i"]),
        "u_i": r_ui,
    }


def residual_via_rhs(profiles: ProfileSet, eps: float, t: float) -> dict:
    """Same remainders from ``rhs_bipolar`` (potential re-solved) minus stored rates."""
    params = scaling_for(profiles, eps)
    m_e, _ = params.masses
    f = approximate_fields(profiles, eps, t)
    state = build_approximate(profiles, eps, t)
    k = dict(zip(VARS, rhs_bipolar(state, params, profiles.laws)))
    out = {v: f[_RATES[v]] - k[v] for v in VARS}
    if profiles.regime is Regime.ZERO_ELECTRON:
        out["u_e"] = m_e * out["u_e"]
    return out


def residual_norms(profiles: ProfileSet, eps: float, s_values=(0, 1, 2),
                   times=None) -> dict:
    """Sup over ``times`` (default: profile nodes) of per-equation and total ``H^s`` norms.

    Returns ``{s: {"n_e": .., "u_e": .., "n_i": .., "u_i": .., "total": ..}}``.
    """
    grid = profiles.grid
    times = profiles.times if times is None else times
    out = {s: {k: 0.0 for k in (*VARS, "total")} for s in s_values}
    for t in times:
        r = residual(profiles, eps, float(t))
        for s in s_values:
            norms = {k: grid.sobolev_norm(v, s) for k, v in r.items()}
            norms["total"] = math.sqrt(sum(n * n for n in norms.values()))
            for k, n in norms.items():
                out[s][k] = max(out[s][k], n)
    return out


# -- well-prepared data ------------------------------------------------------------

def perturbation_pattern(grid) -> dict:
    """Fixed smooth mean-free shapes for ``(n_e, u_e, n_i, u_i)``."""
    kx = 2.0 * math.pi * grid.x / grid.length
    pat = {
        "n_e": np.cos(kx) + 0.3 * np.sin(2 * kx),
        "u_e": np.sin(kx) - 0.2 * np.cos(3 * kx),
        "n_i": 0.5 * np.cos(kx + 0.7) + 0.4 * np.sin(2 * kx),
        "u_i": np.cos(2 * kx) + 0.25 * np.sin(kx),
    }
    return {k: grid.zero_mean(v) for k, v in pat.items()}


def regime_pattern(profiles: ProfileSet, eps: float) -> dict:
    """Perturbation shape adapted to the regime, before scaling.

    Zero-electron: the electron density part is the linearised Boltzmann
    response to the ion part, so no fast plasma oscillation is excited.
    Infinity-ion: the ion velocity part carries a factor ``eps`` so that
    ``||U_i|| / eps`` obeys the same bound as the other components.
    """
    grid = profiles.grid
    pat = perturbation_pattern(grid)
    if profiles.regime is Regime.ZERO_ELECTRON:
        n_e0 = profiles.orders[0].n_e[0]
        screen = 1.0 / np.asarray(enthalpy_derivative(profiles.laws[0], n_e0))
        pot = solve_screened(grid, screen, pat["n_i"], profiles.lam)
        pat["n_e"] = screen * pot
    else:
        pat["u_i"] = eps * pat["u_i"]
    return pat


def hypothesis_weights(regime: Regime, eps: float) -> dict:
    """Weights of each variable in the initial-data hypothesis of the limit theorem."""
    if Regime(regime) is Regime.ZERO_ELECTRON:
        return {"n_e": 1.0, "u_e": eps, "n_i": 1.0, "u_i": 1.0}
    return {"n_e": 1.0, "u_e": 1.0, "n_i": 1.0, "u_i": 1.0 / eps}


def hypothesis_exponent(regime: Regime, m: int) -> int:
    return 2 * m + 1 if Regime(regime) is Regime.ZERO_ELECTRON else 2 * m + 2


def hypothesis_norm(grid, diffs: dict, regime: Regime, eps: float, s: int = 0) -> float:
    """``sum_nu w_nu ||diff_nu||_s`` with the theorem's weights."""
    w = hypothesis_weights(regime, eps)
    return sum(w[k] * grid.sobolev_norm(diffs[k], s) for k in VARS)


def vector_norm(grid, fields: dict, s: int = 0) -> float:
    return math.sqrt(sum(grid.sobolev_norm(fields[k], s) ** 2 for k in VARS))


def well_prepared_initial(profiles: ProfileSet, eps: float, perturbation_scale: float = 0.0,
                          s: int = 0) -> BipolarState:
    """Approximate state at ``t = 0`` plus a perturbation of ``H^s`` size ``scale * eps^q``.

    ``q = 2m+1`` (zero-electron) or ``2m+2`` (infinity-ion).  The size is
    the plain vector norm ``sqrt(sum ||p_k||_s^2)`` of the added fields; the
    shape from :func:`regime_pattern` keeps the weighted hypothesis sum
    within ``4 * scale * eps^q``.  Density perturbations are mean-free, so
    neutrality is preserved; ``phi`` is re-solved from the densities.
    """
    if perturbation_scale < 0:
        raise ValueError("perturbation_scale must be >= 0")
    grid = profiles.grid
    base = approximate_fields(profiles, eps, 0.0)
    fields = {k: base[k].copy() for k in VARS}
    if perturbation_scale > 0:
        pat = regime_pattern(profiles, eps)
        target = perturbation_scale * eps ** hypothesis_exponent(profiles.regime, profiles.m)
        c = target / vector_norm(grid, pat, s)
        for k in VARS:
            fields[k] = fields[k] + c * pat[k]
    return BipolarState.from_fields(grid, fields["n_e"], fields["u_e"], fields["n_i"],
                                    fields["u_i"], profiles.lam, 0.0)
