"""Expansion profiles of the two singular limits, orders 0 and 1.

Profiles are sampled on Chebyshev-Lobatto nodes in time so they can be
interpolated and differentiated in time to spectral accuracy.  Each
``OrderProfile`` stores the fields and their time derivatives; the
derivatives of the evolved unknowns come from re-evaluating the profile
equations at the node, never from differencing samples.

Zero-electron regime (``m_i = 1``), order 0:

* ions obey the unipolar Euler-Poisson system with Boltzmann electrons,
  ``-lam^2 phi'' = n_i - h_e^{-1}(phi)``;
* ``n_e = h_e^{-1}(phi)``; the electron flux ``F = n_e u_e`` solves
  ``F' = -dn_e/dt`` up to a constant fixed by the conserved mean of ``u_e``;
* ``P_e`` is the mean-zero potential with ``P_e' = -du_e/dt - u_e u_e'``.

``dn_e/dt`` and ``du_e/dt`` are obtained by differentiating the
Poisson-Boltzmann closure once and twice in time, which only needs the ion
tendencies and two screened elliptic solves.

Order 1 closes the ion system with
``-lam^2 phi1'' + phi1 / h_e'(n_e) = n_i1 - P_e / h_e'(n_e)`` and
``n_e1 = (P_e + phi1) / h_e'(n_e)``.  The order-1 electron velocity follows
from the linearised continuity equation; its time derivative is the one
place where the Chebyshev differentiation matrix is applied to samples.

Infinity-ion regime (``m_e = 1``): pressureless ions plus a unipolar
electron Euler-Poisson system at order 0, and at order 1 the linearised
system whose ion momentum source is ``(h_i(n_i) + phi)'`` of order 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .bipolar import N_FLOOR, BlowUp, march, potential
from .elliptic import solve_poisson_boltzmann, solve_screened
from .gaslaw import (GasLaw, Regime, enthalpy, enthalpy_derivative,
                     pressure_derivative)
from .grid import Grid, read_checkpoint, write_checkpoint


class CharacteristicCrossing(RuntimeError):
    """Pressureless ion characteristics crossed (shock in the limit system)."""


VARS = ("n_e", "u_e", "n_i", "u_i")


@dataclass
class ProfileInit:
    """Initial data of one expansion order.

    In the zero-electron regime ``n_e`` is ignored (the closure determines
    it) and only the spatial mean of ``u_e`` is used, since the constraint
    fixes the rest of the electron velocity.
    """

    n_e: np.ndarray
    u_e: np.ndarray
    n_i: np.ndarray
    u_i: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "ProfileInit":
        return cls(*(grid.zeros() for _ in VARS))

    def scaled(self, c: float) -> "ProfileInit":
        return ProfileInit(*(c * getattr(self, v) for v in VARS))


@dataclass
class OrderProfile:
    n_e: np.ndarray
    u_e: np.ndarray
    n_i: np.ndarray
    u_i: np.ndarray
    phi: np.ndarray
    dn_e: np.ndarray
    du_e: np.ndarray
    dn_i: np.ndarray
    du_i: np.ndarray
    P_e: np.ndarray | None = None

    def arrays(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)
                if getattr(self, f.name) is not None}


# -- Chebyshev time machinery ---------------------------------------------------

def chebyshev_nodes(t_end: float, count: int) -> np.ndarray:
    k = np.arange(count)
    return 0.5 * t_end * (1.0 - np.cos(math.pi * k / (count - 1)))


def chebyshev_diff_matrix(t_end: float, count: int) -> np.ndarray:
    """Differentiation matrix on :func:`chebyshev_nodes` (ascending times)."""
    n = count - 1
    x = np.cos(math.pi * np.arange(count) / n)
    c = np.ones(count)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(count)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(count))
    d -= np.diag(d.sum(axis=1))
    return -(2.0 / t_end) * d


def barycentric_weights(count: int) -> np.ndarray:
    w = (-1.0) ** np.arange(count)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def interpolate_in_time(times: np.ndarray, values: np.ndarray, t: float) -> np.ndarray:
    """Barycentric interpolation of node values ``values[k]`` at time ``t``."""
    diff = t - times
    hit = np.flatnonzero(np.abs(diff) < 1e-15 * max(1.0, abs(t)))
    if hit.size:
        return values[hit[0]].copy()
    w = barycentric_weights(times.size) / diff
    return np.tensordot(w, values, axes=1) / w.sum()


# -- the profile set -------------------------------------------------------------

@dataclass
class ProfileSet:
    regime: Regime
    grid: Grid
    laws: tuple[GasLaw, GasLaw]
    lam: float
    times: np.ndarray
    orders: list[OrderProfile]
    inits: list[ProfileInit] = field(default_factory=list)
    cfl: float = 0.2

    @property
    def m(self) -> int:
        return len(self.orders) - 1

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def truncated(self, m: int) -> "ProfileSet":
        if m > self.m:
            raise ValueError(f"profile set only has orders up to {self.m}")
        return ProfileSet(self.regime, self.grid, self.laws, self.lam, self.times,
                          self.orders[:m + 1], self.inits[:m + 1], self.cfl)

    def at(self, t: float, j: int) -> dict:
        """All stored fields of order ``j`` at time ``t`` (interpolated)."""
        if not -1e-12 <= t <= self.t_end * (1 + 1e-12) + 1e-15:
            raise ValueError(f"t={t} outside the profile time range [0, {self.t_end}]")
        prof = self.orders[j]
        return {k: interpolate_in_time(self.times, v, t) for k, v in prof.arrays().items()}

    def chebyshev_tail(self) -> float:
        """Relative size of the last Chebyshev coefficients (time resolution check)."""
        worst = 0.0
        for prof in self.orders:
            for arr in (prof.n_i, prof.u_i, prof.n_e, prof.u_e):
                coef = _chebyshev_coefficients(arr)
                scale = max(float(np.abs(coef).max()), 1e-300)
                worst = max(worst, float(np.abs(coef[-2:]).max()) / scale)
        return worst

    # persistence

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "schema": 1,
            "regime": self.regime.value,
            "m": self.m,
            "laws": {"electron": self.laws[0].to_dict(), "ion": self.laws[1].to_dict()},
            "lambda": self.lam,
            "times": [float(t) for t in self.times],
            "n_points": self.grid.n_points,
            "length": self.grid.length,
            "cfl": self.cfl,
            "fields": {},
        }
        for j, prof in enumerate(self.orders):
            names = []
            for name, arr in prof.arrays().items():
                for k in range(self.times.size):
                    write_checkpoint(directory / f"o{j}_{name}_{k:03d}.bin", self.grid, arr[k])
                names.append(name)
            manifest["fields"][str(j)] = names
        for j, init in enumerate(self.inits):
            for v in VARS:
                write_checkpoint(directory / f"init{j}_{v}.bin", self.grid, getattr(init, v))
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))

    @classmethod
    def load(cls, directory) -> "ProfileSet":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        grid = Grid(manifest["n_points"], manifest["length"])
        times = np.array(manifest["times"])
        orders = []
        for j in range(manifest["m"] + 1):
            arrays = {}
            for name in manifest["fields"][str(j)]:
                arrays[name] = np.stack([
                    read_checkpoint(directory / f"o{j}_{name}_{k:03d}.bin")[1]
                    for k in range(times.size)])
            orders.append(OrderProfile(**arrays))
        inits = []
        for j in range(manifest["m"] + 1):
            if (directory / f"init{j}_n_e.bin").exists():
                inits.append(ProfileInit(*(read_checkpoint(directory / f"init{j}_{v}.bin")[1]
                                           for v in VARS)))
        laws = (GasLaw(**manifest["laws"]["electron"]), GasLaw(**manifest["laws"]["ion"]))
        return cls(Regime(manifest["regime"]), grid, laws, manifest["lambda"], times,
                   orders, inits, manifest.get("cfl", 0.2))


def _chebyshev_coefficients(node_values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients (per spatial point) from Lobatto node values."""
    n = node_values.shape[0] - 1
    ext = np.concatenate([node_values, node_values[-2:0:-1]], axis=0)
    coef = np.real(np.fft.fft(ext, axis=0))[: n + 1] / n
    coef[0] *= 0.5
    coef[-1] *= 0.5
    return coef


# -- zero-electron regime --------------------------------------------------------

def _zero_electron_jet(grid, n, u, law_e, law_i, lam, ue_mean, phi_guess=None):
    """Order-0 Boltzmann closure, electron velocity and ``P_e`` from the ion state."""
    d = grid.derivative
    phi, n_e = solve_poisson_boltzmann(grid, n, lam, law_e, phi_guess=phi_guess)
    hp = np.asarray(enthalpy_derivative(law_e, n_e))
    gp = 1.0 / hp
    gpp = -np.asarray(enthalpy_derivative(law_e, n_e, 2)) * gp**3

    n_t = -d(n * u)
    u_t = -u * d(u) - d(enthalpy(law_i, n) + phi)
    phi_t = solve_screened(grid, gp, n_t, lam)
    ne_t = gp * phi_t
    n_tt = -d(n_t * u + n * u_t)
    phi_tt = solve_screened(grid, gp, n_tt - gpp * phi_t**2, lam)
    ne_tt = gpp * phi_t**2 + gp * phi_tt

    inv_mean = grid.mean(1.0 / n_e)
    flux = -grid.antiderivative(ne_t)
    flux = flux + (ue_mean - grid.mean(flux / n_e)) / inv_mean
    u_e = flux / n_e
    flux_t = -grid.antiderivative(ne_tt) - u_e * ne_t
    ue_t = (flux_t - grid.mean(flux_t / n_e) / inv_mean) / n_e
    P_e = grid.antiderivative(-ue_t - u_e * d(u_e))
    return {"phi": phi, "n_e": n_e, "u_e": u_e, "P_e": P_e, "gp": gp,
            "dn_e": ne_t, "du_e": ue_t, "dn_i": n_t, "du_i": u_t}


def _zero_electron_order1(grid, jet, n, u, n1, u1, law_i, lam):
    d = grid.derivative
    gp = jet["gp"]
    phi1 = solve_screened(grid, gp, n1 - gp * jet["P_e"], lam)
    ne1 = gp * (jet["P_e"] + phi1)
    dn1 = -d(n * u1 + n1 * u)
    du1 = -d(u * u1) - d(np.asarray(enthalpy_derivative(law_i, n)) * n1 + phi1)
    return {"phi": phi1, "n_e": ne1, "dn_i": dn1, "du_i": du1}


def _zero_electron_speed(grid, n, u, law_e, law_i):
    # ion-acoustic speed with Boltzmann electrons, bounded via p_e'(1) scale
    c2 = pressure_derivative(law_i, n) + law_e.a**2 * law_e.gamma * np.maximum(n, 1.0) ** (
        law_e.gamma - 1.0)
    return float(np.max(np.abs(u) + np.sqrt(c2)))


def _solve_zero_electron(grid, inits, laws, lam, t_end, m, nodes, cfl, filter_order):
    law_e, law_i = laws
    times = chebyshev_nodes(t_end, nodes)
    ue_means = [grid.mean(init.u_e) for init in inits]
    phi_last = [None]

    def order0_jet(y):
        jet = _zero_electron_jet(grid, y[0], y[1], law_e, law_i, lam, ue_means[0], phi_last[0])
        phi_last[0] = jet["phi"]
        return jet

    def rhs(y, t):
        if y[0].min() < N_FLOOR:
            raise BlowUp("ion density below floor in the limit system")
        jet = order0_jet(y)
        out = [jet["dn_i"], jet["du_i"]]
        if m >= 1:
            o1 = _zero_electron_order1(grid, jet, y[0], y[1], y[2], y[3], law_i, lam)
            out += [o1["dn_i"], o1["du_i"]]
        if filter_order is not None:
            out = [grid.apply_filter(f, filter_order) for f in out]
        return tuple(out)

    def dt_max(y, t):
        return cfl * grid.dx / _zero_electron_speed(grid, y[0], y[1], law_e, law_i)

    y0 = [np.array(inits[0].n_i, float), np.array(inits[0].u_i, float)]
    if m >= 1:
        y0 += [np.array(inits[1].n_i, float), np.array(inits[1].u_i, float)]
    ys = [tuple(y0)] + march(rhs, tuple(y0), 0.0, times[1:], dt_max)

    o0 = {k: [] for k in ("n_e", "u_e", "n_i", "u_i", "phi", "P_e",
                          "dn_e", "du_e", "dn_i", "du_i")}
    o1 = {k: [] for k in ("n_e", "n_i", "u_i", "phi", "dn_i", "du_i")}
    jets = []
    for y in ys:
        jet = order0_jet(y)
        jets.append(jet)
        for k in ("n_e", "u_e", "phi", "P_e", "dn_e", "du_e", "dn_i", "du_i"):
            o0[k].append(jet[k])
        o0["n_i"].append(y[0])
        o0["u_i"].append(y[1])
        if m >= 1:
            r1 = _zero_electron_order1(grid, jet, y[0], y[1], y[2], y[3], law_i, lam)
            o1["n_i"].append(y[2])
            o1["u_i"].append(y[3])
            for k in ("n_e", "phi", "dn_i", "du_i"):
                o1[k].append(r1[k])
    orders = [OrderProfile(**{k: np.array(v) for k, v in o0.items()})]
    if m >= 1:
        orders.append(_zero_electron_order1_electrons(grid, times, jets, o1, ue_means[1]))
    return ProfileSet(Regime.ZERO_ELECTRON, grid, tuple(laws), lam, times, orders,
                      list(inits[:m + 1]), cfl)


def _zero_electron_order1_electrons(grid, times, jets, o1, ue1_mean):
    D = chebyshev_diff_matrix(times[-1], times.size)
    ne1 = np.array(o1["n_e"])
    dne1 = np.tensordot(D, ne1, axes=1)
    ue1 = []
    for k, jet in enumerate(jets):
        n_e, u_e = jet["n_e"], jet["u_e"]
        flux = -grid.antiderivative(dne1[k]) - ne1[k] * u_e
        flux = flux + (ue1_mean - grid.mean(flux / n_e)) / grid.mean(1.0 / n_e)
        ue1.append(flux / n_e)
    ue1 = np.array(ue1)
    due1 = np.tensordot(D, ue1, axes=1)
    P_e1 = np.array([
        grid.antiderivative(-due1[k] - grid.derivative(jet["u_e"] * ue1[k]))
        for k, jet in enumerate(jets)])
    return OrderProfile(n_e=ne1, u_e=ue1, n_i=np.array(o1["n_i"]), u_i=np.array(o1["u_i"]),
                        phi=np.array(o1["phi"]), dn_e=dne1, du_e=due1,
                        dn_i=np.array(o1["dn_i"]), du_i=np.array(o1["du_i"]), P_e=P_e1)


def solve_zero_electron_leading(grid: Grid, init: ProfileInit, laws: Sequence[GasLaw],
                                lam: float, t_end: float, nodes: int = 25,
                                cfl: float = 0.2, filter_order: int | None = 36) -> ProfileSet:
    """Order-0 profiles of the zero-electron-mass limit."""
    _check_positive(init.n_i, "initial ion density")
    return _solve_zero_electron(grid, [init], laws, lam, t_end, 0, nodes, cfl, filter_order)


def solve_zero_electron_order1(order0: ProfileSet, init1: ProfileInit,
                               filter_order: int | None = 36) -> ProfileSet:
    """Orders 0 and 1; order 0 is re-integrated alongside with the same step sequence."""
    if order0.regime is not Regime.ZERO_ELECTRON:
        raise ValueError("order-0 profiles belong to another regime")
    return _solve_zero_electron(order0.grid, [order0.inits[0], init1], order0.laws,
                                order0.lam, order0.t_end, 1, order0.times.size,
                                order0.cfl, filter_order)


# -- infinity-ion regime ------------------------------------------------------------

def _infinity_ion_rhs0(grid, y, law_e, lam):
    d = grid.derivative
    n_i, u_i, n_e, u_e = y
    phi = potential(grid, n_e, n_i, lam)
    return phi, (-d(n_i * u_i), -u_i * d(u_i), -d(n_e * u_e),
                 -u_e * d(u_e) - d(enthalpy(law_e, n_e) - phi))


def _infinity_ion_rhs1(grid, y0, phi0, y1, laws, lam):
    d = grid.derivative
    law_e, law_i = laws
    n_i, u_i, n_e, u_e = y0
    n_i1, u_i1, n_e1, u_e1 = y1
    phi1 = potential(grid, n_e1, n_i1, lam)
    hp_e = np.asarray(enthalpy_derivative(law_e, n_e))
    return phi1, (
        -d(n_i * u_i1 + n_i1 * u_i),
        -d(u_i * u_i1) - d(enthalpy(law_i, n_i) + phi0),
        -d(n_e * u_e1 + n_e1 * u_e),
        -d(u_e * u_e1) - d(hp_e * n_e1 - phi1),
    )


def _solve_infinity_ion(grid, inits, laws, lam, t_end, m, nodes, cfl, filter_order):
    law_e, law_i = laws
    times = chebyshev_nodes(t_end, nodes)
    slope_min = float(grid.derivative(inits[0].u_i).min())

    def rhs(y, t):
        if 1.0 + t * min(slope_min, 0.0) <= 0.0:
            raise CharacteristicCrossing(f"ion characteristics cross before t={t:.6g}")
        if min(y[0].min(), y[2].min()) < N_FLOOR:
            raise BlowUp("density below floor in the limit system")
        phi0, k0 = _infinity_ion_rhs0(grid, y[:4], law_e, lam)
        out = list(k0)
        if m >= 1:
            _, k1 = _infinity_ion_rhs1(grid, y[:4], phi0, y[4:], laws, lam)
            out += list(k1)
        if filter_order is not None:
            out = [grid.apply_filter(f, filter_order) for f in out]
        return tuple(out)

    def dt_max(y, t):
        c = np.sqrt(pressure_derivative(law_e, y[2]))
        speed = max(float(np.max(np.abs(y[3]) + c)), float(np.max(np.abs(y[1]))), 1e-12)
        return cfl * grid.dx / speed

    y0 = []
    for init in inits[:m + 1]:
        y0 += [np.array(getattr(init, v), float) for v in ("n_i", "u_i", "n_e", "u_e")]
    ys = [tuple(y0)] + march(rhs, tuple(y0), 0.0, times[1:], dt_max)
    if 1.0 + t_end * min(slope_min, 0.0) <= 0.0:
        raise CharacteristicCrossing("ion characteristics cross before t_end")

    per_order = [{k: [] for k in ("n_e", "u_e", "n_i", "u_i", "phi",
                                  "dn_e", "du_e", "dn_i", "du_i")} for _ in range(m + 1)]
    for y in ys:
        phi0, k0 = _infinity_ion_rhs0(grid, y[:4], law_e, lam)
        parts = [(y[:4], phi0, k0)]
        if m >= 1:
            phi1, k1 = _infinity_ion_rhs1(grid, y[:4], phi0, y[4:8], laws, lam)
            parts.append((y[4:8], phi1, k1))
        for store, (state, phi, k) in zip(per_order, parts):
            for name, val in zip(("n_i", "u_i", "n_e", "u_e"), state):
                store[name].append(val)
            for name, val in zip(("dn_i", "du_i", "dn_e", "du_e"), k):
                store[name].append(val)
            store["phi"].append(phi)
    orders = [OrderProfile(**{k: np.array(v) for k, v in store.items()}) for store in per_order]
    return ProfileSet(Regime.INFINITY_ION, grid, tuple(laws), lam, times, orders,
                      list(inits[:m + 1]), cfl)


def solve_infinity_ion_leading(grid: Grid, init: ProfileInit, laws: Sequence[GasLaw],
                               lam: float, t_end: float, nodes: int = 25,
                               cfl: float = 0.2, filter_order: int | None = 36) -> ProfileSet:
    """Order-0 profiles of the infinity-ion-mass limit."""
    _check_positive(init.n_i, "initial ion density")
    _check_positive(init.n_e, "initial electron density")
    return _solve_infinity_ion(grid, [init], laws, lam, t_end, 0, nodes, cfl, filter_order)


def solve_infinity_ion_order1(order0: ProfileSet, init1: ProfileInit,
                              filter_order: int | None = 36) -> ProfileSet:
    if order0.regime is not Regime.INFINITY_ION:
        raise ValueError("order-0 profiles belong to another regime")
    return _solve_infinity_ion(order0.grid, [order0.inits[0], init1], order0.laws,
                               order0.lam, order0.t_end, 1, order0.times.size,
                               order0.cfl, filter_order)


def build_profiles(regime, grid: Grid, inits: Sequence[ProfileInit], laws: Sequence[GasLaw],
                   lam: float, t_end: float, m: int, nodes: int = 25, cfl: float = 0.2,
                   filter_order: int | None = 36) -> ProfileSet:
    """Profiles of orders ``0..m`` (``m`` in {0, 1}) in one integration."""
    regime = Regime(regime)
    if m not in (0, 1):
        raise ValueError("only orders m = 0 and m = 1 are implemented")
    if len(inits) < m + 1:
        raise ValueError(f"need initial data for orders 0..{m}")
    _check_positive(inits[0].n_i, "initial ion density")
    if regime is Regime.ZERO_ELECTRON:
        return _solve_zero_electron(grid, list(inits), laws, lam, t_end, m, nodes, cfl,
                                    filter_order)
    if regime is Regime.INFINITY_ION:
        _check_positive(inits[0].n_e, "initial electron density")
        return _solve_infinity_ion(grid, list(inits), laws, lam, t_end, m, nodes, cfl,
                                   filter_order)
    raise ValueError("profiles exist only for the two limit regimes")


def _check_positive(f, what):
    if np.any(~(np.asarray(f) > 0)):
        raise ValueError(f"{what} must be positive")
