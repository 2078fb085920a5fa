"""Full bipolar Euler-Poisson dynamics in enthalpy form.

    n_e' = -(n_e u_e)_x      u_e' = -u_e u_e_x - (h_e(n_e) - phi)_x / m_e
    n_i' = -(n_i u_i)_x      u_i' = -u_i u_i_x - (h_i(n_i) + phi)_x / m_i
    -lam^2 phi_xx = n_i - n_e   (phi mean-zero, re-solved at every stage)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import comb

from .elliptic import CompatibilityError, solve_poisson
from .gaslaw import GasLaw, ScalingParams, enthalpy, enthalpy_derivative, pressure_derivative
from .grid import Grid

N_FLOOR = 1e-8
BLOWUP_NORM = 1e6
NEUTRALITY_TOL = 1e-10


class BlowUp(RuntimeError):
    """Run rejected: density floor violated or a field norm exploded."""


@dataclass(frozen=True)
class FluidState:
    n: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class BipolarState:
    grid: Grid
    electron: FluidState
    ion: FluidState
    phi: np.ndarray
    time: float = 0.0

    @classmethod
    def from_fields(cls, grid: Grid, n_e, u_e, n_i, u_i, lam: float = 1.0,
                    time: float = 0.0) -> "BipolarState":
        """Build a state, solving ``-lam^2 phi'' = n_i - n_e`` for ``phi``."""
        n_e, u_e, n_i, u_i = (np.array(f, dtype=float) for f in (n_e, u_e, n_i, u_i))
        phi = potential(grid, n_e, n_i, lam)
        return cls(grid, FluidState(n_e, u_e), FluidState(n_i, u_i), phi, time)

    def fields(self) -> tuple[np.ndarray, ...]:
        return self.electron.n, self.electron.u, self.ion.n, self.ion.u

    def neutrality(self) -> float:
        return self.grid.integral(self.ion.n - self.electron.n)


def potential(grid: Grid, n_e, n_i, lam: float) -> np.ndarray:
    charge = n_i - n_e
    net = grid.integral(charge)
    if abs(net) > NEUTRALITY_TOL:
        raise CompatibilityError(f"net charge {net:.3e} on the torus")
    return solve_poisson(grid, grid.zero_mean(charge), lam)


def _check_floor(n_e, n_i, n_floor):
    if n_e.min() < n_floor or n_i.min() < n_floor:
        raise BlowUp(f"density below floor {n_floor:g}")


def rhs_bipolar(state: BipolarState, params: ScalingParams,
                laws: Sequence[GasLaw], n_floor: float = N_FLOOR):
    """Tendencies ``(dn_e, du_e, dn_i, du_i)`` with ``phi`` re-solved from the densities."""
    grid = state.grid
    law_e, law_i = laws
    m_e, m_i = params.masses
    n_e, u_e, n_i, u_i = state.fields()
    _check_floor(n_e, n_i, n_floor)
    phi = potential(grid, n_e, n_i, params.lam)
    d = grid.derivative
    dn_e = -d(n_e * u_e)
    du_e = -u_e * d(u_e) - d(enthalpy(law_e, n_e) - phi) / m_e
    dn_i = -d(n_i * u_i)
    du_i = -u_i * d(u_i) - d(enthalpy(law_i, n_i) + phi) / m_i
    return dn_e, du_e, dn_i, du_i


def max_wave_speed(state: BipolarState, params: ScalingParams,
                   laws: Sequence[GasLaw]) -> float:
    """``max |u_nu| + sqrt(p_nu'(n_nu) / m_nu)`` over species and grid points."""
    speeds = []
    for fluid, law, mass in zip((state.electron, state.ion), laws, params.masses):
        c = np.sqrt(pressure_derivative(law, fluid.n) / mass)
        speeds.append(float(np.max(np.abs(fluid.u) + c)))
    return max(speeds)


# -- generic SSP-RK3 ----------------------------------------------------------

def ssprk3_step(rhs: Callable, y: tuple, t: float, dt: float) -> tuple:
    """One Shu-Osher SSP-RK3 step for a tuple of arrays."""
    k1 = rhs(y, t)
    y1 = tuple(a + dt * b for a, b in zip(y, k1))
    k2 = rhs(y1, t + dt)
    y2 = tuple(0.75 * a + 0.25 * (b + dt * c) for a, b, c in zip(y, y1, k2))
    k3 = rhs(y2, t + 0.5 * dt)
    return tuple(a / 3.0 + 2.0 / 3.0 * (b + dt * c) for a, b, c in zip(y, y2, k3))


def march(rhs: Callable, y0: tuple, t0: float, sample_times: Sequence[float],
          dt_max: Callable[[tuple, float], float], on_step: Callable | None = None,
          max_steps: int = 10_000_000) -> list[tuple]:
    """Advance ``y' = rhs(y, t)`` and return the state at every sample time.

    Steps never cross a sample time.  Before every step ``dt_max`` is
    re-evaluated at the current state and the remaining distance to the next
    sample is divided into the fewest equal pieces no larger than it; one
    such piece is taken, so the last step lands exactly on the sample.
    """
    samples = []
    y, t = y0, t0
    steps = 0
    for ts in sample_times:
        if ts < t - 1e-14:
            raise ValueError("sample times must be nondecreasing and >= t0")
        while ts - t > 1e-14 * max(1.0, abs(ts)):
            h = dt_max(y, t)
            if not h > 0 or not math.isfinite(h):
                raise BlowUp("non-positive or non-finite time step")
            n_sub = max(1, math.ceil((ts - t) / h - 1e-9))
            h = (ts - t) / n_sub
            y = ssprk3_step(rhs, y, t, h)
            t = t + h
            steps += 1
            if on_step is not None:
                on_step(y, t)
            if steps > max_steps:
                raise BlowUp("step limit exceeded")
            if n_sub == 1:
                t = ts
        samples.append(y)
    return samples


# -- trajectories -------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: list[BipolarState]
    steps: int = 0
    initial_mass: tuple[float, float] = (0.0, 0.0)

    def mass_drift(self) -> tuple[float, float]:
        """Worst relative mass change per species over the samples."""
        g = self.states[0].grid
        out = []
        for k, m0 in enumerate(self.initial_mass):
            drift = max(abs(g.integral(s.fields()[2 * k]) - m0) for s in self.states)
            out.append(drift / abs(m0))
        return tuple(out)

    def neutrality_drift(self) -> float:
        q0 = self.states[0].neutrality()
        return max(abs(s.neutrality() - q0) for s in self.states)


def integrate(initial: BipolarState, params: ScalingParams, laws: Sequence[GasLaw],
              t_end: float, cfl: float = 0.4, sample_times: Sequence[float] | None = None,
              n_floor: float = N_FLOOR, filter_order: int | None = 36,
              mass_rtol: float = 1e-8) -> Trajectory:
    """SSP-RK3 integration with ``dt = cfl dx / max_wave_speed``.

    Tendencies pass through an exponential filter of order ``filter_order``
    (``None`` disables it).  Raises :class:`BlowUp` on density-floor
    violation, field norms above ``1e6``, or mass drift beyond ``mass_rtol``.
    """
    if not t_end > initial.time:
        raise ValueError("t_end must exceed the initial time")
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    grid = initial.grid
    if sample_times is None:
        sample_times = [t_end]
    sample_times = [float(t) for t in sample_times]
    if sample_times[-1] > t_end + 1e-14:
        raise ValueError("sample times beyond t_end")

    def tendencies(y, t):
        st = BipolarState(grid, FluidState(y[0], y[1]), FluidState(y[2], y[3]),
                          initial.phi, t)
        k = rhs_bipolar(st, params, laws, n_floor)
        if filter_order is not None:
            k = tuple(grid.apply_filter(f, filter_order) for f in k)
        return k

    def dt_max(y, t):
        st = BipolarState(grid, FluidState(y[0], y[1]), FluidState(y[2], y[3]),
                          initial.phi, t)
        return cfl * grid.dx / max_wave_speed(st, params, laws)

    steps = [0]

    def guard(y, t):
        steps[0] += 1
        if min(y[0].min(), y[2].min()) < n_floor:
            raise BlowUp(f"density below floor at t={t:.6g}")
        if max(float(np.max(np.abs(f))) for f in y) > BLOWUP_NORM or \
                not all(np.all(np.isfinite(f)) for f in y):
            raise BlowUp(f"field norm exceeded {BLOWUP_NORM:g} at t={t:.6g}")

    y0 = initial.fields()
    times = [initial.time] + [t for t in sample_times if t > initial.time + 1e-14]
    ys = march(tendencies, y0, initial.time, times[1:], dt_max, guard)
    states = [initial]
    for t, y in zip(times[1:], ys):
        phi = potential(grid, y[0], y[2], params.lam)
        states.append(BipolarState(grid, FluidState(*y[:2]), FluidState(*y[2:]), phi, t))
    mass0 = (grid.integral(initial.electron.n), grid.integral(initial.ion.n))
    traj = Trajectory(np.array(times), states, steps[0], mass0)
    drift = traj.mass_drift()
    if max(drift) > mass_rtol:
        raise BlowUp(f"mass drift {max(drift):.3e} exceeds {mass_rtol:g}")
    return traj


# -- symmetrizer and energy ----------------------------------------------------

@dataclass(frozen=True)
class SymmetrizerDiag:
    """Diagonal of ``A_nu^0 = diag(h_nu'(n_nu), n_nu)`` for each species.

    ``velocity_scale`` is the factor multiplying ``U_nu`` in the energy
    variable, ``sqrt(m_nu)``: ``eps`` for zero-electron electrons and
    ``1/eps`` for infinity-ion ions.
    """

    density_weight: tuple[np.ndarray, np.ndarray]
    velocity_weight: tuple[np.ndarray, np.ndarray]
    velocity_scale: tuple[float, float]

    def min_weight(self) -> float:
        return float(min(w.min() for w in self.density_weight + self.velocity_weight))


def symmetrizer(base_densities, params: ScalingParams, laws: Sequence[GasLaw],
                n_floor: float = N_FLOOR) -> SymmetrizerDiag:
    n_e, n_i = (np.asarray(n, dtype=float) for n in base_densities)
    if min(n_e.min(), n_i.min()) < n_floor:
        raise BlowUp("base density below floor")
    dens = tuple(np.asarray(enthalpy_derivative(law, n)) for law, n in zip(laws, (n_e, n_i)))
    scale = tuple(math.sqrt(m) for m in params.masses)
    return SymmetrizerDiag(dens, (n_e, n_i), scale)


def energy_functional(grid: Grid, state_diff, phi_diff, base_densities,
                      params: ScalingParams, laws: Sequence[GasLaw], s: int = 0) -> float:
    """Weighted quadratic form of the difference fields.

    ``state_diff = (N_e, U_e, N_i, U_i)``.  With ``W_nu = (N_nu, sqrt(m_nu) U_nu)``
    the value is ``sum_j C(s, j) [sum_nu <A_nu^0 d^j W_nu, d^j W_nu>
    + lam^2 ||d^j Phi_x||^2]`` so that for ``A^0 = I`` the form equals the
    squared discrete ``H^s`` norm.
    """
    sym = symmetrizer(base_densities, params, laws)
    N_e, U_e, N_i, U_i = (np.asarray(f, dtype=float) for f in state_diff)
    comps = [
        (sym.density_weight[0], N_e), (sym.velocity_weight[0], sym.velocity_scale[0] * U_e),
        (sym.density_weight[1], N_i), (sym.velocity_weight[1], sym.velocity_scale[1] * U_i),
    ]
    grad_phi = grid.derivative(phi_diff)
    total = 0.0
    for j in range(s + 1):
        w = float(comb(s, j, exact=True))
        for weight, f in comps:
            dj = f if j == 0 else grid.derivative(f, j)
            total += w * grid.inner(weight * dj, dj)
        dphi = grad_phi if j == 0 else grid.derivative(grad_phi, j)
        total += w * params.lam**2 * grid.inner(dphi, dphi)
    return total

