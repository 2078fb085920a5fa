"""Spectral Poisson and Poisson-Boltzmann solvers on the periodic grid."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .gaslaw import GasLaw, enthalpy, enthalpy_derivative, enthalpy_inverse
from .grid import Grid

log = logging.getLogger(__name__)


class CompatibilityError(ValueError):
    """Source of a periodic Poisson problem has nonzero mean (net charge)."""


class NonConvergence(RuntimeError):
    pass


def solve_poisson(grid: Grid, source, lam: float = 1.0, rtol: float = 1e-10,
                  atol: float = 1e-14) -> np.ndarray:
    """Mean-zero ``phi`` with ``-lam**2 phi'' = source``.

    The mean of ``source`` must vanish up to ``rtol * ||source||_0`` (or
    ``atol``, which absorbs round-off on near-neutral states).
    """
    source = np.asarray(source, dtype=float)
    mean = abs(grid.mean(source))
    if mean > max(rtol * grid.sobolev_norm(source, 0), atol):
        raise CompatibilityError(
            f"source mean {grid.mean(source):.3e} violates periodic solvability")
    sh = np.fft.rfft(source)
    kk = grid.wavenumbers
    out = np.zeros_like(sh)
    out[1:] = sh[1:] / (lam**2 * kk[1:] ** 2)
    return np.fft.irfft(out, n=grid.n_points)


def solve_screened(grid: Grid, coeff, rhs, lam: float = 1.0, tol: float = 1e-13,
                   max_iter: int = 1000) -> np.ndarray:
    """Solve ``-lam**2 v'' + coeff * v = rhs`` for a positive coefficient field.

    Fixed-point iteration preconditioned by the constant-coefficient operator
    with ``c0 = (max coeff + min coeff) / 2``; contraction factor is
    ``(max - min) / (max + min) < 1``.  Falls back to a dense solve if the
    iteration stalls.
    """
    coeff = np.asarray(coeff, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    cmin, cmax = float(coeff.min()), float(coeff.max())
    if not cmin > 0:
        raise ValueError("screening coefficient must be positive")
    c0 = 0.5 * (cmin + cmax)
    symbol = lam**2 * grid.wavenumbers**2 + c0
    dc = coeff - c0
    rhs_norm = max(float(np.linalg.norm(rhs)), 1e-300)
    v = np.fft.irfft(np.fft.rfft(rhs) / symbol, n=grid.n_points)
    for _ in range(max_iter):
        v_new = np.fft.irfft(np.fft.rfft(rhs - dc * v) / symbol, n=grid.n_points)
        change = float(np.linalg.norm(v_new - v))
        v = v_new
        if change <= tol * rhs_norm / c0 or change == 0.0:
            return v
    log.debug("screened solve fixed point stalled; using dense fallback")
    return _dense_screened(grid, coeff, rhs, lam)


def _dense_screened(grid, coeff, rhs, lam):
    n = grid.n_points
    eye = np.eye(n)
    d2 = np.stack([grid.derivative(col, 2) for col in eye], axis=1)
    return np.linalg.solve(-lam**2 * d2 + np.diag(coeff), rhs)


@dataclass
class PoissonBoltzmannResult:
    phi: np.ndarray
    n_e: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)


def poisson_boltzmann_residual(grid: Grid, phi, n_i, lam, law_e: GasLaw) -> np.ndarray:
    return -lam**2 * grid.derivative(phi, 2) + enthalpy_inverse(law_e, phi) - n_i


def solve_poisson_boltzmann(grid: Grid, n_i, lam: float = 1.0, law_e: GasLaw = GasLaw(),
                            max_iter: int = 50, tol: float = 1e-11,
                            phi_guess=None, full_output: bool = False):
    """Solve ``-lam**2 phi'' = n_i - h_e^{-1}(phi)`` by damped Newton.

    The additive constant of ``phi`` is fixed by the equation itself, which
    forces ``integral(n_i - n_e) = 0``.  Returns ``(phi, n_e)``, or a
    :class:`PoissonBoltzmannResult` if ``full_output``.
    """
    n_i = np.asarray(n_i, dtype=float)
    if np.any(~(n_i > 0)):
        raise ValueError("ion density must be positive")
    target = tol * max(1.0, grid.sobolev_norm(n_i, 0))
    if phi_guess is None:
        phi = _initial_guess(grid, n_i, lam, law_e)
    else:
        phi = np.array(phi_guess, dtype=float)

    res = poisson_boltzmann_residual(grid, phi, n_i, lam, law_e)
    rnorm = grid.sobolev_norm(res, 0)
    history = [rnorm]
    it = 0
    while rnorm > target:
        if it >= max_iter:
            raise NonConvergence(
                f"Poisson-Boltzmann Newton stalled at residual {rnorm:.3e} "
                f"after {max_iter} iterations")
        it += 1
        n_e = enthalpy_inverse(law_e, phi)
        jac = 1.0 / enthalpy_derivative(law_e, n_e)
        step = solve_screened(grid, jac, -res, lam)
        t = 1.0
        for _ in range(21):
            trial = phi + t * step
            try:
                trial_res = poisson_boltzmann_residual(grid, trial, n_i, lam, law_e)
            except ValueError:
                t *= 0.5
                continue
            trial_norm = grid.sobolev_norm(trial_res, 0)
            if trial_norm < rnorm or trial_norm <= target:
                break
            t *= 0.5
        else:
            raise NonConvergence("line search failed to reduce the residual")
        phi, res, rnorm = trial, trial_res, trial_norm
        history.append(rnorm)

    n_e = enthalpy_inverse(law_e, phi)
    if full_output:
        return PoissonBoltzmannResult(phi, n_e, it, history)
    return phi, n_e


def _initial_guess(grid, n_i, lam, law_e):
    nbar = grid.mean(n_i)
    hp = enthalpy_derivative(law_e, nbar)
    coeff = np.full(grid.n_points, 1.0 / hp)
    return enthalpy(law_e, nbar) + solve_screened(grid, coeff, n_i - nbar, lam)
