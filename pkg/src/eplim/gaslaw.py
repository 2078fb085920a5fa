"""Power-law pressure, enthalpy and the mass-scaling parameters.

The enthalpy of species ``nu`` is the primitive of ``p'(n)/n`` normalised by
``h(1) = 0``.  For ``p(n) = a**2 * n**gamma``::

    h(n) = a**2 * log(n)                                  gamma == 1
    h(n) = a**2 * gamma / (gamma - 1) * (n**(gamma-1) - 1)  gamma > 1
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class GasLawDomainError(ValueError):
    """Raised when a density or enthalpy lies outside the law's domain."""


@dataclass(frozen=True)
class GasLaw:
    """Pressure law ``p(n) = a**2 n**gamma`` with ``a > 0`` and ``gamma >= 1``."""

    a: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"sound-speed coefficient must be positive, got {self.a}")
        if not self.gamma >= 1:
            raise ValueError(f"adiabatic exponent must be >= 1, got {self.gamma}")

    @property
    def isothermal(self) -> bool:
        return self.gamma == 1.0

    @property
    def enthalpy_floor(self) -> float:
        """Infimum of the enthalpy range (``-inf`` when isothermal)."""
        if self.isothermal:
            return -math.inf
        return -self.a**2 * self.gamma / (self.gamma - 1.0)

    def to_dict(self) -> dict:
        return {"a": self.a, "gamma": self.gamma}


def _check_density(n):
    n = np.asarray(n, dtype=float)
    if np.any(~(n > 0)):
        raise GasLawDomainError("density must be strictly positive")
    return n


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def pressure(law: GasLaw, n):
    n = _check_density(n)
    return _scalar_or_array(law.a**2 * n**law.gamma)


def pressure_derivative(law: GasLaw, n):
    n = _check_density(n)
    return _scalar_or_array(law.a**2 * law.gamma * n ** (law.gamma - 1.0))


def enthalpy(law: GasLaw, n):
    n = _check_density(n)
    if law.isothermal:
        h = law.a**2 * np.log(n)
    else:
        g = law.gamma
        h = law.a**2 * g / (g - 1.0) * np.expm1((g - 1.0) * np.log(n))
    return _scalar_or_array(h)


def enthalpy_inverse(law: GasLaw, h):
    """Density ``n`` with ``enthalpy(law, n) == h``."""
    h = np.asarray(h, dtype=float)
    if law.isothermal:
        n = np.exp(h / law.a**2)
    else:
        g = law.gamma
        base = 1.0 + h * (g - 1.0) / (law.a**2 * g)
        if np.any(~(base > 0)):
            raise GasLawDomainError(
                f"enthalpy below the admissible floor {law.enthalpy_floor}")
        n = np.exp(np.log1p(h * (g - 1.0) / (law.a**2 * g)) / (g - 1.0))
    return _scalar_or_array(n)


def enthalpy_derivative(law: GasLaw, n, order: int = 1):
    """``d^k h / dn^k`` for ``k = order >= 1``.

    Uses ``h'(n) = a^2 gamma n^(gamma-2)`` so that
    ``h^(k)(n) = a^2 gamma (gamma-2)(gamma-3)...(gamma-k) n^(gamma-1-k)``.
    """
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    n = _check_density(n)
    coef = law.a**2 * law.gamma
    for j in range(2, order + 1):
        coef *= law.gamma - j
    return _scalar_or_array(coef * n ** (law.gamma - 1.0 - order))


def enthalpy_taylor_terms(law: GasLaw, n0, corrections: Sequence, order: int,
                          max_order: int = 4) -> list:
    """Coefficients of ``delta**j`` (``j = 0..order``) in ``h(n0 + sum_j delta**j n_j)``.

    ``corrections[j-1]`` holds ``n_j``; ``delta`` stands for ``eps**2``.  The
    ``j = 1`` coefficient is ``h'(n0) n_1``; for ``j >= 2`` the coefficient is
    ``h'(n0) n_j`` plus the composite nonlinear term built from ``n_1..n_{j-1}``.
    """
    if order > max_order:
        raise ValueError(f"order {order} exceeds the configured maximum {max_order}")
    if len(corrections) < order:
        raise ValueError("need at least `order` correction fields")
    n0 = _check_density(n0)
    # x(delta) = sum_{j>=1} delta^j n_j as truncated power series, x_pows[k] = x^k
    x = [np.zeros_like(n0)] + [np.asarray(c, dtype=float) + 0.0 * n0
                               for c in corrections[:order]]
    terms = [np.asarray(enthalpy(law, n0), dtype=float) + 0.0 * n0]
    terms += [np.zeros_like(n0) for _ in range(order)]
    power = [np.ones_like(n0)] + [np.zeros_like(n0) for _ in range(order)]
    factorial = 1.0
    for k in range(1, order + 1):
        power = _series_mul(power, x, order)
        factorial *= k
        dk = np.asarray(enthalpy_derivative(law, n0, k), dtype=float) / factorial
        for j in range(k, order + 1):
            terms[j] = terms[j] + dk * power[j]
    return terms


def _series_mul(a, b, order):
    out = [np.zeros_like(a[0]) for _ in range(order + 1)]
    for i in range(order + 1):
        for j in range(order + 1 - i):
            out[i + j] = out[i + j] + a[i] * b[j]
    return out


class Regime(str, enum.Enum):
    ZERO_ELECTRON = "zero-electron"
    INFINITY_ION = "infinity-ion"
    RAW = "raw"


@dataclass(frozen=True)
class ScalingParams:
    """Mass ratio root ``eps = sqrt(m_e/m_i)``, Debye length and active regime.

    ``ZERO_ELECTRON`` fixes ``m_i = 1, m_e = eps**2``; ``INFINITY_ION`` fixes
    ``m_e = 1, m_i = eps**-2``.  ``RAW`` keeps user masses.
    """

    eps: float
    lam: float = 1.0
    regime: Regime = Regime.ZERO_ELECTRON
    raw_masses: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.regime is Regime.RAW:
            if self.raw_masses is None:
                raise ValueError("RAW regime needs (m_e, m_i)")
            m_e, m_i = self.raw_masses
            if not math.isclose(self.eps, math.sqrt(m_e / m_i), rel_tol=1e-12):
                raise ValueError("eps inconsistent with raw masses")

    @classmethod
    def from_masses(cls, m_e: float, m_i: float, lam: float = 1.0) -> "ScalingParams":
        if m_e <= 0 or m_i <= 0:
            raise ValueError("masses must be positive")
        return cls(math.sqrt(m_e / m_i), lam, Regime.RAW, (m_e, m_i))

    @property
    def masses(self) -> tuple[float, float]:
        if self.regime is Regime.ZERO_ELECTRON:
            return self.eps**2, 1.0
        if self.regime is Regime.INFINITY_ION:
            return 1.0, self.eps**-2
        return tuple(self.raw_masses)
