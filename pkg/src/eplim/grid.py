"""Uniform periodic 1-D grid with Fourier differentiation and Sobolev norms.

Fields are plain ``float64`` numpy arrays of length ``grid.n_points``; every
operation here returns a new array.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class NonFiniteFieldError(FloatingPointError):
    pass


@dataclass(frozen=True)
class Grid:
    n_points: int
    length: float = 1.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False,
                         hash=False)

    def __post_init__(self):
        n = self.n_points
        if n < 8 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 8, got {n}")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dx

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Physical wavenumbers ``2 pi k / L`` in ``rfft`` order."""
        k = np.arange(self.n_points // 2 + 1)
        return 2.0 * math.pi * k / self.length

    def _multiplier(self, order: int) -> np.ndarray:
        key = ("d", order)
        if key not in self._cache:
            mult = (1j * self.wavenumbers) ** order
            if order % 2:
                mult[-1] = 0.0  # Nyquist
            self._cache[key] = mult
        return self._cache[key]

    def filter_weights(self, order: int = 36, strength: float = math.log(1e16)) -> np.ndarray:
        key = ("filter", order, strength)
        if key not in self._cache:
            kk = np.arange(self.n_points // 2 + 1) / (self.n_points // 2)
            self._cache[key] = np.exp(-strength * kk**order)
        return self._cache[key]

    # -- field operations -------------------------------------------------

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_points)

    def constant(self, c: float) -> np.ndarray:
        return np.full(self.n_points, float(c))

    def derivative(self, f, order: int = 1) -> np.ndarray:
        if order < 1:
            raise ValueError("derivative order must be >= 1")
        f = check_finite(f)
        return np.fft.irfft(np.fft.rfft(f) * self._multiplier(order), n=self.n_points)

    def antiderivative(self, f) -> np.ndarray:
        """Mean-zero primitive of a mean-zero field."""
        fh = np.fft.rfft(check_finite(f))
        kk = self.wavenumbers
        out = np.zeros_like(fh)
        out[1:] = fh[1:] / (1j * kk[1:])
        out[-1] = 0.0
        return np.fft.irfft(out, n=self.n_points)

    def apply_filter(self, f, order: int = 36) -> np.ndarray:
        return np.fft.irfft(np.fft.rfft(f) * self.filter_weights(order), n=self.n_points)

    def mean(self, f) -> float:
        # sequential accumulation: reproduces a naive left-to-right sum exactly
        return float(np.cumsum(f)[-1] / self.n_points)

    def zero_mean(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return f - self.mean(f)

    def integral(self, f) -> float:
        return float(np.sum(f) * self.dx)

    def inner(self, f, g) -> float:
        return float(np.dot(f, g) * self.dx)

    def sobolev_norm(self, f, s: int = 0) -> float:
        """``sqrt(L * sum_k (1 + kappa_k^2)^s |fhat_k|^2)`` over all ``N`` modes."""
        if s < 0:
            raise ValueError("Sobolev index must be >= 0")
        fh = np.fft.rfft(check_finite(f)) / self.n_points
        weight = np.full(fh.shape, 2.0)
        weight[0] = 1.0
        weight[-1] = 1.0
        power = weight * np.abs(fh) ** 2 * (1.0 + self.wavenumbers**2) ** s
        return math.sqrt(self.length * float(np.sum(power)))

    def evaluate(self, f, points) -> np.ndarray:
        """Trigonometric interpolant of ``f`` at arbitrary points."""
        fh = np.fft.rfft(f) / self.n_points
        weight = np.full(fh.shape, 2.0)
        weight[0] = 1.0
        weight[-1] = 1.0
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        phase = np.exp(1j * np.outer(pts, self.wavenumbers))
        # Nyquist term uses cos only
        coeff = weight * fh
        coeff[-1] = fh[-1].real
        return np.real(phase @ coeff)

    def resample(self, f, n_points: int) -> np.ndarray:
        """Spectral zero-padding or truncation onto a grid with ``n_points``."""
        fh = np.fft.rfft(f) / self.n_points
        m = n_points // 2 + 1
        out = np.zeros(m, dtype=complex)
        k = min(m, fh.size)
        out[:k] = fh[:k]
        if n_points > self.n_points:
            out[self.n_points // 2] *= 0.5  # split old Nyquist evenly
        elif n_points < self.n_points:
            out[-1] = out[-1].real
        return np.fft.irfft(out * n_points, n=n_points)

    def extrema(self, f, refine: int = 32) -> tuple[float, float]:
        """Min and max of the trigonometric interpolant (not just grid samples)."""
        fine_n = self.n_points * refine
        fine = self.resample(f, fine_n)
        df = self.derivative(f)
        d2f = self.derivative(f, 2)
        out = []
        for idx in (int(np.argmin(fine)), int(np.argmax(fine))):
            x = idx * self.length / fine_n
            for _ in range(8):
                d2 = self.evaluate(d2f, x)[0]
                if d2 == 0:
                    break
                step = self.evaluate(df, x)[0] / d2
                x -= step
                if abs(step) < 1e-15:
                    break
            out.append(float(self.evaluate(f, x)[0]))
        return out[0], out[1]


def check_finite(f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteFieldError("field contains NaN or Inf")
    return f


# -- serialization ----------------------------------------------------------

_HEADER = struct.Struct("<qd")


def write_checkpoint(path, grid: Grid, values) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.shape != (grid.n_points,):
        raise ValueError("field length does not match grid")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.n_points, grid.length))
        fh.write(values.tobytes())


def read_checkpoint(path) -> tuple[Grid, np.ndarray]:
    data = Path(path).read_bytes()
    n, length = _HEADER.unpack_from(data)
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if values.size != n:
        raise ValueError(f"checkpoint {path} truncated: {values.size} of {n} values")
    return Grid(int(n), float(length)), values.astype(float)


def write_csv(path, grid: Grid, values) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "value"])
        for xk, v in zip(grid.x, values):
            writer.writerow([repr(float(xk)), repr(float(v))])
