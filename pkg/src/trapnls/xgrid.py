"""Periodic x window and its dual xi grid.

Fourier convention: g_hat(xi) = (1/2pi) int e^{-i x xi} g(x) dx, inverse
g(x) = int e^{i x xi} g_hat(xi) dxi.  On the centred grid x_j = -L/2 + j dx the
discrete transform is g_hat(xi_k) = (dx/2pi) (-1)^k FFT(g)_k with xi_k = 2pi k/L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class XGrid:
    L: float
    N: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValidationError(f"window length must be positive, got {self.L}")
        if self.N < 2 or self.N & (self.N - 1):
            raise ValidationError(f"N_x must be a power of two, got {self.N}")

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def dxi(self) -> float:
        return 2 * math.pi / self.L

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L / 2 + self.dx * np.arange(self.N)

    @cached_property
    def k(self) -> np.ndarray:
        """Signed integer wavenumbers in FFT order."""
        return np.fft.fftfreq(self.N, 1.0 / self.N).astype(np.int64)

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequencies in FFT order."""
        return self.dxi * self.k

    @cached_property
    def xi_sorted(self) -> np.ndarray:
        return np.fft.fftshift(self.xi)

    @cached_property
    def _sign(self) -> np.ndarray:
        return np.where(self.k % 2 == 0, 1.0, -1.0)

    def hat(self, g: np.ndarray, axis: int = 0) -> np.ndarray:
        """Samples -> Fourier coefficients (FFT order) along ``axis``."""
        g = np.moveaxis(np.asarray(g), axis, 0)
        out = np.fft.fft(g, axis=0) * (self.dx / (2 * math.pi))
        out *= self._sign.reshape((-1,) + (1,) * (g.ndim - 1))
        return np.moveaxis(out, 0, axis)

    def unhat(self, ghat: np.ndarray, axis: int = 0) -> np.ndarray:
        ghat = np.moveaxis(np.asarray(ghat), axis, 0)
        s = self._sign.reshape((-1,) + (1,) * (ghat.ndim - 1))
        out = np.fft.ifft(ghat * s, axis=0) * (2 * math.pi / self.dx)
        return np.moveaxis(out, 0, axis)

    def propagator(self, t: float) -> np.ndarray:
        """Symbol of e^{-it d_xx}: e^{i t xi^2} in FFT order."""
        return np.exp(1j * t * self.xi ** 2)

    @classmethod
    def dual_of(cls, xi_sorted: np.ndarray) -> "XGrid":
        """The window whose sorted dual grid is ``xi_sorted``."""
        xi_sorted = np.asarray(xi_sorted, dtype=float)
        n = len(xi_sorted)
        if n < 2:
            raise ValidationError("need at least two xi nodes")
        dxi = xi_sorted[1] - xi_sorted[0]
        grid = cls(2 * math.pi / dxi, n)
        if not np.allclose(grid.xi_sorted, xi_sorted, rtol=0, atol=1e-9 * max(1.0, abs(xi_sorted).max())):
            raise ValidationError("xi grid is not the dual of a centred periodic window")
        return grid
