"""The limit system: a xi-parametrised family of resonant flows, plus Z and S norms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AliasingError, ValidationError
from .hermite import HermiteBasis, HermiteField
from .integrate import Trajectory, rk4, sample_grid
from .resonant import (InteractionTensor, apply_T_quadrature_array, hamiltonian,
                       quadrature_phases)
from .xgrid import XGrid


class ProfileField:
    """G_hat(xi_m, .) on a uniform ascending xi grid, one Hermite expansion per node."""

    def __init__(self, basis: HermiteBasis, xi, coeffs):
        self.basis = basis
        self.xi = np.asarray(xi, dtype=float)
        coeffs = np.asarray(coeffs, dtype=complex)
        if self.xi.ndim != 1 or coeffs.shape != (len(self.xi), basis.n_modes):
            raise ValidationError(
                f"coefficients must have shape ({len(self.xi)}, {basis.n_modes}), got {coeffs.shape}"
            )
        if len(self.xi) > 1 and not np.allclose(np.diff(self.xi), self.xi[1] - self.xi[0]):
            raise ValidationError("xi grid must be uniform and ascending")
        self.coeffs = coeffs

    @property
    def dxi(self) -> float:
        return float(self.xi[1] - self.xi[0]) if len(self.xi) > 1 else 1.0

    @classmethod
    def rank_one(cls, xi, amplitude, field: HermiteField) -> "ProfileField":
        """phi(xi) * f(y) for sampled phi."""
        amplitude = np.asarray(amplitude, dtype=complex)
        return cls(field.basis, xi, amplitude[:, None] * field.coeffs[None, :])

    def node(self, m: int) -> HermiteField:
        return HermiteField(self.basis, self.coeffs[m])

    def with_coeffs(self, coeffs) -> "ProfileField":
        return ProfileField(self.basis, self.xi, coeffs)

    def mass(self) -> float:
        """Discrete sum over nodes of dxi * ||G_hat(xi_m)||^2."""
        return float(self.dxi * np.sum(np.abs(self.coeffs) ** 2))

    def node_masses(self) -> np.ndarray:
        return np.sum(np.abs(self.coeffs) ** 2, axis=1)

    def node_kinetic(self) -> np.ndarray:
        return np.abs(self.coeffs) ** 2 @ self.basis.eigenvalues

    def node_hamiltonians(self) -> np.ndarray:
        return hamiltonian(self.basis, self.coeffs)

    def __sub__(self, other: "ProfileField") -> "ProfileField":
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __repr__(self):
        return f"ProfileField({self.basis!r}, nodes={len(self.xi)})"


def _check_compatible(a: ProfileField, b: ProfileField) -> None:
    if a.basis != b.basis or a.xi.shape != b.xi.shape or not np.allclose(a.xi, b.xi):
        raise ValidationError("profiles live on different grids")


def apply_R(profile: ProfileField, tensor: InteractionTensor | None = None, M_s: int | None = None) -> ProfileField:
    """R[G, G, G]: the resonant operator applied independently at every xi node."""
    c = profile.coeffs
    if tensor is not None:
        if tensor.basis != profile.basis:
            raise ValidationError("tensor basis does not match profile basis")
        out = tensor.apply_array(c, c, c)
    else:
        out = apply_T_quadrature_array(profile.basis, c, c, c, M_s)
    return profile.with_coeffs(out)


def evolve_rss(G0: ProfileField, kappa: float, tau_end: float, dtau: float, samples=None,
               tensor: InteractionTensor | None = None) -> Trajectory:
    """RK4 for i dG_hat(xi)/dtau = kappa T[G_hat(xi), G_hat(xi), G_hat(xi)] on every node at once."""
    basis = G0.basis
    times = sample_grid(0.0, tau_end, samples)
    if tensor is not None:
        rhs = lambda t, y: -1j * kappa * tensor.apply_array(y, y, y)
    else:
        ph = quadrature_phases(basis)
        rhs = lambda t, y: -1j * kappa * apply_T_quadrature_array(basis, y, y, y, phases=ph)
    traj = rk4(rhs, G0.coeffs, 0.0, times, dtau, wrap=G0.with_coeffs)
    traj.meta.update(kappa=kappa, dtau=dtau)
    return traj


def trajectory_records(traj: Trajectory) -> list[dict]:
    """One row per sample: tau, z_norm, mass, ke, Q_total (node sums weighted by dxi)."""
    rows = []
    for tau, G in traj:
        rows.append({"tau": float(tau), "z_norm": z_norm(G), "mass": G.mass(),
                     "ke": float(G.dxi * G.node_kinetic().sum()),
                     "Q_total": float(G.dxi * G.node_hamiltonians().sum())})
    return rows


# --------------------------------------------------------------------------
# norms

def z_norm(profile) -> float:
    """sup over nodes of (1 + xi^2) ||G_hat(xi)||_{H^1_y}, with ||f||_{H^1}^2 = sum_p (1+p) ||f_p||^2."""
    profile = _as_profile(profile)
    w = 1.0 + profile.basis.levels
    per_node = (1.0 + profile.xi ** 2) ** 2 * (np.abs(profile.coeffs) ** 2 @ w)
    return float(math.sqrt(per_node.max())) if per_node.size else 0.0


@dataclass(frozen=True)
class NormReport:
    z_norm: float
    s_norm: float
    h_N: float
    x_weighted: float
    s_plus_smooth: float
    s_plus_x: float
    N: int


def _as_profile(obj) -> ProfileField:
    if isinstance(obj, ProfileField):
        return obj
    if hasattr(obj, "to_profile"):
        return obj.to_profile()
    raise ValidationError(f"expected a ProfileField or MixedField, got {type(obj).__name__}")


def _s_parts(grid: XGrid, basis: HermiteBasis, chat: np.ndarray, N: int, guard: bool):
    """(H^N, ||x F||) of a field given by FFT-ordered hats chat (N_x, n_modes)."""
    xi2 = grid.xi[:, None] ** 2
    weight = (1.0 + xi2 + basis.eigenvalues[None, :]) ** N
    dens = weight * np.abs(chat) ** 2
    total = dens.sum()
    if guard and total > 0:
        tail = dens[np.abs(grid.xi) > (2.0 / 3.0) * np.abs(grid.xi).max()].sum()
        if tail > 1e-3 * total:
            raise AliasingError(
                f"H^{N} weight puts {tail / total:.2e} of the norm in the outer third of the xi band"
            )
    h_n = math.sqrt(2 * math.pi * grid.dxi * total)
    phys = grid.unhat(chat)
    xw = math.sqrt(grid.dx * np.sum((grid.x[:, None] ** 2) * np.abs(phys) ** 2))
    return h_n, xw


def s_norm(obj, N: int = 8, guard: bool = True) -> NormReport:
    """||F||_S = ||F||_{H^N} + ||x F||_{L^2} with H^N weight (1 + xi^2 + lambda_n)^{N/2}.

    The xi grid must be the dual of a centred periodic window.  ``s_plus_*``
    are the S norms of (1 - d_xx)^4 F and of x F.
    """
    if N < 0:
        raise ValidationError("N must be nonnegative")
    prof = _as_profile(obj)
    grid = XGrid.dual_of(prof.xi)
    chat = np.fft.ifftshift(prof.coeffs, axes=0)
    h_n, xw = _s_parts(grid, prof.basis, chat, N, guard)
    smooth = chat * ((1.0 + grid.xi ** 2) ** 4)[:, None]
    s1 = sum(_s_parts(grid, prof.basis, smooth, N, False))
    xf = grid.hat(grid.x[:, None] * grid.unhat(chat))
    s2 = sum(_s_parts(grid, prof.basis, xf, N, False))
    return NormReport(z_norm(prof), h_n + xw, h_n, xw, s1, s2, N)
