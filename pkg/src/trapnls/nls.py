"""Solvers for the trapped cubic NLS  (i d_t + D) U = kappa |U|^2 U,  D = -d_xx + H.

U(t, x, y) lives on a periodic x window times the Hermite basis in y.  The
linear flow e^{itD} multiplies the (xi, level n) component by
e^{it(xi^2 + 2n + d)}; the profile is F(t) = e^{-itD} U(t).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .hermite import HermiteBasis, HermiteField
from .integrate import Trajectory, check_finite, rk4, sample_grid, step_schedule
from .limit import ProfileField
from .resonant import apply_T_quadrature_array, quadrature_phases
from .xgrid import XGrid


class MixedField:
    """Coefficient array (N_x, n_modes): rows are x samples ('physical') or FFT-ordered hats ('spectral')."""

    def __init__(self, grid: XGrid, basis: HermiteBasis, data, rep: str = "physical"):
        if rep not in ("physical", "spectral"):
            raise ValidationError(f"unknown representation {rep!r}")
        data = np.asarray(data, dtype=complex)
        if data.shape != (grid.N, basis.n_modes):
            raise ValidationError(f"data must have shape ({grid.N}, {basis.n_modes}), got {data.shape}")
        self.grid = grid
        self.basis = basis
        self.data = data
        self.rep = rep

    @classmethod
    def zeros(cls, grid: XGrid, basis: HermiteBasis) -> "MixedField":
        return cls(grid, basis, np.zeros((grid.N, basis.n_modes), dtype=complex))

    @classmethod
    def separable(cls, grid: XGrid, psi, field: HermiteField) -> "MixedField":
        """psi(x) f(y) from samples of psi on the grid."""
        psi = np.asarray(psi, dtype=complex)
        return cls(grid, field.basis, psi[:, None] * field.coeffs[None, :])

    @classmethod
    def from_profile(cls, grid: XGrid, profile: ProfileField) -> "MixedField":
        if not np.allclose(profile.xi, grid.xi_sorted):
            raise ValidationError("profile xi grid is not the dual of this window")
        return cls(grid, profile.basis, np.fft.ifftshift(profile.coeffs, axes=0), "spectral")

    def physical(self) -> np.ndarray:
        return self.data if self.rep == "physical" else self.grid.unhat(self.data)

    def spectral(self) -> np.ndarray:
        return self.data if self.rep == "spectral" else self.grid.hat(self.data)

    def to_physical(self) -> "MixedField":
        return MixedField(self.grid, self.basis, self.physical(), "physical")

    def to_spectral(self) -> "MixedField":
        return MixedField(self.grid, self.basis, self.spectral(), "spectral")

    def to_profile(self) -> ProfileField:
        return ProfileField(self.basis, self.grid.xi_sorted, np.fft.fftshift(self.spectral(), axes=0))

    def with_data(self, data, rep: str | None = None) -> "MixedField":
        return MixedField(self.grid, self.basis, data, rep or self.rep)

    def mass(self) -> float:
        """int |U|^2 dx dy."""
        return float(self.grid.dx * np.sum(np.abs(self.physical()) ** 2))

    def ke_y(self) -> float:
        """int <H U, U> dx, the trapped-direction energy."""
        return float(self.grid.dx * np.sum(np.abs(self.physical()) ** 2 @ self.basis.eigenvalues))

    def linf_h1(self) -> float:
        """sup_x ||U(x, .)||_{H^1_y} with weights (1 + level)."""
        w = 1.0 + self.basis.levels
        return float(math.sqrt(np.max(np.abs(self.physical()) ** 2 @ w)))

    def l2_distance(self, other: "MixedField") -> float:
        _check_shared(self, other)
        return float(math.sqrt(self.grid.dx * np.sum(np.abs(self.physical() - other.physical()) ** 2)))

    def edge_fraction(self, margin: float = 0.1) -> float:
        """Share of the mass within ``margin * L`` of the window edges."""
        phys = self.physical()
        near = np.abs(self.grid.x) > (0.5 - margin) * self.grid.L
        total = np.sum(np.abs(phys) ** 2)
        return float(np.sum(np.abs(phys[near]) ** 2) / total) if total > 0 else 0.0

    def __add__(self, other):
        _check_shared(self, other)
        return self.with_data(self.physical() + other.physical(), "physical")

    def __sub__(self, other):
        _check_shared(self, other)
        return self.with_data(self.physical() - other.physical(), "physical")

    def __mul__(self, scalar):
        return self.with_data(self.data * scalar)

    __rmul__ = __mul__


def _check_shared(*fields: MixedField) -> None:
    a = fields[0]
    for b in fields[1:]:
        if b.grid != a.grid or b.basis != a.basis:
            raise ValidationError("mixed fields use different discretisations")


def _d_symbol(grid: XGrid, basis: HermiteBasis) -> np.ndarray:
    return grid.xi[:, None] ** 2 + basis.eigenvalues[None, :]


def linear_flow(U: MixedField, t: float) -> MixedField:
    """e^{itD} U, exact in (xi, level) space."""
    return U.with_data(U.spectral() * np.exp(1j * t * _d_symbol(U.grid, U.basis)), "spectral")


def profile_of(U: MixedField, t: float) -> MixedField:
    """F = e^{-itD} U."""
    return linear_flow(U, -t)


@dataclass
class EvolutionConfig:
    kappa: float = 1.0
    dt: float = 1e-2
    t_start: float = 0.0
    t_end: float = 1.0
    samples: Sequence[float] | int | None = None
    scheme: str = "strang"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.t_end < self.t_start:
            raise ValidationError("t_end must not precede t_start")
        if self.scheme != "strang":
            raise ValidationError(f"unsupported scheme {self.scheme!r}")

    def sample_times(self) -> np.ndarray:
        return sample_grid(self.t_start, self.t_end, self.samples)


# --------------------------------------------------------------------------
# nonlinearities

def _cubic_product(basis: HermiteBasis, f: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Galerkin projection of f conj(g) h, batched over the leading axis."""
    vals = basis.to_product_grid(f) * basis.to_product_grid(g).conj() * basis.to_product_grid(h)
    return basis.from_product_grid(vals)


def apply_full_nonlinearity(F: MixedField, G: MixedField, H: MixedField, t: float) -> MixedField:
    """N^t[F, G, H] = e^{-itD}(e^{itD}F . conj(e^{itD}G) . e^{itD}H)."""
    _check_shared(F, G, H)
    grid, basis = F.grid, F.basis
    phys = [linear_flow(X, t).physical() for X in (F, G, H)]
    prod = _cubic_product(basis, *phys)
    return profile_of(F.with_data(prod, "physical"), t)


def _n0_hat(grid: XGrid, basis: HermiteBasis, fh, gh, hh, t: float, phases) -> np.ndarray:
    px = grid.propagator(t)[:, None]
    if fh is gh and gh is hh:
        f = g = h = grid.unhat(px * fh)
    else:
        f, g, h = (grid.unhat(px * a) for a in (fh, gh, hh))
    out = apply_T_quadrature_array(basis, f, g, h, phases=phases)
    return grid.hat(out) * px.conj()


def apply_N0(F: MixedField, G: MixedField, H: MixedField, t: float, M_s: int | None = None) -> MixedField:
    """N_0^t: the part of N^t with resonant harmonic frequencies (exact s-average)."""
    _check_shared(F, G, H)
    ph = quadrature_phases(F.basis, M_s)
    out = _n0_hat(F.grid, F.basis, F.spectral(), G.spectral(), H.spectral(), t, ph)
    return F.with_data(out, "spectral")


def apply_R_mixed(F: MixedField, M_s: int | None = None) -> MixedField:
    """R[F, F, F] evaluated pointwise in xi."""
    c = F.spectral()
    return F.with_data(apply_T_quadrature_array(F.basis, c, c, c, M_s), "spectral")


# --------------------------------------------------------------------------
# evolutions

def _aliasing_check(grid: XGrid, chat: np.ndarray, t: float) -> None:
    dens = np.sum(np.abs(chat) ** 2, axis=1)
    total = dens.sum()
    if total == 0:
        return
    tail = dens[np.abs(grid.k) > grid.N // 3].sum() / total
    if tail > 1e-8:
        warnings.warn(f"{tail:.2e} of the mass sits in the outer third of the xi band at t={t:.4g}",
                      RuntimeWarning, stacklevel=3)


def evolve_cnls(U0: MixedField, cfg: EvolutionConfig) -> Trajectory:
    """Strang splitting: exact linear half steps, exact pointwise phase for the cubic term.

    The nonlinear substep evaluates U e^{-i kappa h |U|^2} on the x grid times
    the product y grid and projects the increment back onto the basis.
    """
    grid, basis = U0.grid, U0.basis
    sym = _d_symbol(grid, basis)
    times = cfg.sample_times()
    chat = U0.spectral().copy()
    states = []
    half_cache: dict[float, np.ndarray] = {}
    for t, h, idx in step_schedule(cfg.t_start, times, cfg.dt):
        if h > 0:
            half = half_cache.get(h)
            if half is None:
                half = half_cache.setdefault(h, np.exp(0.5j * h * sym))
            chat *= half
            phys = grid.unhat(chat)
            vals = basis.to_product_grid(phys)
            incr = vals * np.expm1(-1j * cfg.kappa * h * np.abs(vals) ** 2)
            phys = phys + basis.from_product_grid(incr)
            chat = grid.hat(phys) * half
            check_finite(chat, t + h)
        if idx is not None:
            _aliasing_check(grid, chat, times[idx])
            states.append(U0.with_data(grid.unhat(chat), "physical"))
    return Trajectory(times, states, {"kappa": cfg.kappa, "dt": cfg.dt})


def evolve_resonant_truncated(W0: MixedField, cfg: EvolutionConfig, M_s: int | None = None) -> Trajectory:
    """RK4 for the profile equation i dW/dt = kappa N_0^t[W, W, W]; states are profiles."""
    grid, basis = W0.grid, W0.basis
    ph = quadrature_phases(basis, M_s)

    def rhs(t, y):
        return -1j * cfg.kappa * _n0_hat(grid, basis, y, y, y, t, ph)

    traj = rk4(rhs, W0.spectral(), cfg.t_start, cfg.sample_times(), cfg.dt,
               wrap=lambda y: W0.with_data(y, "spectral"))
    traj.meta.update(kappa=cfg.kappa, dt=cfg.dt, M_s=ph.shape[0])
    return traj


def _strang_1d(grid: XGrid, states0: list[np.ndarray], nonlinear, cfg: EvolutionConfig) -> Trajectory:
    """Shared Strang loop for systems of 1D fields with the symbol e^{i t xi^2}."""
    times = cfg.sample_times()
    hats = [grid.hat(np.asarray(s, dtype=complex)) for s in states0]
    out = []
    for t, h, idx in step_schedule(cfg.t_start, times, cfg.dt):
        if h > 0:
            half = np.exp(0.5j * h * grid.xi ** 2)
            phys = [grid.unhat(a * half) for a in hats]
            phys = nonlinear(phys, h)
            hats = [grid.hat(p) * half for p in phys]
            for a in hats:
                check_finite(a, t + h)
        if idx is not None:
            out.append([grid.unhat(a) for a in hats])
    return Trajectory(times, out, {"kappa": cfg.kappa, "dt": cfg.dt})


def evolve_1d_nls(grid: XGrid, psi0, mu: float, cfg: EvolutionConfig) -> Trajectory:
    """(i d_t - d_xx) psi = kappa mu |psi|^2 psi by Strang splitting; states are x samples."""
    k = cfg.kappa * mu

    def nonlinear(phys, h):
        (p,) = phys
        return [p * np.exp(-1j * k * h * np.abs(p) ** 2)]

    traj = _strang_1d(grid, [psi0], nonlinear, cfg)
    traj.states = [s[0] for s in traj.states]
    traj.meta["mu"] = mu
    return traj


def evolve_xpm(grid: XGrid, plus0, minus0, cfg: EvolutionConfig, cross: bool = True) -> Trajectory:
    """Coupled pair (i d_t - d_xx) psi_pm = (kappa/4)(|psi_pm|^2 + 2|psi_mp|^2) psi_pm.

    ``cross=False`` drops the 2|psi_mp|^2 coupling.  States are (psi_plus, psi_minus).
    """
    c = 2.0 if cross else 0.0

    def nonlinear(phys, h):
        p, m = phys
        ap, am = np.abs(p) ** 2, np.abs(m) ** 2
        k = 0.25 * cfg.kappa * h
        return [p * np.exp(-1j * k * (ap + c * am)), m * np.exp(-1j * k * (am + c * ap))]

    traj = _strang_1d(grid, [plus0, minus0], nonlinear, cfg)
    traj.states = [tuple(s) for s in traj.states]
    traj.meta["cross"] = cross
    return traj


def psi1_explicit(grid: XGrid, phi, t: float, mu: float, kappa: float = 1.0) -> np.ndarray:
    """Exact solution of i d_t psi - d_xx psi = (pi kappa mu / t) F^{-1}(|psi_hat|^2 psi_hat), psi(1) = phi.

    psi_hat(t) = phi_hat e^{-i pi kappa mu |phi_hat|^2 ln t} e^{i (t - 1) xi^2}.
    """
    if t < 1:
        raise ValidationError(f"the log-modified solution is defined for t >= 1, got {t}")
    ph = grid.hat(np.asarray(phi, dtype=complex))
    phase = -math.pi * kappa * mu * np.abs(ph) ** 2 * math.log(t) + (t - 1.0) * grid.xi ** 2
    return grid.unhat(ph * np.exp(1j * phase))
