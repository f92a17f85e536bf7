"""The resonant trilinear operator T and the resonant flow i dg/dtau = kappa T[g, g, g].

T[f, g, h] keeps only the interactions psi_a conj(psi_b) psi_c -> psi_e whose
harmonic frequencies cancel, |a| - |b| + |c| - |e| = 0.  Two independent
evaluations are provided:

* :func:`apply_T_tensor` contracts with the precomputed quartic integrals;
* :func:`apply_T_quadrature` averages the harmonic flow over equispaced times,
  which removes every non-resonant term exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import map_coordinates, spline_filter
from scipy.special import roots_legendre

from .errors import ValidationError
from .hermite import HermiteBasis, HermiteField
from .integrate import Trajectory, rk4, sample_grid


# --------------------------------------------------------------------------
# interaction tensor

def quartic_table_1d(basis: HermiteBasis) -> np.ndarray:
    """C1[a, b, c, e] = int psi_a psi_b psi_c psi_e dy for 1D indices <= n_max."""
    t = basis.product_table
    w = basis.product_weights
    return np.einsum("ai,bi,ci,ei,i->abce", t, t, t, t, w, optimize=True)


def _sorted_pairs(basis: HermiteBasis):
    n = basis.n_modes
    a, c = np.triu_indices(n)
    return a, c


def _pair_groups(basis: HermiteBasis, a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Group label for pairs: (level sum, per-coordinate parity of a + c)."""
    modes = basis.modes
    level = basis.levels[a] + basis.levels[c]
    parity = (modes[a] + modes[c]) % 2
    code = level.astype(np.int64)
    for j in range(basis.d):
        code = code * 2 + parity[:, j]
    return code


class InteractionTensor:
    """Canonical entries of the resonant quartic integrals plus an apply operator.

    ``index`` has shape (count, 4) and holds mode positions (a, b, c, e) with
    (a, c) and (b, e) each sorted and the pair (a, c) not after (b, e); every
    other admissible tuple is one of the 8 images of a stored one.
    """

    def __init__(self, basis: HermiteBasis, index: np.ndarray, values: np.ndarray):
        self.basis = basis
        self.index = np.asarray(index, dtype=np.int64).reshape(-1, 4)
        self.values = np.asarray(values, dtype=float)
        if len(self.index) != len(self.values):
            raise ValidationError("index/value length mismatch")
        self._matrix = None
        self._keys = None

    def __len__(self):
        return len(self.values)

    @property
    def count(self) -> int:
        return len(self.values)

    def multi_indices(self) -> np.ndarray:
        """Stored tuples as multi-indices, shape (count, 4, d)."""
        return self.basis.modes[self.index]

    def _sorted_keys(self):
        if self._keys is None:
            keys = _canonical_key(self.basis.n_modes, *self.index.T)
            order = np.argsort(keys, kind="stable")
            self._keys = (keys[order], order)
        return self._keys

    def lookup(self, a, b, c, e) -> float:
        """Value for any 4-tuple of multi-indices; 0 if not admissible."""
        B = self.basis
        key = _canonical_key(B.n_modes, *(B.index(k) for k in (a, b, c, e)))
        keys, order = self._sorted_keys()
        pos = int(np.searchsorted(keys, key))
        if pos < len(keys) and keys[pos] == key:
            return float(self.values[order[pos]])
        return 0.0

    def matrix(self) -> sp.csr_matrix:
        """Sparse map from outer products f_a h_c (flattened a*n+c) to v_(b,e)."""
        if self._matrix is None:
            n = self.basis.n_modes
            a, b, c, e = self.index.T
            # all 8 images; duplicates arise when a == c or b == e or the pairs coincide
            imgs = []
            for (p, q, r, s) in ((a, b, c, e), (c, b, a, e), (a, e, c, b), (c, e, a, b)):
                imgs.append((p, q, r, s))
                imgs.append((q, p, s, r))
            rows = np.concatenate([p * n + r for p, q, r, s in imgs])
            cols = np.concatenate([q * n + s for p, q, r, s in imgs])
            vals = np.concatenate([self.values] * 8)
            flat = rows * (n * n) + cols
            flat, keep = np.unique(flat, return_index=True)
            self._matrix = sp.csr_matrix(
                (vals[keep], (flat // (n * n), flat % (n * n))), shape=(n * n, n * n)
            )
        return self._matrix

    def apply_array(self, f: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Batched T on raw coefficient arrays with a shared trailing mode axis."""
        n = self.basis.n_modes
        f, g, h = np.broadcast_arrays(f, g, h)
        batch = f.shape[:-1]
        u = (f[..., :, None] * h[..., None, :]).reshape(-1, n * n)
        v = (self.matrix().T @ u.T).T.reshape(batch + (n, n))
        return np.einsum("...be,...b->...e", v, g.conj())


def _canonical_key(n: int, a, b, c, e):
    a, b, c, e = (np.asarray(x, dtype=np.int64) for x in (a, b, c, e))
    p1 = np.minimum(a, c) * n + np.maximum(a, c)
    p2 = np.minimum(b, e) * n + np.maximum(b, e)
    lo, hi = np.minimum(p1, p2), np.maximum(p1, p2)
    return lo * (n * n) + hi


def admissible(basis: HermiteBasis, a, b, c, e) -> bool:
    """Resonance and parity selection rules for a 4-tuple of multi-indices."""
    a, b, c, e = (np.asarray(k) for k in (a, b, c, e))
    if a.sum() + c.sum() != b.sum() + e.sum():
        return False
    return bool(np.all((a + b + c + e) % 2 == 0))


def build_interaction_tensor(basis: HermiteBasis) -> InteractionTensor:
    """Enumerate admissible canonical tuples and integrate them exactly."""
    pa, pc = _sorted_pairs(basis)
    groups = _pair_groups(basis, pa, pc)
    order = np.lexsort((pc, pa, groups))
    pa, pc, groups = pa[order], pc[order], groups[order]
    bounds = np.flatnonzero(np.diff(groups)) + 1
    starts = np.concatenate([[0], bounds])
    stops = np.concatenate([bounds, [len(groups)]])
    rows = []
    for s0, s1 in zip(starts, stops):
        i, j = np.triu_indices(s1 - s0)
        ga, gc = pa[s0:s1], pc[s0:s1]
        rows.append(np.stack([ga[i], ga[j], gc[i], gc[j]], axis=1))
    index = np.concatenate(rows) if rows else np.zeros((0, 4), dtype=np.int64)
    # pairs are ordered by (a, c) within a group, so (a, c) <= (b, e) already
    values = _tensor_values(basis, index)
    srt = _lex_order(basis, index)
    return InteractionTensor(basis, index[srt], values[srt])


def _tensor_values(basis: HermiteBasis, index: np.ndarray) -> np.ndarray:
    c1 = quartic_table_1d(basis)
    m = basis.modes
    vals = np.ones(len(index))
    for j in range(basis.d):
        vals *= c1[m[index[:, 0], j], m[index[:, 1], j], m[index[:, 2], j], m[index[:, 3], j]]
    return vals


def _lex_order(basis: HermiteBasis, index: np.ndarray) -> np.ndarray:
    comps = basis.modes[index].reshape(len(index), -1)
    return np.lexsort(comps.T[::-1])


def apply_T_tensor(tensor: InteractionTensor, f: HermiteField, g: HermiteField, h: HermiteField) -> HermiteField:
    """(T[f, g, h])_e = sum C(a, b, c, e) f_a conj(g_b) h_c over admissible tuples."""
    for x in (f, g, h):
        if x.basis != tensor.basis:
            raise ValidationError(f"field basis {x.basis!r} does not match tensor basis {tensor.basis!r}")
    return HermiteField(tensor.basis, tensor.apply_array(f.coeffs, g.coeffs, h.coeffs))


def quadrature_phases(basis: HermiteBasis, M_s: int | None = None) -> np.ndarray:
    """e^{i s_j lambda_k} for s_j = j pi / M_s, shape (M_s, n_modes)."""
    M_s = 2 * basis.n_max + 1 if M_s is None else int(M_s)
    if M_s < 2 * basis.n_max + 1:
        raise ValidationError(
            f"M_s={M_s} < 2*n_max+1={2 * basis.n_max + 1}: the s-average would keep non-resonant terms"
        )
    s = np.arange(M_s) * (math.pi / M_s)
    return np.exp(1j * np.outer(s, basis.eigenvalues))


def apply_T_quadrature_array(basis: HermiteBasis, f, g, h, M_s: int | None = None,
                             phases: np.ndarray | None = None) -> np.ndarray:
    """Batched s-averaged T on coefficient arrays (trailing mode axis)."""
    if phases is None:
        phases = quadrature_phases(basis, M_s)
    if f is g and g is h:
        v = basis.to_product_grid(np.asarray(f)[..., None, :] * phases)
        vals = np.abs(v) ** 2 * v
    else:
        f, g, h = (np.asarray(x)[..., None, :] * phases for x in (f, g, h))
        vals = basis.to_product_grid(f) * basis.to_product_grid(g).conj() * basis.to_product_grid(h)
    out = basis.from_product_grid(vals) * phases.conj()
    return out.mean(axis=-2)


def apply_T_quadrature(basis: HermiteBasis, f: HermiteField, g: HermiteField, h: HermiteField,
                       M_s: int | None = None) -> HermiteField:
    """T[f,g,h] = (1/pi) int_0^pi e^{-isH}(e^{isH}f conj(e^{isH}g) e^{isH}h) ds.

    The equispaced rule with M_s >= 2 n_max + 1 nodes is exact.
    """
    for x in (f, g, h):
        if x.basis != basis:
            raise ValidationError("field basis does not match")
    return HermiteField(basis, apply_T_quadrature_array(basis, f.coeffs, g.coeffs, h.coeffs, M_s))


def coupling_mu(n: int) -> float:
    """mu_n = ||g_n||_4^4 / ||g_n||_2^2 = (2n)! / (2^{2n+1} n!)."""
    if n < 0:
        raise ValidationError("n must be nonnegative")
    out = 0.5
    for k in range(1, n + 1):
        out *= (2 * k - 1) / 2.0
    return out


# --------------------------------------------------------------------------
# conserved quantities

@dataclass(frozen=True)
class ConservedReport:
    mass: float
    kinetic_energy: float
    hamiltonian: float


def hamiltonian(basis: HermiteBasis, coeffs: np.ndarray, nodes: int | None = None) -> np.ndarray:
    """Q = (2/pi) int_{-pi/4}^{pi/4} int |e^{i lam H} g|^4 dy dlam (batched over leading axes)."""
    M = 2 * basis.n_max + 1 if nodes is None else int(nodes)
    if M < basis.n_max + 1:
        raise ValidationError("too few lambda nodes for an exact Hamiltonian average")
    lam = -math.pi / 4 + np.arange(M) * (math.pi / 2 / M)
    ph = np.exp(1j * np.outer(lam, basis.eigenvalues))
    vals = basis.to_product_grid(np.asarray(coeffs)[..., None, :] * ph)
    w = basis.grid_weights(product=True)
    dens = np.abs(vals) ** 4 * w
    q = dens.reshape(dens.shape[: dens.ndim - basis.d] + (-1,)).sum(axis=-1)
    return q.mean(axis=-1)


def conserved_quantities(field: HermiteField) -> ConservedReport:
    """Mass, harmonic kinetic energy and resonant Hamiltonian of a field."""
    b = field.basis
    p = np.abs(field.coeffs) ** 2
    return ConservedReport(
        mass=float(p.sum()),
        kinetic_energy=float((b.eigenvalues * p).sum()),
        hamiltonian=float(hamiltonian(b, field.coeffs)),
    )


# --------------------------------------------------------------------------
# resonant flow

def resonant_rhs(basis: HermiteBasis, kappa: float, tensor: InteractionTensor | None = None,
                 M_s: int | None = None):
    """Right-hand side g -> -i kappa T[g, g, g] on coefficient arrays."""
    if tensor is not None:
        return lambda t, y: -1j * kappa * tensor.apply_array(y, y, y)
    ph = quadrature_phases(basis, M_s)
    return lambda t, y: -1j * kappa * apply_T_quadrature_array(basis, y, y, y, phases=ph)


def evolve_rs(f0: HermiteField, kappa: float, tau_end: float, dtau: float,
              samples=None, tensor: InteractionTensor | None = None) -> Trajectory:
    """RK4 for i dg/dtau = kappa T[g, g, g], recorded at ``samples`` (default: endpoints).

    With ``tensor`` given the contraction path is used, otherwise the exact
    s-average (usually faster for dense fields).
    """
    basis = f0.basis
    times = sample_grid(0.0, tau_end, samples)
    rhs = resonant_rhs(basis, kappa, tensor)
    traj = rk4(rhs, f0.coeffs, 0.0, times, dtau, wrap=lambda y: HermiteField(basis, y))
    traj.meta.update(kappa=kappa, dtau=dtau)
    return traj


# --------------------------------------------------------------------------
# continuous resonant operator (d = 2, validation oracle)

@dataclass(frozen=True)
class CRQuadrature:
    """Parameters for :func:`apply_cr_continuous`.

    ``extent`` is the half-width of the sample grid in xi and of the z box;
    ``z_points`` trapezoid nodes per z axis, ``lam_points`` Gauss-Legendre
    nodes on [-1, 1] (the tail |lambda| > 1 is folded back exactly).
    """

    extent: float = 6.0
    z_points: int = 32
    lam_points: int = 16


def apply_cr_continuous(samples: np.ndarray, quad: CRQuadrature = CRQuadrature()) -> np.ndarray:
    """(1/pi^2) int_R int_{R^2} g(xi + lam z) conj g(xi + lam z + z_perp) g(xi + z_perp) dz dlam.

    ``samples`` holds g on the square grid linspace(-extent, extent, N) in each
    axis (first index xi_1).  The substitution lam -> 1/lam maps |lam| > 1 onto
    (-1, 1) with integrand g(xi + w) conj g(xi + w + mu w_perp) g(xi + mu w_perp),
    so both pieces are integrated over a bounded lambda range.  Off-grid values
    use cubic splines with zero continuation outside the grid.
    """
    g = np.asarray(samples, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 8:
        raise ValidationError("samples must be a square 2D grid with at least 8 points per axis")
    n = g.shape[0]
    L = quad.extent
    h = 2 * L / (n - 1)
    coef_re = spline_filter(g.real, order=3, mode="constant")
    coef_im = spline_filter(g.imag, order=3, mode="constant")

    def interp(p1, p2):
        coords = np.stack([(p1 + L) / h, (p2 + L) / h])
        kw = dict(order=3, mode="constant", cval=0.0, prefilter=False)
        return map_coordinates(coef_re, coords, **kw) + 1j * map_coordinates(coef_im, coords, **kw)

    xi = np.linspace(-L, L, n)
    x1, x2 = np.meshgrid(xi, xi, indexing="ij")
    x1, x2 = x1.ravel(), x2.ravel()
    zs = np.linspace(-L, L, quad.z_points)
    dz = zs[1] - zs[0]
    lam, wl = roots_legendre(quad.lam_points)
    acc = np.zeros(n * n, dtype=complex)
    l = lam[:, None]
    for z1, z2 in product(zs, zs):
        # z_perp = (-z2, z1)
        gp = interp(x1 - z2, x2 + z1)  # g(xi + z_perp)
        gz = interp(x1 + z1, x2 + z2)  # g(xi + w) in the folded piece
        a = interp(x1 + l * z1, x2 + l * z2)
        b = interp(x1 + l * z1 - z2, x2 + l * z2 + z1)
        c = interp(x1 - l * z2, x2 + l * z1)
        d = interp(x1 + z1 - l * z2, x2 + z2 + l * z1)
        acc += wl @ (a * b.conj() * gp + gz * d.conj() * c)
    return (acc * dz * dz / math.pi ** 2).reshape(n, n)
