"""Hermite eigenbasis of the isotropic harmonic oscillator H = sum_j (-d^2/dy_j^2 + y_j^2).

Modes are multi-indices k with |k| <= n_max; the eigenvalue of mode k is
2|k| + d.  Two tensor Gauss-Hermite grids are kept per basis:

* the *standard* grid (nodes z_i) on which products of two basis functions
  integrate exactly, used by :func:`analyze` / :func:`synthesize`;
* the *product* grid (nodes z_i / sqrt(2)) on which products of four basis
  functions integrate exactly, used for every cubic nonlinearity.

Phase convention: ``propagate_harmonic(f, s)`` is e^{isH} f, i.e. the level-n
coefficients are multiplied by e^{is(2n+d)}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermite

from .errors import ValidationError

__all__ = [
    "BasisSpec",
    "HermiteBasis",
    "HermiteField",
    "build_basis",
    "eig_level",
    "level_degeneracy",
    "hermite_functions",
    "analyze",
    "synthesize",
    "project_level",
    "propagate_harmonic",
    "lens_map",
    "free_gaussian",
    "special_g_n",
    "multiply_y",
    "differentiate_y",
    "commutator_check",
]


def eig_level(n: int, d: int) -> int:
    """Eigenvalue 2n + d of H_d on the level-n eigenspace."""
    return 2 * n + d


def level_degeneracy(n: int, d: int) -> int:
    """Number of multi-indices k in N_0^d with |k| = n."""
    return math.comb(n + d - 1, d - 1)


def hermite_functions(n_max: int, y) -> np.ndarray:
    """Normalised Hermite functions psi_0..psi_{n_max} evaluated at ``y``.

    Uses the three-term recurrence on the functions themselves, which stays
    finite for large n where factorial-based formulas overflow.  Returns an
    array of shape ``(n_max + 1,) + y.shape``.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty((n_max + 1,) + y.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * y * y)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * y * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * y * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


@dataclass(frozen=True)
class BasisSpec:
    """Truncation parameters: trap dimension, top level, Gauss nodes per axis."""

    d: int
    n_max: int
    quad_nodes: int

    def __post_init__(self):
        if self.d not in (1, 2, 3, 4):
            raise ValidationError(f"trap dimension d must be in 1..4, got {self.d}")
        if self.n_max < 0:
            raise ValidationError(f"n_max must be >= 0, got {self.n_max}")
        if self.quad_nodes < 2 * self.n_max + 1:
            raise ValidationError(
                f"quad_nodes={self.quad_nodes} < 2*n_max+1={2 * self.n_max + 1}: "
                "quartic Hermite products would not integrate exactly"
            )

    @classmethod
    def minimal(cls, d: int, n_max: int) -> "BasisSpec":
        return cls(d, n_max, 2 * n_max + 1)


def _multi_indices(d: int, n_max: int) -> np.ndarray:
    modes = [k for k in itertools.product(range(n_max + 1), repeat=d) if sum(k) <= n_max]
    modes.sort(key=lambda k: (sum(k), k))
    return np.array(modes, dtype=np.int64).reshape(len(modes), d)


def _along_axes(arr: np.ndarray, mat: np.ndarray, d: int) -> np.ndarray:
    """Contract each of the trailing ``d`` axes of ``arr`` with ``mat`` (in, out)."""
    if d == 1:
        return arr @ mat
    if d == 2:
        return mat.T @ arr @ mat
    for ax in range(arr.ndim - d, arr.ndim):
        arr = np.moveaxis(np.tensordot(arr, mat, axes=([ax], [0])), -1, ax)
    return arr


class HermiteBasis:
    """Tabulated Hermite functions, quadrature rules and mode bookkeeping."""

    def __init__(self, spec: BasisSpec):
        self.spec = spec
        self.d = spec.d
        self.n_max = spec.n_max
        self.q = spec.quad_nodes
        m = self.n_max + 1

        self.modes = _multi_indices(self.d, self.n_max)
        self.levels = self.modes.sum(axis=1)
        self.n_modes = len(self.modes)
        self._index = {tuple(int(v) for v in k): i for i, k in enumerate(self.modes)}
        # flat position of each mode inside the full (n_max+1)^d coefficient cube
        self._flat = np.ravel_multi_index(tuple(self.modes.T), (m,) * self.d)
        self.eigenvalues = 2.0 * self.levels + self.d

        z, _ = roots_hermite(self.q)
        # psi-weights: w_i e^{z_i^2} = 1 / (q psi_{q-1}(z_i)^2), free of overflow
        w = 1.0 / (self.q * hermite_functions(self.q - 1, z)[-1] ** 2)
        self.nodes = z
        self.weights = w
        self.table = hermite_functions(self.n_max, z)
        self.product_nodes = z / math.sqrt(2.0)
        self.product_weights = w / math.sqrt(2.0)
        self.product_table = hermite_functions(self.n_max, self.product_nodes)

        self._analysis = (self.table * self.weights).T  # (q, m)
        self._synthesis = self.table  # (m, q)
        self._p_analysis = (self.product_table * self.product_weights).T
        self._p_synthesis = self.product_table

    def __repr__(self):
        return f"HermiteBasis(d={self.d}, n_max={self.n_max}, q={self.q}, modes={self.n_modes})"

    def __eq__(self, other):
        return isinstance(other, HermiteBasis) and self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)

    def index(self, k) -> int:
        """Position of multi-index ``k`` in the mode ordering."""
        key = (int(k),) if np.ndim(k) == 0 else tuple(int(v) for v in k)
        try:
            return self._index[key]
        except KeyError:
            raise ValidationError(f"mode {key} is not in the basis (n_max={self.n_max})") from None

    def eig(self, n: int) -> int:
        return eig_level(n, self.d)

    def level_mask(self, n: int) -> np.ndarray:
        return self.levels == n

    def grid_points(self, product: bool = False) -> np.ndarray:
        """Tensor nodes as an array of shape ``(q,)*d + (d,)``."""
        z = self.product_nodes if product else self.nodes
        return np.stack(np.meshgrid(*([z] * self.d), indexing="ij"), axis=-1)

    def grid_weights(self, product: bool = False) -> np.ndarray:
        w = self.product_weights if product else self.weights
        out = w
        for _ in range(self.d - 1):
            out = np.multiply.outer(out, w)
        return out

    # -- coefficient <-> cube helpers ------------------------------------
    def _to_cube(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        batch = coeffs.shape[:-1]
        cube = np.zeros(batch + ((self.n_max + 1) ** self.d,), dtype=np.result_type(coeffs, float))
        cube[..., self._flat] = coeffs
        return cube.reshape(batch + (self.n_max + 1,) * self.d)

    def _from_cube(self, cube: np.ndarray) -> np.ndarray:
        batch = cube.shape[: cube.ndim - self.d]
        return cube.reshape(batch + (-1,))[..., self._flat]

    def _check_grid(self, values: np.ndarray) -> None:
        if values.ndim < self.d or values.shape[values.ndim - self.d:] != (self.q,) * self.d:
            raise ValidationError(
                f"grid values must end in shape {(self.q,) * self.d}, got {values.shape}"
            )

    # -- transforms on raw arrays (leading axes are batch axes) -------------
    def synthesize_array(self, coeffs: np.ndarray) -> np.ndarray:
        return _along_axes(self._to_cube(coeffs), self._synthesis, self.d)

    def analyze_array(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        self._check_grid(values)
        return self._from_cube(_along_axes(values, self._analysis, self.d))

    def to_product_grid(self, coeffs: np.ndarray) -> np.ndarray:
        """Values of sum_k c_k psi_k on the product grid."""
        return _along_axes(self._to_cube(coeffs), self._p_synthesis, self.d)

    def from_product_grid(self, values: np.ndarray) -> np.ndarray:
        """Galerkin projection of grid values; exact for cubic products of basis functions."""
        values = np.asarray(values)
        self._check_grid(values)
        return self._from_cube(_along_axes(values, self._p_analysis, self.d))

    def evaluate_array(self, coeffs: np.ndarray, points) -> np.ndarray:
        """Evaluate expansions at arbitrary points of shape ``(..., d)``.

        ``coeffs`` must be one-dimensional here; the result has the shape of
        ``points`` without its last axis.
        """
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.d:
            raise ValidationError(f"points must end in an axis of length d={self.d}")
        tabs = [hermite_functions(self.n_max, points[..., j]) for j in range(self.d)]
        out = np.zeros(points.shape[:-1], dtype=np.result_type(coeffs, float))
        for c, k in zip(np.asarray(coeffs), self.modes):
            if c == 0:
                continue
            term = tabs[0][k[0]]
            for j in range(1, self.d):
                term = term * tabs[j][k[j]]
            out = out + c * term
        return out

    def gram(self) -> np.ndarray:
        """Gram matrix of the basis under the standard quadrature rule."""
        eye = np.eye(self.n_modes)
        vals = self.synthesize_array(eye)
        w = self.grid_weights()
        return np.tensordot(vals * w, vals, axes=(list(range(1, self.d + 1)),) * 2)


def build_basis(spec: BasisSpec) -> HermiteBasis:
    """Tabulate the basis for ``spec`` (validated on construction of the spec)."""
    return HermiteBasis(spec)


class HermiteField:
    """Complex coefficient vector over the modes of a basis (a function of y)."""

    __slots__ = ("basis", "coeffs")

    def __init__(self, basis: HermiteBasis, coeffs=None):
        self.basis = basis
        if coeffs is None:
            coeffs = np.zeros(basis.n_modes, dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (basis.n_modes,):
            raise ValidationError(f"expected {basis.n_modes} coefficients, got shape {coeffs.shape}")
        self.coeffs = coeffs

    @classmethod
    def mode(cls, basis: HermiteBasis, k, amplitude: complex = 1.0) -> "HermiteField":
        c = np.zeros(basis.n_modes, dtype=complex)
        c[basis.index(k)] = amplitude
        return cls(basis, c)

    @classmethod
    def random(cls, basis: HermiteBasis, rng: np.random.Generator, top_level: int | None = None):
        c = rng.standard_normal(basis.n_modes) + 1j * rng.standard_normal(basis.n_modes)
        if top_level is not None:
            c[basis.levels > top_level] = 0
        return cls(basis, c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def inner(self, other: "HermiteField") -> complex:
        """L^2 inner product <self, other> = int self * conj(other)."""
        _check_same(self, other)
        return complex(np.vdot(other.coeffs, self.coeffs))

    def conj(self) -> "HermiteField":
        # psi_k are real, so conjugating the function conjugates the coefficients
        return HermiteField(self.basis, self.coeffs.conj())

    def copy(self) -> "HermiteField":
        return HermiteField(self.basis, self.coeffs.copy())

    def __add__(self, other):
        _check_same(self, other)
        return HermiteField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same(self, other)
        return HermiteField(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return HermiteField(self.basis, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return HermiteField(self.basis, -self.coeffs)

    def __repr__(self):
        return f"HermiteField({self.basis!r}, norm={self.norm():.6g})"


def _check_same(a: HermiteField, b: HermiteField) -> None:
    if a.basis != b.basis:
        raise ValidationError(f"basis mismatch: {a.basis!r} vs {b.basis!r}")


def analyze(basis: HermiteBasis, grid_values) -> HermiteField:
    """Quadrature inner products <h, psi_k> from samples on the standard grid."""
    return HermiteField(basis, basis.analyze_array(np.asarray(grid_values, dtype=complex)))


def synthesize(field: HermiteField) -> np.ndarray:
    """Samples of the expansion on the standard tensor grid."""
    return field.basis.synthesize_array(field.coeffs)


def project_level(field: HermiteField, n: int) -> HermiteField:
    """Projection onto the level-n eigenspace E_n."""
    if not 0 <= n <= field.basis.n_max:
        raise ValidationError(f"level {n} outside 0..{field.basis.n_max}")
    return HermiteField(field.basis, np.where(field.basis.level_mask(n), field.coeffs, 0))


def propagate_harmonic(field: HermiteField, s: float) -> HermiteField:
    """e^{isH} f: level n picks up the phase e^{is(2n+d)}."""
    return HermiteField(field.basis, field.coeffs * np.exp(1j * s * field.basis.eigenvalues))


def lens_map(field: HermiteField, t: float, points=None) -> np.ndarray:
    """Free Schrodinger evolution e^{it Laplacian} f through the lens transform.

    u(t, x) = (1+4t^2)^{-d/4} v(arctan(2t)/2, x / sqrt(1+4t^2)) e^{i|x|^2 t/(1+4t^2)}
    with v(tau) = e^{-i tau H} f.  ``points`` defaults to the standard grid.
    """
    basis = field.basis
    if points is None:
        points = basis.grid_points()
    points = np.asarray(points, dtype=float)
    stretch = 1.0 + 4.0 * t * t
    v = propagate_harmonic(field, -0.5 * math.atan(2.0 * t))
    r2 = np.sum(points * points, axis=-1)
    inner = basis.evaluate_array(v.coeffs, points / math.sqrt(stretch))
    return stretch ** (-basis.d / 4.0) * inner * np.exp(1j * r2 * t / stretch)


def free_gaussian(points, t: float) -> np.ndarray:
    """Closed form of e^{it Laplacian} e^{-|x|^2/2} on R^d."""
    points = np.asarray(points, dtype=float)
    d = points.shape[-1]
    r2 = np.sum(points * points, axis=-1)
    a = 1.0 + 2.0j * t
    return a ** (-d / 2.0) * np.exp(-r2 / (2.0 * a))


def special_g_n(basis: HermiteBasis, n: int, conjugate: bool = False) -> HermiteField:
    """Coefficients of the vortex g_n(y) = (y1 + i y2)^n e^{-|y|^2/2} (d = 2).

    With ``conjugate=True`` the antivortex (y1 - i y2)^n e^{-|y|^2/2} is returned.
    The expansion is computed by exact quadrature since g_n lies in level n.
    """
    if basis.d != 2:
        raise ValidationError("vortex functions g_n are defined for d = 2 only")
    if not 0 <= n <= basis.n_max:
        raise ValidationError(f"g_{n} needs n_max >= {n}, basis has {basis.n_max}")
    pts = basis.grid_points()
    sign = -1.0 if conjugate else 1.0
    w = (pts[..., 0] + sign * 1j * pts[..., 1]) ** n * np.exp(-0.5 * np.sum(pts * pts, axis=-1))
    field = analyze(basis, w)
    # the expansion is exact: anything off level n is rounding noise
    field.coeffs[~basis.level_mask(n)] = 0
    return field


def _extended_basis(basis: HermiteBasis, extra: int = 1) -> HermiteBasis:
    n = basis.n_max + extra
    return HermiteBasis(BasisSpec(basis.d, n, max(basis.q, 2 * n + 1)))


def embed(field: HermiteField, basis: HermiteBasis) -> HermiteField:
    """Copy coefficients into a basis with a higher (or equal) cutoff."""
    if basis.d != field.basis.d or basis.n_max < field.basis.n_max:
        raise ValidationError("can only embed into a basis of the same d with larger n_max")
    out = np.zeros(basis.n_modes, dtype=complex)
    idx = [basis.index(k) for k in field.basis.modes]
    out[idx] = field.coeffs
    return HermiteField(basis, out)


def _ladder(field: HermiteField, j: int, sign: float, target: HermiteBasis | None) -> HermiteField:
    src = field.basis
    target = target or _extended_basis(src)
    out = np.zeros(target.n_modes, dtype=complex)
    for c, k in zip(field.coeffs, src.modes):
        if c == 0:
            continue
        kj = int(k[j])
        if kj > 0:
            down = k.copy()
            down[j] -= 1
            out[target.index(down)] += c * math.sqrt(kj / 2.0)
        up = k.copy()
        up[j] += 1
        if up.sum() <= target.n_max:
            out[target.index(up)] += sign * c * math.sqrt((kj + 1) / 2.0)
    return HermiteField(target, out)


def multiply_y(field: HermiteField, j: int, target: HermiteBasis | None = None) -> HermiteField:
    """y_j f, returned on a basis one level higher unless ``target`` is given."""
    return _ladder(field, j, +1.0, target)


def differentiate_y(field: HermiteField, j: int, target: HermiteBasis | None = None) -> HermiteField:
    """d f / d y_j, returned on a basis one level higher unless ``target`` is given."""
    return _ladder(field, j, -1.0, target)


def commutator_check(field: HermiteField, s: float) -> float:
    """Largest residual of the two harmonic-flow commutation identities.

    d_j e^{isH} f = e^{isH}(cos 2s d_j + i sin 2s y_j) f   and
    y_j e^{isH} f = e^{isH}(i sin 2s d_j + cos 2s y_j) f,
    evaluated exactly in coefficient space on a basis one level higher.
    """
    big = _extended_basis(field.basis)
    prop = propagate_harmonic(field, s)
    c, sn = math.cos(2 * s), math.sin(2 * s)
    worst = 0.0
    for j in range(field.basis.d):
        dy, yy = differentiate_y(field, j, big), multiply_y(field, j, big)
        lhs1 = differentiate_y(prop, j, big)
        rhs1 = propagate_harmonic(dy * c + yy * (1j * sn), s)
        lhs2 = multiply_y(prop, j, big)
        rhs2 = propagate_harmonic(dy * (1j * sn) + yy * c, s)
        worst = max(worst, (lhs1 - rhs1).norm(), (lhs2 - rhs2).norm())
    return worst
