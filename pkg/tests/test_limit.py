import math

import numpy as np
import pytest

from trapnls.errors import AliasingError, ValidationError
from trapnls.hermite import HermiteField, special_g_n
from trapnls.limit import ProfileField, apply_R, evolve_rss, s_norm, trajectory_records, z_norm
from trapnls.nls import MixedField
from trapnls.resonant import apply_T_tensor, coupling_mu, evolve_rs
from trapnls.xgrid import XGrid

from conftest import basis, tensor


def _vortex_profile(grid, n=0, eps=0.1, n_max=4):
    xi = grid.xi_sorted
    phi = np.exp(-xi ** 2 / 2)
    return ProfileField.rank_one(xi, eps * phi, special_g_n(basis(2, n_max), n)), phi


def test_profile_shape_checks():
    b = basis(2, 2)
    with pytest.raises(ValidationError):
        ProfileField(b, [0.0, 1.0], np.zeros((3, b.n_modes)))
    with pytest.raises(ValidationError):
        ProfileField(b, [0.0, 1.0, 3.0], np.zeros((3, b.n_modes)))


def test_apply_R_zero_and_rank_one():
    grid = XGrid(8 * math.pi, 32)
    G, phi = _vortex_profile(grid, eps=1.0)
    assert apply_R(G.with_coeffs(np.zeros_like(G.coeffs))).mass() == 0
    out = apply_R(G)
    expected = coupling_mu(0) * (np.abs(phi) ** 2 * phi)[:, None] * G.coeffs / phi[:, None]
    assert np.abs(out.coeffs - expected).max() < 1e-13


def test_apply_R_single_node(rng):
    b = basis(2, 4)
    f = HermiteField.random(b, rng)
    G = ProfileField(b, [0.0], f.coeffs[None, :])
    assert np.abs(apply_R(G).coeffs[0] - apply_T_tensor(tensor(2, 4), f, f, f).coeffs).max() < 1e-13
    assert np.abs(apply_R(G, tensor=tensor(2, 4)).coeffs[0] - apply_R(G).coeffs[0]).max() < 1e-13


def test_rss_scaling_law(rng):
    # G0(xi) = eps phi(xi) f0  =>  G(tau, xi) = eps phi(xi) f(eps^2 phi^2 tau)
    b = basis(2, 4)
    f0 = HermiteField.random(b, rng, top_level=3)
    f0 = f0 * (1 / f0.norm())
    xi = np.linspace(-2, 2, 5)
    eps, tau = 0.1, 5.0
    phi = np.exp(-xi ** 2 / 2)
    traj = evolve_rss(ProfileField.rank_one(xi, eps * phi, f0), 1.0, tau, 1e-3)
    worst = 0.0
    for m, p in enumerate(phi):
        s = (eps * p) ** 2 * tau
        f = evolve_rs(f0, 1.0, s, s / 200).final
        worst = max(worst, np.abs(traj.final.coeffs[m] - eps * p * f.coeffs).max())
    assert worst < 1e-8


def test_rss_vortex_phases():
    grid = XGrid(8 * math.pi, 32)
    G0, phi = _vortex_profile(grid, n=1, eps=0.3)
    tau = 3.0
    G = evolve_rss(G0, 1.0, tau, 1e-2).final
    rot = np.exp(-1j * coupling_mu(1) * (0.3 * phi) ** 2 * tau)
    assert np.abs(G.coeffs - rot[:, None] * G0.coeffs).max() < 1e-10


def test_rss_node_permutation_commutes(rng):
    b = basis(2, 3)
    xi = np.linspace(-1, 1, 6)
    G0 = ProfileField(b, xi, 0.3 * (rng.standard_normal((6, b.n_modes)) + 1j * rng.standard_normal((6, b.n_modes))))
    perm = rng.permutation(6)
    a = evolve_rss(G0, 1.0, 1.0, 1e-2).final.coeffs[perm]
    c = evolve_rss(G0.with_coeffs(G0.coeffs[perm]), 1.0, 1.0, 1e-2).final.coeffs
    assert np.array_equal(a, c)


def test_rss_stability_gronwall(rng):
    # ||T[f,g,h]|| <= ||M|| ||f|| ||g|| ||h|| with M the tensor's sparse matrix, so two
    # runs separate at most like exp(3 ||M|| theta^2 tau), theta the largest node norm
    b = basis(2, 3)
    xi = np.linspace(-1, 1, 4)
    A0 = ProfileField(b, xi, 0.4 * rng.standard_normal((4, b.n_modes)) + 0j)
    B0 = A0.with_coeffs(A0.coeffs + 1e-6 * rng.standard_normal(A0.coeffs.shape))
    taus = [0.0, 2.0, 4.0]
    traj_a = evolve_rss(A0, 1.0, 4.0, 1e-2, samples=taus)
    traj_b = evolve_rss(B0, 1.0, 4.0, 1e-2, samples=taus)
    dev = [np.linalg.norm(a.coeffs - c.coeffs) for (_, a), (_, c) in zip(traj_a, traj_b)]
    op = np.linalg.norm(tensor(2, 3).matrix().toarray(), 2)
    theta = max(np.sqrt(G.node_masses()).max() for G in (A0, B0))
    for tau, d in zip(taus, dev):
        assert d <= dev[0] * math.exp(3 * op * theta ** 2 * tau)
    assert dev[-1] > dev[0]


def test_z_norm_examples():
    b = basis(2, 3)
    assert z_norm(ProfileField(b, [0.0], np.zeros((1, b.n_modes)))) == 0
    assert z_norm(ProfileField.rank_one([0.0], [1.0], HermiteField.mode(b, (0, 0)))) == 1.0
    # level-1 content is weighted by 2, the (1 + xi^2)^2 factor at xi = 1 by 4
    G = ProfileField(b, [0.0, 1.0], np.zeros((2, b.n_modes)))
    G.coeffs[1, b.index((1, 0))] = 1
    assert math.isclose(z_norm(G), math.sqrt(8))


def test_z_norm_conserved():
    grid = XGrid(8 * math.pi, 32)
    b = basis(2, 4)
    rng = np.random.default_rng(3)
    xi = grid.xi_sorted
    G0 = ProfileField(b, xi, 0.2 * np.exp(-xi ** 2)[:, None] * (rng.standard_normal((len(xi), b.n_modes)) + 0j))
    zs = [z_norm(G) for _, G in evolve_rss(G0, 1.0, 10.0, 1e-2, samples=5)]
    assert max(abs(z - zs[0]) for z in zs) / zs[0] < 1e-6


def test_s_norm_zero():
    grid = XGrid(16 * math.pi, 128)
    rep = s_norm(MixedField.zeros(grid, basis(2, 2)))
    assert rep.s_norm == 0 and rep.z_norm == 0


def test_s_norm_gaussian_oracle():
    grid = XGrid(16 * math.pi, 256)
    b = basis(2, 2)
    F = MixedField.separable(grid, math.pi ** -0.25 * np.exp(-grid.x ** 2 / 2), HermiteField.mode(b, (0, 0)))
    rep = s_norm(F, N=0)
    # ||F|| = 1 and ||x F||^2 = int x^2 e^{-x^2} / sqrt(pi) = 1/2
    assert math.isclose(rep.h_N, 1.0, rel_tol=1e-12)
    assert math.isclose(rep.x_weighted, math.sqrt(0.5), rel_tol=1e-12)
    assert math.isclose(rep.s_norm, 1 + math.sqrt(0.5), rel_tol=1e-12)


def test_s_norm_monotone_in_N():
    grid = XGrid(16 * math.pi, 256)
    F = MixedField.separable(grid, np.exp(-grid.x ** 2 / 2), special_g_n(basis(2, 3), 1))
    vals = [s_norm(F, N).s_norm for N in range(0, 9, 2)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert s_norm(F).z_norm <= vals[-1]


def test_s_norm_aliasing_guard():
    grid = XGrid(8 * math.pi, 64)
    rng = np.random.default_rng(0)
    b = basis(2, 2)
    F = MixedField(grid, b, rng.standard_normal((64, b.n_modes)) + 0j)
    with pytest.raises(AliasingError):
        s_norm(F, N=8)
    s_norm(F, N=8, guard=False)
    with pytest.raises(ValidationError):
        s_norm(F, N=-1)


def test_trajectory_records():
    grid = XGrid(8 * math.pi, 32)
    G0, _ = _vortex_profile(grid)
    rows = trajectory_records(evolve_rss(G0, 1.0, 1.0, 0.1, samples=3))
    assert [r["tau"] for r in rows] == [0.0, 0.5, 1.0]
    assert set(rows[0]) == {"tau", "z_norm", "mass", "ke", "Q_total"}
    assert math.isclose(rows[0]["mass"], rows[-1]["mass"], rel_tol=1e-10)
    assert math.isclose(rows[0]["Q_total"], rows[-1]["Q_total"], rel_tol=1e-9)
