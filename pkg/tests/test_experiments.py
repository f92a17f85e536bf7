import math

import numpy as np
import pytest

from trapnls.errors import ValidationError
from trapnls.experiments import (decay_fit, matched_limit_experiment, quasi1d_experiment, scattering_distance,
                                 separability_spectrum, sigma_ratio, stationary_phase_ratio,
                                 vortex_dipole_experiment, wave_operator_experiment)
from trapnls.hermite import HermiteField, special_g_n
from trapnls.integrate import Trajectory
from trapnls.limit import ProfileField, s_norm
from trapnls.nls import MixedField, linear_flow
from trapnls.xgrid import XGrid

from conftest import basis


def test_decay_fit_exact_power():
    t = np.geomspace(1, 100, 12)
    slope, resid = decay_fit(t, 3 * t ** -0.5)
    assert math.isclose(slope, -0.5, abs_tol=1e-12)
    assert resid < 1e-12
    assert abs(decay_fit(t, np.full_like(t, 2.0))[0]) < 1e-12


@pytest.mark.parametrize("t, v", [
    (np.geomspace(1, 100, 5), np.ones(5)),
    (np.geomspace(1, 100, 10), -np.ones(10)),
    (np.linspace(0, 100, 10), np.ones(10)),
    (np.linspace(1, 2, 10), np.ones(10)),
])
def test_decay_fit_rejects(t, v):
    with pytest.raises(ValidationError):
        decay_fit(t, v)


def test_rank_one_profile_is_separable(rng):
    xi = np.linspace(-3, 3, 25)
    f = HermiteField.random(basis(2, 4), rng)
    G = ProfileField.rank_one(xi, np.exp(-xi ** 2) * (1 + 0.3j * xi), f)
    s = separability_spectrum(G)
    assert s[1] <= 1e-12 * s[0]
    assert sigma_ratio(G) <= 1e-12
    with pytest.raises(ValidationError):
        separability_spectrum(np.zeros((3, 3)))


def test_sum_of_two_products_has_rank_two(rng):
    grid = XGrid(8 * math.pi, 32)
    b = basis(2, 3)
    U = (MixedField.separable(grid, np.exp(-grid.x ** 2), special_g_n(b, 0))
         + MixedField.separable(grid, grid.x * np.exp(-grid.x ** 2), special_g_n(b, 1)))
    s = separability_spectrum(U)
    assert s[1] > 1e-3 * s[0] and s[2] < 1e-12 * s[0]


def test_scattering_distance_vanishes_on_free_flow(rng):
    grid = XGrid(16 * math.pi, 64)
    b = basis(2, 2)
    F = MixedField.separable(grid, np.exp(-grid.x ** 2 / 2), HermiteField.random(b, rng))
    ts = [1.0, 1.5, 2.0]
    U_traj = Trajectory(np.array(ts), [linear_flow(F, t) for t in ts])
    G_traj = Trajectory(np.array([math.pi * math.log(t) for t in ts]), [F.to_profile()] * 3)
    out = scattering_distance(U_traj, G_traj)
    scale = s_norm(F, guard=False).h_N
    assert max(out["h_N"]) < 1e-12 * scale and max(out["l2"]) < 1e-12 * scale
    with pytest.raises(ValidationError):
        scattering_distance(U_traj, G_traj, clock=1.0)


def test_wave_operator_zero_data():
    grid = XGrid(8 * math.pi, 32)
    G0 = ProfileField(basis(2, 2), grid.xi_sorted, np.zeros((32, basis(2, 2).n_modes), complex))
    rep = wave_operator_experiment(G0, math.e, 2 * math.e, grid, dt=0.1, n_samples=3)
    assert rep.verdicts["max_drift_s"] == 0 and rep.verdicts["max_drift_l2"] == 0
    assert math.isnan(rep.verdicts["decay_slope"])
    with pytest.raises(ValidationError):
        wave_operator_experiment(G0, 1.0, 2.0, grid)


def test_matched_limit_zero_amplitude():
    grid = XGrid(16 * math.pi, 64)
    U0 = MixedField.separable(grid, np.exp(-grid.x ** 2 / 2), special_g_n(basis(2, 2), 0))
    rep = matched_limit_experiment(U0, 0.0, n_windows=1, dt=0.05, dtau=0.1, per_window=2)
    assert rep.verdicts["window_max_matched"] == [0.0]
    assert rep.verdicts["window_max_ablated"] == [0.0]
    with pytest.raises(ValidationError):
        matched_limit_experiment(U0, 0.1, n_windows=0)


def test_dipole_without_antivortex_is_the_vortex_reduction():
    # with phi_- = 0 the pair system is the scalar NLS with coupling mu_1
    grid = XGrid(16 * math.pi, 128)
    phi = np.exp(-grid.x ** 2 / 8)
    kw = dict(t0=1.0, t1=2.0, dt=0.02, n_samples=6)
    dip = vortex_dipole_experiment(phi, 0 * phi, 0.1, grid, n_max=5, **kw)
    q1d = quasi1d_experiment(1, phi, "fixed-coupling", 0.1, grid, n_max=5, **kw)
    assert np.allclose(dip.series["mismatch"], q1d.series["mismatch"], rtol=1e-8, atol=1e-14)
    assert max(dip.series["mismatch"]) < 1e-2


def test_quasi1d_rejects_unknown_variant():
    with pytest.raises(ValidationError):
        quasi1d_experiment(0, np.zeros(8), "other", 0.1, XGrid(8 * math.pi, 8))


def test_reports_are_deterministic():
    grid = XGrid(32 * math.pi, 256)
    F = MixedField.separable(grid, np.exp(-grid.x ** 2 / 2), special_g_n(basis(2, 2), 0))
    a = stationary_phase_ratio(F, [2.0, 4.0])
    c = stationary_phase_ratio(F, [4.0, 2.0])
    assert a.csv_text() == c.csv_text()
    assert a.json_text() == c.json_text()
    assert a.csv_text().splitlines()[0] == "t,D,ratio"
    with pytest.raises(ValidationError):
        stationary_phase_ratio(F, [0.0, 1.0])
