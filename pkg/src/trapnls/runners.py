"""Experiment ids for ``trapnls run``; each maps a RunConfig to an ExperimentReport.

Initial data come from the ``[experiment]`` section:

    eps      amplitude (default 0.05)
    sigma    Gaussian width in x (default 1)
    level    trapped level n of g_n (default 0)
    vortex   use conj(g_n) instead of g_n (default false)
    data     'gaussian' (eps e^{-x^2/2 sigma^2} g_n) or 'random' (seeded Hermite field)
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .cache import load_tensor, read_tensor_header
from .errors import ValidationError
from .experiments import (ExperimentReport, matched_limit_experiment, quasi1d_experiment,
                          sigma_ratio, stationary_phase_ratio, vortex_dipole_experiment,
                          wave_operator_experiment)
from .hermite import HermiteField, build_basis, special_g_n
from .limit import ProfileField, evolve_rss, s_norm, trajectory_records, z_norm
from .nls import (EvolutionConfig, MixedField, evolve_1d_nls, evolve_cnls,
                  evolve_resonant_truncated, evolve_xpm, profile_of)
from .resonant import (apply_T_tensor, build_interaction_tensor, conserved_quantities,
                       coupling_mu, evolve_rs)
from .xgrid import XGrid


def _ex(cfg, key, default):
    return cfg.get("experiment", key, default)


def _grid(cfg) -> XGrid:
    return XGrid(float(cfg.get("domain", "L_x")), int(cfg.get("domain", "N_x")))


def _evo(cfg, **over) -> EvolutionConfig:
    e = dict(cfg.sections["evolution"])
    e.update(over)
    return EvolutionConfig(float(e["kappa"]), float(e["dt"]), float(e["t_start"]), float(e["t_end"]),
                           e["samples"])


def _trapped(cfg, basis) -> HermiteField:
    n = int(_ex(cfg, "level", 0))
    if 3 * n > basis.n_max:
        raise ValidationError(f"level {n} needs n_max >= {3 * n}")
    if _ex(cfg, "data", "gaussian") == "random":
        f = HermiteField.random(basis, np.random.default_rng(cfg.seed))
        return f * (1.0 / f.norm())
    return special_g_n(basis, n, conjugate=bool(_ex(cfg, "vortex", False)))


def _envelope(cfg, x) -> np.ndarray:
    sig = float(_ex(cfg, "sigma", 1.0))
    return float(_ex(cfg, "eps", 0.05)) * np.exp(-np.asarray(x) ** 2 / (2 * sig * sig))


def _mixed_seed(cfg) -> MixedField:
    grid, basis = _grid(cfg), build_basis(cfg.basis_spec())
    return MixedField.separable(grid, _envelope(cfg, grid.x), _trapped(cfg, basis))


def _profile_seed(cfg) -> ProfileField:
    grid, basis = _grid(cfg), build_basis(cfg.basis_spec())
    xi = grid.xi_sorted
    return ProfileField.rank_one(xi, _envelope(cfg, xi) / math.sqrt(2 * math.pi), _trapped(cfg, basis))


def _report(cfg, id_, series, verdicts=None, params=None) -> ExperimentReport:
    return ExperimentReport(id_, params or cfg.experiment_params(), series, verdicts or {}, cfg.seed)


def _tensor(cfg, basis):
    """The cached tensor when the cache file matches the basis, else a fresh build."""
    path = Path(cfg.get("paths", "cache"))
    if path.exists() and basis.spec.quad_nodes >= 2 * basis.n_max + 1:
        head = read_tensor_header(path)
        if (head["d"], head["n_max"]) == (basis.d, basis.n_max):
            return load_tensor(path, basis)
    return build_interaction_tensor(basis)


def run_rs_stationary(cfg):
    basis = build_basis(cfg.basis_spec())
    tensor = _tensor(cfg, basis)
    series = {"n": [], "mu": [], "residual": []}
    for n in range(basis.n_max // 3 + 1):
        g = special_g_n(basis, n)
        series["n"].append(n)
        series["mu"].append(coupling_mu(n))
        series["residual"].append((apply_T_tensor(tensor, g, g, g) - g * coupling_mu(n)).norm() / g.norm())
    return _report(cfg, "rs-stationary", series, {"max_residual": max(series["residual"])})


def run_rs(cfg):
    basis = build_basis(cfg.basis_spec())
    f0 = _trapped(cfg, basis) * float(_ex(cfg, "eps", 0.5))
    ev = _evo(cfg)
    traj = evolve_rs(f0, ev.kappa, ev.t_end, ev.dt, samples=ev.samples)
    series = {"t": [], "mass": [], "kinetic": [], "hamiltonian": []}
    for t, f in traj:
        r = conserved_quantities(f)
        for k, v in zip(series, (t, r.mass, r.kinetic_energy, r.hamiltonian)):
            series[k].append(v)
    return _report(cfg, "rs", series)


def run_rss(cfg):
    ev = _evo(cfg)
    traj = evolve_rss(_profile_seed(cfg), ev.kappa, ev.t_end, ev.dt, samples=ev.samples)
    series = {"t": [], "mass": [], "z_norm": [], "sigma_ratio": []}
    for t, G in traj:
        for k, v in zip(series, (t, G.mass(), z_norm(G), sigma_ratio(G))):
            series[k].append(v)
    rep = _report(cfg, "rss", series)
    rep.records = trajectory_records(traj)
    rep.snapshot = ("prf", traj.times[-1], traj.final)
    return rep


def run_cnls(cfg):
    N = int(_ex(cfg, "N", 8))
    traj = evolve_cnls(_mixed_seed(cfg), _evo(cfg))
    series = {"t": [], "mass": [], "ke_y": [], "linf": [], "z_norm": [], "s_norm": []}
    for t, U in traj:
        rep = s_norm(profile_of(U, t), N, guard=False)
        for k, v in zip(series, (t, U.mass(), U.ke_y(), U.linf_h1(), rep.z_norm, rep.s_norm)):
            series[k].append(v)
    rep = _report(cfg, "cnls", series)
    rep.snapshot = ("mxf", traj.times[-1], traj.final)
    return rep


def run_truncated(cfg):
    traj = evolve_resonant_truncated(_mixed_seed(cfg), _evo(cfg))
    series = {"t": [], "mass": [], "sigma_ratio": []}
    for t, W in traj:
        for k, v in zip(series, (t, W.mass(), sigma_ratio(W))):
            series[k].append(v)
    return _report(cfg, "truncated", series)


def _mass_1d(grid, psi) -> float:
    return float(grid.dx * np.sum(np.abs(psi) ** 2))


def run_1d(cfg):
    grid = _grid(cfg)
    mu = float(_ex(cfg, "mu", coupling_mu(int(_ex(cfg, "level", 0)))))
    traj = evolve_1d_nls(grid, _envelope(cfg, grid.x) + 0j, mu, _evo(cfg))
    series = {"t": [], "mass": [], "linf": []}
    for t, p in traj:
        for k, v in zip(series, (t, _mass_1d(grid, p), float(np.max(np.abs(p))))):
            series[k].append(v)
    return _report(cfg, "1d", series)


def run_xpm(cfg):
    grid = _grid(cfg)
    plus = _envelope(cfg, grid.x) + 0j
    minus = float(_ex(cfg, "minus_ratio", 0.7)) * _envelope(cfg, grid.x - float(_ex(cfg, "shift", 2.0))) + 0j
    traj = evolve_xpm(grid, plus, minus, _evo(cfg), cross=bool(_ex(cfg, "cross", True)))
    series = {"t": [], "mass_plus": [], "mass_minus": []}
    for t, (p, m) in traj:
        for k, v in zip(series, (t, _mass_1d(grid, p), _mass_1d(grid, m))):
            series[k].append(v)
    return _report(cfg, "xpm", series)


def run_matched_limit(cfg):
    U0 = _mixed_seed(cfg)
    eps = float(_ex(cfg, "eps", 0.05))
    ev = _evo(cfg)
    return matched_limit_experiment(U0 * (1 / eps), eps, int(_ex(cfg, "windows", 3)), ev.kappa,
                                    dt=ev.dt, N=int(_ex(cfg, "N", 8)))


def run_wave_operator(cfg):
    ev = _evo(cfg)
    t0 = max(ev.t_start, math.e)
    t1 = ev.t_end if ev.t_end > t0 else 10 * t0
    return wave_operator_experiment(_profile_seed(cfg), t0, t1, _grid(cfg), ev.kappa, dt=ev.dt,
                                    N=int(_ex(cfg, "N", 8)))


def run_decay(cfg):
    ev = _evo(cfg)
    rep = wave_operator_experiment(_profile_seed(cfg), math.e, 10 * math.e, _grid(cfg), ev.kappa, dt=ev.dt)
    rep.id = "decay"
    s = rep.verdicts["decay_slope"]
    rep.verdicts["passed"] = bool(abs(s + 0.5) <= 0.1)
    return rep


def run_quasi1d(cfg):
    grid = _grid(cfg)
    ev = _evo(cfg)
    t0 = max(ev.t_start, 1.0)
    phi = _envelope(cfg, grid.x) / float(_ex(cfg, "eps", 0.05))
    return quasi1d_experiment(int(_ex(cfg, "level", 0)), phi, str(_ex(cfg, "variant", "fixed-coupling")),
                              float(_ex(cfg, "eps", 0.05)), grid, t0=t0, t1=max(ev.t_end, t0), dt=ev.dt,
                              kappa=ev.kappa)


def run_vortex_dipole(cfg):
    grid = _grid(cfg)
    ev = _evo(cfg)
    eps = float(_ex(cfg, "eps", 0.05))
    t0 = max(ev.t_start, 1.0)
    plus = _envelope(cfg, grid.x) / eps
    minus = float(_ex(cfg, "minus_ratio", 0.7)) * _envelope(cfg, grid.x - float(_ex(cfg, "shift", 2.0))) / eps
    return vortex_dipole_experiment(plus, minus, eps, grid, max(5, cfg.basis_spec().n_max), t0=t0,
                                    t1=max(ev.t_end, t0), dt=ev.dt, kappa=ev.kappa)


def run_separability(cfg):
    basis = build_basis(cfg.basis_spec())
    xi = _grid(cfg).xi_sorted
    pts = basis.grid_points()
    r2 = np.sum(pts * pts, axis=-1)
    r = 1.5 + 0.5 * np.tanh(xi)
    rows = np.array([basis.analyze_array(rv * np.exp(-r2 * rv * rv / 2) + 0j) for rv in r])
    amp = _envelope(cfg, xi)
    ev = _evo(cfg)
    traj = evolve_rss(ProfileField(basis, xi, amp[:, None] * rows), ev.kappa, ev.t_end, ev.dt,
                      samples=ev.samples)
    series = {"t": [], "sigma_ratio": []}
    for t, G in traj:
        series["t"].append(t)
        series["sigma_ratio"].append(sigma_ratio(G))
    r = series["sigma_ratio"]
    return _report(cfg, "separability", series, {"initial": r[0], "min": min(r)})


def run_stationary_phase(cfg):
    ev = _evo(cfg)
    t0 = max(ev.t_start, 1.0)
    t1 = ev.t_end if ev.t_end > t0 else 10 * t0
    rep = stationary_phase_ratio(_mixed_seed(cfg), np.geomspace(t0, t1, int(_ex(cfg, "points", 9))))
    rep.seed = cfg.seed
    return rep


RUNNERS = {
    "rs-stationary": run_rs_stationary,
    "rs": run_rs,
    "rss": run_rss,
    "cnls": run_cnls,
    "truncated": run_truncated,
    "1d": run_1d,
    "xpm": run_xpm,
    "matched-limit": run_matched_limit,
    "wave-operator": run_wave_operator,
    "decay": run_decay,
    "quasi1d": run_quasi1d,
    "vortex-dipole": run_vortex_dipole,
    "separability": run_separability,
    "stationary-phase": run_stationary_phase,
}
