"""The acceptance checks, shared by ``trapnls validate`` and the test-suite.

Each check returns a :class:`CheckResult` holding the measured value, the bound
it is held to and the verdict.  Parameters can be overridden through a flat
mapping (the ``[validate]`` section of a run config).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import TrapNLSError
from .experiments import (matched_limit_experiment, quasi1d_experiment, sigma_ratio,
                          stationary_phase_ratio, vortex_dipole_experiment, wave_operator_experiment)
from .hermite import (BasisSpec, HermiteField, build_basis, commutator_check, free_gaussian,
                      lens_map, special_g_n)
from .limit import ProfileField, evolve_rss, z_norm
from .nls import EvolutionConfig, MixedField, evolve_cnls, evolve_resonant_truncated
from .resonant import (CRQuadrature, apply_cr_continuous, apply_T_quadrature, apply_T_tensor,
                       build_interaction_tensor, conserved_quantities, coupling_mu, evolve_rs)
from .xgrid import XGrid


@dataclass
class CheckResult:
    number: int
    name: str
    measured: dict
    bound: str
    passed: bool
    seconds: float = 0.0
    diagnosis: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        extra = f" [{self.diagnosis}]" if self.diagnosis else ""
        return f"[{verdict}] {self.number:2d} {self.name}: {shown} (bound: {self.bound}){extra}"

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "measured": self.measured,
                "bound": self.bound, "passed": self.passed, "seconds": round(self.seconds, 3),
                "diagnosis": self.diagnosis}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.3e}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


DEFAULTS = {
    "seed": 12345,
    "stationary_n_max": 12,
    "null_n_max": 8,
    "dual_n_max": 8,
    "dual_M_s": None,  # 2 n_max + 1
    "dual_fields": 20,
    "rs_n_max": 8,
    "rs_dtau": 1e-3,
    "rs_tau": 10.0,
    "qp_dtau": 1e-3,
    "rss_nodes": 64,
    "rss_n_max": 6,
    "rss_dtau": 1e-2,
    "cr_z_points": 32,
    "cr_lam_points": 16,
    "sp_Nx": 4096,
    "ml_Nx": 1024,
    "ml_n_max": 4,
    "ml_N": 8,
    "q1d_Nx": 256,
    "q1d_t1": 21.0,
    "q1d_sigma": 4.0,
    "decay_Nx": 1024,
    "decay_dt": 1e-2,
    "split_dt": 0.04,
}


def _params(overrides: dict | None) -> dict:
    p = dict(DEFAULTS)
    for k, v in (overrides or {}).items():
        if k not in DEFAULTS:
            raise KeyError(f"unknown validation parameter {k!r}")
        p[k] = v
    return p


# --------------------------------------------------------------------------
# individual checks; each returns (measured, passed, diagnosis)

def check_stationary(p):
    n_max = int(p["stationary_n_max"])
    basis = build_basis(BasisSpec(2, n_max, 2 * n_max + 1))
    tensor = build_interaction_tensor(basis)
    worst = 0.0
    for n in range(0, min(4, n_max // 3) + 1):
        g = special_g_n(basis, n)
        worst = max(worst, (apply_T_tensor(tensor, g, g, g) - g * coupling_mu(n)).norm() / g.norm())
    mus = [coupling_mu(n) for n in range(3)]
    ok = worst <= 1e-10 and mus == [0.5, 0.25, 0.375] and n_max >= 12
    return {"max_rel_residual": worst, "mu_0_1_2": mus}, ok, "" if n_max >= 12 else "n_max < 12 cannot host n = 4"


def check_null(p):
    n_max = int(p["null_n_max"])
    basis = build_basis(BasisSpec(2, n_max, 2 * n_max + 1))
    g = special_g_n(basis, 1)
    r = apply_T_tensor(build_interaction_tensor(basis), g, g.conj(), g).norm()
    return {"norm": r}, r <= 1e-10, ""


def check_dual_path(p):
    n_max = int(p["dual_n_max"])
    M_s = p["dual_M_s"]
    M_s = 2 * n_max + 1 if M_s in (None, "", "auto") else int(M_s)
    basis = build_basis(BasisSpec(2, n_max, 2 * n_max + 1))
    tensor = build_interaction_tensor(basis)
    rng = np.random.default_rng(int(p["seed"]))
    worst = 0.0
    try:
        for _ in range(int(p["dual_fields"])):
            f, g, h = (HermiteField.random(basis, rng) for _ in range(3))
            a = apply_T_tensor(tensor, f, g, h)
            b = apply_T_quadrature(basis, f, g, h, M_s)
            worst = max(worst, (a - b).norm() / a.norm())
    except TrapNLSError as exc:
        return {"M_s": M_s, "max_rel_diff": float("nan")}, False, f"quadrature precondition violated: {exc}"
    return {"M_s": M_s, "max_rel_diff": worst}, worst <= 1e-12, ""


def check_rs_conservation(p):
    n_max = int(p["rs_n_max"])
    basis = build_basis(BasisSpec(2, n_max, 2 * n_max + 1))
    rng = np.random.default_rng(int(p["seed"]))
    f0 = HermiteField.random(basis, rng)
    f0 = f0 * (0.5 / f0.norm())
    traj = evolve_rs(f0, 1.0, float(p["rs_tau"]), float(p["rs_dtau"]), samples=11)
    reps = [conserved_quantities(f) for _, f in traj]
    rel = lambda xs: max(abs(x - xs[0]) for x in xs) / abs(xs[0])
    dm = rel([r.mass for r in reps])
    dk = rel([r.kinetic_energy for r in reps])
    dq = rel([r.hamiltonian for r in reps])
    return {"mass": dm, "kinetic": dk, "hamiltonian": dq}, dm <= 1e-8 and dk <= 1e-8 and dq <= 1e-7, ""


def check_quasi_periodic(p):
    basis = build_basis(BasisSpec(2, 3, 7))
    g, gb = special_g_n(basis, 1), special_g_n(basis, 1, conjugate=True)
    cp, cm, kappa, tau = 0.8, 0.6, 1.0, 20.0
    traj = evolve_rs(g * cp + gb * cm, kappa, tau, float(p["qp_dtau"]))
    f = traj.final
    # project back onto the two vortices (they are orthogonal with norm^2 pi)
    ap = f.inner(g) / g.inner(g)
    am = f.inner(gb) / gb.inner(gb)
    wp = -(kappa / 4) * (cp ** 2 + 2 * cm ** 2)
    wm = -(kappa / 4) * (cm ** 2 + 2 * cp ** 2)
    ep = abs(ap - cp * np.exp(1j * wp * tau))
    em = abs(am - cm * np.exp(1j * wm * tau))
    err = max(ep / cp, em / cm)
    return {"phase_error": err, "omega_plus": wp, "omega_minus": wm}, err <= 1e-6, ""


def check_rss_z(p):
    n_max = int(p["rss_n_max"])
    basis = build_basis(BasisSpec(2, n_max, 2 * n_max + 1))
    grid = XGrid(16 * math.pi, int(p["rss_nodes"]))
    xi = grid.xi_sorted
    rng = np.random.default_rng(int(p["seed"]))
    shape = HermiteField.random(basis, rng, top_level=n_max // 2)
    shape = shape * (1 / shape.norm())
    G0 = ProfileField(basis, xi, (0.4 * np.exp(-xi ** 2 / 2))[:, None] * shape.coeffs[None, :]
                      + 0.1 * np.exp(-(xi - 0.5) ** 2)[:, None] * rng.standard_normal((len(xi), basis.n_modes)))
    traj = evolve_rss(G0, 1.0, 10.0, float(p["rss_dtau"]), samples=11)
    z = [z_norm(G) for _, G in traj]
    drift = max(abs(v - z[0]) for v in z) / z[0]
    return {"z_drift": drift, "nodes": len(xi)}, drift <= 1e-6, ""


def cr_constants(p):
    """(constants, residuals) of the continuous operator against 2D Hermite T on three inputs."""
    basis = build_basis(BasisSpec(2, 10, 21))
    quad = CRQuadrature(z_points=int(p["cr_z_points"]), lam_points=int(p["cr_lam_points"]))
    n = 64
    s = np.linspace(-quad.extent, quad.extent, n)
    pts = np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1)
    g0, g1 = special_g_n(basis, 0), special_g_n(basis, 1)
    g2b = special_g_n(basis, 2, conjugate=True)
    fields = {"g0": g0, "g1": g1, "mixed": g0 * 0.7 + g1 * (0.4 - 0.3j) + g2b * 0.25}
    consts, resid = {}, {}
    for name, f in fields.items():
        samples = basis.evaluate_array(f.coeffs, pts)
        th = basis.evaluate_array(apply_T_quadrature(basis, f, f, f).coeffs, pts)
        cr = apply_cr_continuous(samples, quad)
        c = np.vdot(th, cr) / np.vdot(th, th)
        consts[name] = float(c.real)
        resid[name] = float(np.linalg.norm(cr - c * th) / np.linalg.norm(cr))
    return consts, resid


def check_cr(p):
    consts, resid = cr_constants(p)
    vals = np.array(list(consts.values()))
    spread = float((vals.max() - vals.min()) / abs(vals.mean()))
    ok = spread <= 0.01 and max(resid.values()) <= 0.01
    return {"constant": float(vals.mean()), "spread": spread, "max_residual": max(resid.values())}, ok, ""


def check_stationary_phase(p):
    grid = XGrid(512 * math.pi, int(p["sp_Nx"]))
    basis = build_basis(BasisSpec(2, 2, 5))
    F = MixedField.separable(grid, 0.05 * np.exp(-grid.x ** 2 / 2), special_g_n(basis, 0))
    rep = stationary_phase_ratio(F, np.geomspace(10, 100, 9))
    at50 = stationary_phase_ratio(F, [50.0]).series["ratio"][0]
    slope = rep.verdicts["slope"]
    return {"slope": slope, "ratio_t50": float(at50)}, slope <= -1.0 and 0.95 <= at50 <= 1.05, ""


def matched_limit_data(p):
    grid = XGrid(64 * math.pi, int(p["ml_Nx"]))
    n_max = int(p["ml_n_max"])
    basis = build_basis(BasisSpec(2, n_max, 2 * n_max + 1))
    env = np.exp(-grid.x ** 2 / 2)
    return (MixedField.separable(grid, env, special_g_n(basis, 0))
            + MixedField.separable(grid, 0.5 * grid.x * env, special_g_n(basis, 1)))


def check_matched_limit(p):
    rep = matched_limit_experiment(matched_limit_data(p), 0.05, 3, N=int(p["ml_N"]))
    v = rep.verdicts
    return ({"window_max": v["window_max_matched"], "ablated": v["window_max_ablated"]},
            v["strictly_decreasing"] and v["matched_beats_ablation"], "")


def check_quasi1d(p):
    grid = XGrid(32 * math.pi, int(p["q1d_Nx"]))
    phi = np.exp(-grid.x ** 2 / (2 * float(p["q1d_sigma"]) ** 2))
    out, ok = {}, True
    for n in (0, 1):
        v = quasi1d_experiment(n, phi, "fixed-coupling", 0.05, grid, t1=float(p["q1d_t1"])).verdicts
        out[f"n{n}_max_mismatch"] = v["max_mismatch"]
        out[f"n{n}_coupling_ratio"] = v["coupling_ablation_ratio"]
        out[f"n{n}_phase_ratio"] = v["phase_ablation_ratio"]
        ok &= v["max_mismatch"] <= 0.1 and v["coupling_ablation_ratio"] >= 3 and v["phase_ablation_ratio"] >= 10
    return out, ok, ""


def check_dipole(p):
    grid = XGrid(32 * math.pi, int(p["q1d_Nx"]))
    sig = float(p["q1d_sigma"])
    phi_p = np.exp(-grid.x ** 2 / (2 * sig ** 2))
    phi_m = 0.7 * np.exp(-(grid.x - 2) ** 2 / (2 * sig ** 2))
    t1 = float(p["q1d_t1"])
    v = vortex_dipole_experiment(phi_p, phi_m, 0.05, grid, t1=t1).verdicts
    sym = vortex_dipole_experiment(phi_p, phi_p, 0.05, grid, t1=5.0).verdicts
    ok = v["decoupled_ratio"] >= 2 and sym["max_plus_minus_gap"] <= 1e-10
    return {"decoupled_ratio": v["decoupled_ratio"], "symmetric_gap": sym["max_plus_minus_gap"]}, ok, ""


def check_decay(p):
    grid = XGrid(128 * math.pi, int(p["decay_Nx"]))
    basis = build_basis(BasisSpec(2, 4, 9))
    xi = grid.xi_sorted
    G0 = ProfileField.rank_one(xi, 0.05 * np.exp(-xi ** 2 / 2) / math.sqrt(2 * math.pi), special_g_n(basis, 0))
    v = wave_operator_experiment(G0, math.e, 10 * math.e, grid, dt=float(p["decay_dt"])).verdicts
    s = v["decay_slope"]
    return {"slope": s, "residual": v["decay_residual"]}, abs(s + 0.5) <= 0.1, ""


def check_separability(p):
    basis = build_basis(BasisSpec(2, 16, 33))
    xi = np.linspace(-4, 4, 64)
    pts = basis.grid_points()
    r2 = np.sum(pts * pts, axis=-1)
    eps = 0.1
    phi = np.exp(-xi ** 2 / 2)
    r = 1.5 + 0.5 * np.tanh(xi)
    rows = [basis.analyze_array(rv * np.exp(-r2 * rv * rv / 2) + 0j) for rv in r]
    seed = ProfileField(basis, xi, eps * phi[:, None] * np.array(rows))
    traj = evolve_rss(seed, 1.0, 10.0, 0.05, samples=6)
    ratios = [sigma_ratio(G) for _, G in traj]
    # vortex run: resonant-truncated evolution keeps psi(t, x) g_1(y) exactly
    grid = XGrid(32 * math.pi, 256)
    vb = build_basis(BasisSpec(2, 3, 7))
    W0 = MixedField.separable(grid, 0.05 * np.exp(-grid.x ** 2 / 8), special_g_n(vb, 1))
    vt = evolve_resonant_truncated(W0, EvolutionConfig(1.0, 2e-2, 1.0, 3.0, 5))
    vortex = max(sigma_ratio(W) for _, W in vt)
    ok = ratios[0] >= 0.01 and min(ratios) >= ratios[0] / 2 and vortex <= 1e-6
    return {"initial": ratios[0], "min_along_rss": min(ratios), "vortex_max": vortex}, ok, ""


def check_lens_commutator(p):
    basis = build_basis(BasisSpec(2, 10, 21))
    g0 = special_g_n(basis, 0)
    pts = basis.grid_points()
    lens = max(float(np.max(np.abs(lens_map(g0, t) - free_gaussian(pts, t)))) for t in (0.0, 0.2, 1.0, -0.7))
    rng = np.random.default_rng(int(p["seed"]))
    f = HermiteField.random(basis, rng, top_level=basis.n_max - 2)
    com = max(commutator_check(f, s) / f.norm() for s in (0.0, 0.3, math.pi / 2, 2.1))
    return {"lens": lens, "commutator": com}, lens <= 1e-10 and com <= 1e-10, ""


def splitting_errors(p):
    grid = XGrid(32 * math.pi, 512)
    basis = build_basis(BasisSpec(2, 4, 9))
    env = 0.05 * np.exp(-grid.x ** 2 / 2)
    U0 = (MixedField.separable(grid, env, special_g_n(basis, 0))
          + MixedField.separable(grid, env * (1 + 1j * grid.x), special_g_n(basis, 1)))
    dt = float(p["split_dt"])
    run = lambda h: evolve_cnls(U0, EvolutionConfig(1.0, h, 0.0, 1.0)).final
    ref = run(dt / 64)
    return run(dt).l2_distance(ref), run(dt / 2).l2_distance(ref)


def check_splitting(p):
    e1, e2 = splitting_errors(p)
    ratio = e1 / e2
    return {"err_dt": e1, "err_dt2": e2, "ratio": ratio}, 3.5 <= ratio <= 4.5, ""


CHECKS: list[tuple[int, str, str, Callable]] = [
    (1, "stationary eigen-solutions", "rel residual <= 1e-10, mu = 1/2, 1/4, 3/8", check_stationary),
    (2, "null interaction", "<= 1e-10", check_null),
    (3, "dual-path oracle", "rel diff <= 1e-12", check_dual_path),
    (4, "RS conservation", "dM, dKE <= 1e-8; dQ <= 1e-7", check_rs_conservation),
    (5, "quasi-periodic vortex pair", "phase error <= 1e-6 at tau = 20", check_quasi_periodic),
    (6, "Z conservation under RSS", "rel drift <= 1e-6", check_rss_z),
    (7, "continuous CR consistency", "constant spread <= 1%", check_cr),
    (8, "stationary-phase limit", "slope <= -1, ratio(50) in [0.95, 1.05]", check_stationary_phase),
    (9, "modified-scattering windows", "decreasing maxima, matched < ablated", check_matched_limit),
    (10, "quasi-1D reduction", "mismatch <= 0.1, ratios >= 3 and >= 10", check_quasi1d),
    (11, "XPM dipole", "ratio >= 2, symmetric gap <= 1e-10", check_dipole),
    (12, "dispersive decay", "slope in [-0.6, -0.4]", check_decay),
    (13, "non-separability witness", "ratio >= initial/2, vortex <= 1e-6", check_separability),
    (14, "lens and commutation identities", "<= 1e-10", check_lens_commutator),
    (15, "splitting order", "halving ratio in [3.5, 4.5]", check_splitting),
]


def run_check(number: int, overrides: dict | None = None) -> CheckResult:
    p = _params(overrides)
    for num, name, bound, fn in CHECKS:
        if num == number:
            t0 = time.perf_counter()
            measured, ok, diag = fn(p)
            return CheckResult(num, name, measured, bound, bool(ok), time.perf_counter() - t0, diag)
    raise KeyError(f"no acceptance check numbered {number}")


def run_validation(overrides: dict | None = None, only=None, progress=None) -> list[CheckResult]:
    results = []
    for num, *_ in CHECKS:
        if only is not None and num not in only:
            continue
        res = run_check(num, overrides)
        if progress is not None:
            progress(res)
        results.append(res)
    return results
