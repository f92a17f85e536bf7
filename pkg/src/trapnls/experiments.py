"""Windowed numerical experiments on modified scattering, quasi-1D reduction and separability."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .hermite import BasisSpec, HermiteBasis, HermiteField, build_basis, special_g_n
from .integrate import Trajectory
from .limit import ProfileField, evolve_rss, s_norm
from .nls import (EvolutionConfig, MixedField, apply_N0, apply_R_mixed, evolve_1d_nls,
                  evolve_cnls, evolve_resonant_truncated, evolve_xpm, linear_flow, profile_of,
                  psi1_explicit)
from .resonant import coupling_mu
from .xgrid import XGrid

WRAP_LIMIT = 1e-3


@dataclass
class ExperimentReport:
    id: str
    params: dict
    series: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    seed: int = 0
    records: list | None = None  # optional JSONL rows
    snapshot: tuple | None = None  # optional ("prf" | "mxf", final state)

    def summary(self) -> dict:
        return {"id": self.id, "params": self.params, "verdicts": self.verdicts, "seed": self.seed}

    def csv_text(self, name: str | None = None) -> str:
        """Series as CSV: the time column first, then the other columns in insertion order."""
        cols = self.series if name is None else self.series[name]
        keys = list(cols)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for row in zip(*(cols[k] for k in keys)):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def json_text(self, extra: dict | None = None) -> str:
        doc = self.summary()
        if extra:
            doc.update(extra)
        return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


# --------------------------------------------------------------------------
# small helpers

def decay_fit(t, values) -> tuple[float, float]:
    """Least-squares slope of log(values) against log(t) and the RMS residual."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.size < 8:
        raise ValidationError("decay_fit needs at least 8 samples")
    if np.any(t <= 0) or np.any(v <= 0):
        raise ValidationError("decay_fit needs positive times and values")
    if t.max() / t.min() < 10 * (1 - 1e-9):
        raise ValidationError("decay_fit samples must span a decade in t")
    A = np.vstack([np.log(t), np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
    resid = np.log(v) - A @ coef
    return float(coef[0]), float(math.sqrt(np.mean(resid ** 2)))


def log_slope(t, values) -> float:
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    return float(np.polyfit(np.log(t), np.log(v), 1)[0])


def _wrap_guard(U: MixedField, t: float) -> None:
    frac = U.edge_fraction()
    if frac > WRAP_LIMIT:
        raise ValidationError(f"t={t:.4g} is outside the wrap-safe range: {frac:.2e} of the mass is near the window edge")


def _rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a))


def _profile_diff(U: MixedField, t: float, G: ProfileField, N: int) -> tuple[float, float]:
    """(S distance, L^2 distance) between e^{-itD}U(t) and G."""
    F = profile_of(U, t).to_profile()
    diff = F - G
    rep = s_norm(diff, N, guard=False)
    l2 = math.sqrt(2 * math.pi * diff.dxi * np.sum(np.abs(diff.coeffs) ** 2))
    return rep.s_norm, l2


# --------------------------------------------------------------------------
# scattering

def scattering_distance(U_traj: Trajectory, G_traj: Trajectory, N: int = 8,
                        clock: float = math.pi) -> dict:
    """Per sample t: H^N and L^2 norms of e^{-itD}U(t) - G(clock * ln t)."""
    out = {"t": [], "h_N": [], "l2": []}
    for t, U in U_traj:
        if t < 1:
            raise ValidationError("scattering distances are defined for t >= 1")
        tau = clock * math.log(t)
        try:
            G = G_traj.at(tau)
        except KeyError:
            raise ValidationError(f"limit trajectory has no sample at tau={tau:.6g} (clock mismatch)") from None
        diff = profile_of(U, t).to_profile() - G
        rep = s_norm(diff, N, guard=False)
        out["t"].append(float(t))
        out["h_N"].append(rep.h_N)
        out["l2"].append(math.sqrt(2 * math.pi * diff.dxi * np.sum(np.abs(diff.coeffs) ** 2)))
    return out


def matched_limit_experiment(U0: MixedField, eps: float, n_windows: int = 3, kappa: float = 1.0,
                             dt: float = 2e-3, dtau: float = 1e-2, per_window: int = 12,
                             N: int = 8) -> ExperimentReport:
    """Windowed limit matching on [T_n, T_{n+1}], T_n = e^{n/pi}.

    U(1) = eps * U0.  In window n a limit-system run G_n is started from the
    current profile F(T_n) and compared with F(t) on the clock
    tau = pi ln(t / T_n); the ablation reads the same run at ln(t / T_n).
    """
    if n_windows < 1:
        raise ValidationError("need at least one window")
    T = [math.exp(n / math.pi) for n in range(n_windows + 1)]
    ts = np.unique(np.concatenate([np.linspace(T[n], T[n + 1], per_window + 1) for n in range(n_windows)]))
    traj = evolve_cnls(linear_flow(U0 * eps, 1.0), EvolutionConfig(kappa, dt, 1.0, T[-1], ts))
    _wrap_guard(traj.final, T[-1])
    series = {"t": [], "window": [], "s_matched": [], "s_ablated": [], "l2_matched": [], "l2_ablated": []}
    win_m, win_a = [], []
    for n in range(n_windows):
        F_n = profile_of(traj.at(T[n]), T[n]).to_profile()
        wt = [t for t in ts if T[n] - 1e-12 <= t <= T[n + 1] + 1e-12]
        tau_m = [math.pi * math.log(t / T[n]) for t in wt]
        tau_a = [math.log(t / T[n]) for t in wt]
        rss = evolve_rss(F_n, kappa, max(tau_m), dtau, samples=sorted(set(tau_m + tau_a)))
        mm, aa = [], []
        for t, a, b in zip(wt, tau_m, tau_a):
            sm, lm = _profile_diff(traj.at(t), t, rss.at(a), N)
            sa, la = _profile_diff(traj.at(t), t, rss.at(b), N)
            for k, v in zip(series, (t, n, sm, sa, lm, la)):
                series[k].append(v)
            mm.append(sm)
            aa.append(sa)
        win_m.append(max(mm))
        win_a.append(max(aa))
    verdicts = {
        "window_max_matched": win_m,
        "window_max_ablated": win_a,
        "strictly_decreasing": all(b < a for a, b in zip(win_m, win_m[1:])),
        "matched_beats_ablation": all(m < a for m, a in zip(win_m, win_a)),
    }
    params = {"eps": eps, "n_windows": n_windows, "kappa": kappa, "dt": dt, "dtau": dtau, "N": N,
              "L_x": U0.grid.L, "N_x": U0.grid.N, "n_max": U0.basis.n_max}
    return ExperimentReport("matched-limit", params, series, verdicts)


def wave_operator_experiment(G0: ProfileField, t0: float, t1: float, grid: XGrid, kappa: float = 1.0,
                             dt: float = 1e-2, dtau: float = 1e-2, n_samples: int = 16,
                             N: int = 8) -> ExperimentReport:
    """Seed U(t0) = e^{it0 D} G(pi ln t0), evolve the full equation, track drift and decay."""
    if t0 < math.e - 1e-12:
        raise ValidationError("wave-operator runs start at t0 >= e")
    ts = np.geomspace(t0, t1, n_samples)
    taus = [math.pi * math.log(t) for t in ts]
    G = evolve_rss(G0, kappa, taus[-1], dtau, samples=[0.0] + taus)
    U_seed = linear_flow(MixedField.from_profile(grid, G.at(taus[0])), t0)
    traj = evolve_cnls(U_seed, EvolutionConfig(kappa, dt, t0, t1, ts))
    _wrap_guard(traj.final, t1)
    series = {"t": [], "drift_s": [], "drift_l2": [], "linf": []}
    for t, U, tau in zip(ts, traj.states, taus):
        s, l2 = _profile_diff(U, t, G.at(tau), N)
        series["t"].append(float(t))
        series["drift_s"].append(s)
        series["drift_l2"].append(l2)
        series["linf"].append(U.linf_h1())
    slope, resid = decay_fit(series["t"], series["linf"]) if t1 / t0 >= 10 else (float("nan"), float("nan"))
    verdicts = {"max_drift_s": max(series["drift_s"]), "max_drift_l2": max(series["drift_l2"]),
                "decay_slope": slope, "decay_residual": resid}
    params = {"t0": t0, "t1": t1, "kappa": kappa, "dt": dt, "dtau": dtau, "N": N,
              "L_x": grid.L, "N_x": grid.N, "n_max": G0.basis.n_max}
    return ExperimentReport("wave-operator", params, series, verdicts)


# --------------------------------------------------------------------------
# quasi-1D reductions

def _end_window(values: Sequence[float], frac: float = 0.25) -> float:
    v = np.asarray(values)
    k = max(1, int(math.ceil(frac * len(v))))
    return float(v[-k:].max())


def quasi1d_experiment(n: int, phi, variant: str, eps: float, grid: XGrid, n_max: int | None = None,
                       t0: float = 1.0, t1: float = 21.0, dt: float = 1e-2, kappa: float = 1.0,
                       n_samples: int = 41, ablation: float = 1.2) -> ExperimentReport:
    """Full-equation vortex run against psi(t, x) e^{2i(n+1)t} g_n(y).

    The data are seeded from the log-modified solution at t0:
    U(t0) = eps psi1(t0) e^{2i(n+1)t0} g_n with psi1(1) = phi.  ``variant``
    picks the comparison psi: 'fixed-coupling' evolves the 1D cubic NLS with
    coupling mu_n from psi1(t0), 'log-modified' uses psi1 itself.  Ablations
    replace mu_n by ``ablation * mu_n`` or drop the e^{2i(n+1)t} factor.
    """
    if variant not in ("fixed-coupling", "log-modified"):
        raise ValidationError(f"unknown variant {variant!r}")
    n_max = 2 * n + 4 if n_max is None else n_max
    basis = build_basis(BasisSpec(2, n_max, 2 * n_max + 1))
    gn = special_g_n(basis, n)
    mu = coupling_mu(n)
    phi = eps * np.asarray(phi, dtype=complex)
    ts = np.linspace(t0, t1, n_samples)
    freq = 2.0 * (n + 1)

    def seed_psi(coupling):
        return psi1_explicit(grid, phi, t0, coupling, kappa)

    psi0 = seed_psi(mu)
    U0 = MixedField.separable(grid, psi0 * np.exp(1j * freq * t0), gn)
    traj = evolve_cnls(U0, EvolutionConfig(kappa, dt, t0, t1, ts))
    _wrap_guard(traj.final, t1)

    def targets(coupling):
        if variant == "log-modified":
            return [psi1_explicit(grid, phi, t, coupling, kappa) for t in ts]
        return evolve_1d_nls(grid, psi0, coupling, EvolutionConfig(kappa, dt, t0, t1, ts)).states

    match, abl, nophase = [], [], []
    for t, U, pm, pa in zip(ts, traj.states, targets(mu), targets(ablation * mu)):
        phys = U.physical()
        tm = pm[:, None] * np.exp(1j * freq * t) * gn.coeffs[None, :]
        ta = pa[:, None] * np.exp(1j * freq * t) * gn.coeffs[None, :]
        tn = pm[:, None] * gn.coeffs[None, :]
        match.append(_rel_l2(tm, phys))
        abl.append(_rel_l2(ta, phys))
        nophase.append(_rel_l2(tn, phys))
    series = {"t": list(map(float, ts)), "mismatch": match, "mismatch_coupling_ablation": abl,
              "mismatch_no_phase": nophase}
    end_m = _end_window(match)
    verdicts = {
        "max_mismatch": max(match),
        "end_mismatch": end_m,
        "coupling_ablation_ratio": _end_window(abl) / end_m if end_m > 0 else float("inf"),
        "phase_ablation_ratio": _end_window(nophase) / end_m if end_m > 0 else float("inf"),
    }
    params = {"n": n, "variant": variant, "eps": eps, "t0": t0, "t1": t1, "dt": dt, "kappa": kappa,
              "n_max": n_max, "L_x": grid.L, "N_x": grid.N, "ablation": ablation}
    return ExperimentReport(f"quasi1d-n{n}", params, series, verdicts)


def vortex_dipole_experiment(phi_plus, phi_minus, eps: float, grid: XGrid, n_max: int = 5,
                             t0: float = 1.0, t1: float = 21.0, dt: float = 1e-2, kappa: float = 1.0,
                             n_samples: int = 41) -> ExperimentReport:
    """Full-equation run from eps (phi_+ g_1 + phi_- conj g_1) against the XPM pair.

    Target: psi_+ e^{4it} g_1 + psi_- e^{4it} conj(g_1); the ablation drops the
    cross-phase term of the pair system.
    """
    basis = build_basis(BasisSpec(2, n_max, 2 * n_max + 1))
    g, gb = special_g_n(basis, 1), special_g_n(basis, 1, conjugate=True)
    pp = eps * np.asarray(phi_plus, dtype=complex)
    pm = eps * np.asarray(phi_minus, dtype=complex)
    ts = np.linspace(t0, t1, n_samples)
    ph0 = np.exp(4j * t0)
    U0 = MixedField(grid, basis, ph0 * (pp[:, None] * g.coeffs + pm[:, None] * gb.coeffs))
    traj = evolve_cnls(U0, EvolutionConfig(kappa, dt, t0, t1, ts))
    _wrap_guard(traj.final, t1)
    cfg = EvolutionConfig(kappa, dt, t0, t1, ts)
    xpm = evolve_xpm(grid, pp, pm, cfg, cross=True)
    dec = evolve_xpm(grid, pp, pm, cfg, cross=False)
    match, abl, sym = [], [], []
    for t, U, (a, b), (c, e) in zip(ts, traj.states, xpm.states, dec.states):
        ph = np.exp(4j * t)
        phys = U.physical()
        match.append(_rel_l2(ph * (a[:, None] * g.coeffs + b[:, None] * gb.coeffs), phys))
        abl.append(_rel_l2(ph * (c[:, None] * g.coeffs + e[:, None] * gb.coeffs), phys))
        sym.append(float(np.max(np.abs(a - b))))
    end_m = _end_window(match)
    series = {"t": list(map(float, ts)), "mismatch": match, "mismatch_decoupled": abl, "plus_minus_gap": sym}
    verdicts = {"max_mismatch": max(match), "end_mismatch": end_m,
                "decoupled_ratio": _end_window(abl) / end_m if end_m > 0 else float("inf"),
                "max_plus_minus_gap": max(sym)}
    params = {"eps": eps, "t0": t0, "t1": t1, "dt": dt, "kappa": kappa, "n_max": n_max,
              "L_x": grid.L, "N_x": grid.N}
    return ExperimentReport("vortex-dipole", params, series, verdicts)


# --------------------------------------------------------------------------
# separability and stationary phase

def separability_spectrum(field) -> np.ndarray:
    """Singular values of the (xi node x Hermite mode) coefficient matrix."""
    if isinstance(field, MixedField):
        mat = field.spectral()
    elif isinstance(field, ProfileField):
        mat = field.coeffs
    else:
        raise ValidationError("expected a ProfileField or MixedField")
    return np.linalg.svd(mat, compute_uv=False)


def sigma_ratio(field) -> float:
    s = separability_spectrum(field)
    return float(s[1] / s[0]) if len(s) > 1 and s[0] > 0 else 0.0


def stationary_phase_ratio(F: MixedField, t_list, M_s: int | None = None) -> ExperimentReport:
    """D(t) = ||N_0^t[F,F,F] - (pi/t) R[F,F,F]||_{L^2} and t ||N_0^t|| / (pi ||R||) for frozen F."""
    t_list = np.asarray(sorted(t_list), dtype=float)
    R = apply_R_mixed(F, M_s).spectral()
    norm = lambda a: math.sqrt(2 * math.pi * F.grid.dxi * np.sum(np.abs(a) ** 2))
    nR = norm(R)
    series = {"t": [], "D": [], "ratio": []}
    for t in t_list:
        if t <= 0:
            raise ValidationError("times must be positive")
        # wrap check on the freely evolved data at this time
        _wrap_guard(linear_flow(F, t), t)
        N0 = apply_N0(F, F, F, t, M_s).spectral()
        series["t"].append(float(t))
        series["D"].append(norm(N0 - (math.pi / t) * R))
        series["ratio"].append(t * norm(N0) / (math.pi * nR) if nR > 0 else float("nan"))
    slope = log_slope(series["t"], series["D"]) if len(t_list) > 1 and min(series["D"]) > 0 else float("nan")
    params = {"L_x": F.grid.L, "N_x": F.grid.N, "n_max": F.basis.n_max,
              "M_s": M_s if M_s is not None else 2 * F.basis.n_max + 1}
    return ExperimentReport("stationary-phase", params, series, {"slope": slope})
