"""Runtime invariant checks behind ``ris-emf validate``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import gain_ris_path, gain_scatterer_path, path_phase_ris, path_phase_scatterer
from .channel import probe_matrix
from .config import ExperimentConfig
from .harness import simulate_draw
from .power import kkt_residuals, waterfill
from .precoding import zf_check
from .scene import dbm_to_watts, watts_to_dbm


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<44s} {self.value:10.3e} <= {self.limit:.1e}"


def _rel(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    den = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b)) / den)


def naive_channel(scene, fading, ris):
    """Per-path summation through the scalar phase and gain functions."""
    L, N, M = scene.n_ues, scene.n_ue_antennas, scene.n_bs
    lam = scene.wavelength
    H = np.zeros((L, N, M), dtype=complex)
    for l in range(L):
        for n in range(N):
            for m in range(M):
                acc = 0j
                for s in range(scene.n_scatterers):
                    d1, d2 = path_phase_scatterer(scene, m, s, l, n)
                    acc += gain_scatterer_path(fading.scatterer_coeffs[s], d1, d2, lam)
                for z in range(scene.n_ris):
                    for k in range(scene.n_ris_elements):
                        e1, e2 = path_phase_ris(scene, m, z, k, l, n)
                        acc += gain_ris_path(fading.ris_coeffs[z], ris.reflection_amplitude,
                                             ris.weights[z, k], e1, e2, lam)
                H[l, n, m] = acc
    return H


def run_checks(config: ExperimentConfig, L: int | None = None, draw_index: int = 0):
    L = config.showcase_ues if L is None else L
    p = config.params
    res = simulate_draw(config, L, draw_index)
    out = []

    def add(name, value, limit):
        out.append(CheckResult(name, bool(value <= limit), float(value), float(limit)))

    add("dBm round trip", abs(dbm_to_watts(watts_to_dbm(p.emf_threshold)) / p.emf_threshold - 1),
        1e-12)
    radii = np.linalg.norm(res.circle.points - res.scene.bs_center, axis=1)
    add("circle radius", float(np.max(np.abs(radii - p.safety_radius)) / p.safety_radius), 1e-9)

    ch = res.channels
    add("channel vs per-path summation", _rel(ch.per_ue, naive_channel(res.scene, ch.fading,
                                                                       ch.ris_config)), 1e-12)
    worst = 0.0
    for H, d in zip(ch.per_ue, res.decomps):
        rec = d.U @ np.diag(d.singular_values) @ d.V.conj().T
        worst = max(worst, np.linalg.norm(rec - H) / np.linalg.norm(H))
    add("SVD reconstruction", worst, 1e-10)

    pre = res.precoder
    add("pseudo-inverse V~ V~+ = I",
        float(np.linalg.norm(pre.V_tilde @ pre.V_tilde_pinv - np.eye(pre.layer_map.nu))), 1e-8)
    add("coupling c_i >= 1", float(max(0.0, 1 - 1e-8 - pre.coupling.min())), 0.0)

    ref = res.bfs["reference"]
    tr = float(np.real(np.trace(ref.B @ ref.B.conj().T)))
    add("trace identity tr(BB^H) = sum P_i c_i", abs(tr - ref.total_power) / tr, 1e-10)
    intf, gain_err = zf_check(ch.per_ue, res.decomps, ref)
    add("ZF inter-stream leakage", intf, 1e-8)
    add("ZF per-layer gain sqrt(lambda P)", gain_err, 1e-8)

    sol = waterfill(pre.layer_map.gains, pre.coupling, p.max_power, p.noise_power)
    stat, slack, feas = kkt_residuals(sol, pre.layer_map.gains, pre.coupling, p.max_power,
                                      p.noise_power)
    add("water-filling stationarity", stat, 1e-8)
    add("water-filling complementary slackness", slack, 1e-8)
    add("water-filling feasibility", feas, 1e-9)

    HQ = probe_matrix(res.scene, res.circle.points)
    for name, bf in res.bfs.items():
        direct = np.sum(np.abs(HQ @ bf.B) ** 2, axis=1)
        add(f"{name}: norm form = trace form", _rel(res.profiles[name].powers, direct), 1e-10)
        add(f"{name}: transmit power <= Pmax",
            max(0.0, bf.total_power / p.max_power - 1.0), 1e-9)

    th = p.emf_threshold
    if "reduced" in res.bfs:
        red = res.bfs["reduced"]
        add("reduced: max circle power <= EMF_th",
            max(0.0, res.profiles["reduced"].max_power / th - 1.0), 1e-9)
        if red.extras["alpha"] < 1:
            add("reduced: tight at EMF_th", abs(res.profiles["reduced"].max_power / th - 1.0),
                1e-9)
    if "enhanced" in res.bfs:
        enh = res.bfs["enhanced"]
        add("enhanced: max circle power <= EMF_th",
            max(0.0, res.profiles["enhanced"].max_power / th - 1.0), config.compliance_tol)
        add("enhanced: layer powers <= reference",
            float(np.max(np.maximum(enh.powers - ref.powers, 0.0), initial=0.0)), 0.0)
        seq = res.trace.p_max
        rises = float(np.max(np.diff(seq), initial=0.0)) if seq.size > 1 else 0.0
        add("enhanced: worst-point power non-increasing", max(rises, 0.0), 0.0)
    return res, out
