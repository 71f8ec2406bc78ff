"""Per-draw pipeline and seeded Monte Carlo sweeps."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .channel import build_channel, configure_ris, draw_fading
from .config import ExperimentConfig
from .emf import compliance_json, enhanced_bf, exposure, reduced_bf
from .evaluation import (SweepSummary, exceedance_map, render_heatmap, summarize_sweep,
                         write_grid_csv, write_grid_svg)
from .power import capacity, reference_bf
from .precoding import admit_layers, build_precoder, decompose_ue, select_layers
from .scene import build_scene, circle_points, sample_safety_circle

log = logging.getLogger(__name__)

TARGET_CAPACITY_RETENTION_PCT = 70.0


def draw_seeds(master_seed: int, L: int, draw_index: int, freeze_geometry: bool = False):
    """(geometry, fading) seed sequences for one draw."""
    per_draw = np.random.SeedSequence(entropy=master_seed, spawn_key=(L, draw_index))
    geom, fading = per_draw.spawn(2)
    if freeze_geometry:
        geom = np.random.SeedSequence(entropy=master_seed, spawn_key=(L,))
    return geom, fading


@dataclass
class DrawResult:
    """Everything computed for one draw; ``simulate`` and ``validate`` use it."""

    L: int
    draw_index: int
    scene: object
    channels: object
    decomps: list
    precoder: object
    circle: object
    audit: object
    bfs: dict
    profiles: dict
    audit_profiles: dict
    trace: object = None


def simulate_draw(config: ExperimentConfig, L: int, draw_index: int) -> DrawResult:
    params = config.params
    geom_ss, fade_ss = draw_seeds(config.seed, L, draw_index, config.freeze_geometry)
    scene = build_scene(config.scene_for(L), params, np.random.default_rng(geom_ss))
    fading = draw_fading(scene, np.random.default_rng(fade_ss))
    ris = configure_ris(scene, fading, config.ris_assignment)
    channels = build_channel(scene, fading, ris)

    decomps = [decompose_ue(H) for H in channels.per_ue]
    if config.layer_policy == "strict":
        layer_map = select_layers(decomps, config.layers_per_ue)
    else:
        layer_map = admit_layers(decomps, config.layers_per_ue)
    precoder = build_precoder(decomps, layer_map)

    circle = sample_safety_circle(scene, params)
    audit = circle_points(scene.bs_center, params.safety_radius,
                          config.audit_factor * params.n_circle_samples)

    ref = reference_bf(precoder, params)
    prof = exposure(ref, circle, scene)
    bfs = {"reference": ref}
    profiles = {"reference": prof}
    trace = None
    if "reduced" in config.schemes:
        bfs["reduced"] = reduced_bf(ref, prof, params.emf_threshold)
        profiles["reduced"] = exposure(bfs["reduced"], circle, scene, gains=prof.layer_gains)
    if "enhanced" in config.schemes:
        bfs["enhanced"], trace = enhanced_bf(ref, circle, scene, params.emf_threshold,
                                             max_iterations=config.max_iterations,
                                             tol=config.compliance_tol, gains=prof.layer_gains)
        profiles["enhanced"] = exposure(bfs["enhanced"], circle, scene, gains=prof.layer_gains)

    audit_gains = None
    audit_profiles = {}
    for name, bf in bfs.items():
        audit_profiles[name] = exposure(bf, audit, scene, gains=audit_gains)
        audit_gains = audit_profiles[name].layer_gains
    return DrawResult(L=L, draw_index=draw_index, scene=scene, channels=channels,
                      decomps=decomps, precoder=precoder, circle=circle, audit=audit,
                      bfs=bfs, profiles=profiles, audit_profiles=audit_profiles, trace=trace)


@dataclass
class DrawRecord:
    L: int
    draw_index: int
    seed: int
    failed: bool = False
    reason: str = ""
    nu: int = 0
    alpha: float = float("nan")
    enh_iterations: int = -1
    metrics: dict = field(default_factory=dict)

    @property
    def spawn_key(self):
        return (self.L, self.draw_index)


def record_from_result(config: ExperimentConfig, res: DrawResult) -> DrawRecord:
    p = config.params
    gains = res.precoder.layer_map.gains
    metrics = {}
    for name, bf in res.bfs.items():
        cap = capacity(bf.powers, gains, p.bandwidth, p.noise_power, config.log_base)
        metrics[name] = {"power_w": bf.total_power, "capacity_mbps": cap / 1e6,
                         "max_circle_power_w": res.profiles[name].max_power,
                         "audit_max_power_w": res.audit_profiles[name].max_power}
    rec = DrawRecord(L=res.L, draw_index=res.draw_index, seed=config.seed,
                     nu=res.precoder.layer_map.nu, metrics=metrics)
    if "reduced" in res.bfs:
        rec.alpha = float(res.bfs["reduced"].extras["alpha"])
    if res.trace is not None:
        rec.enh_iterations = res.trace.iterations
    return rec


def run_draw(config: ExperimentConfig, L: int, draw_index: int) -> DrawRecord:
    """One draw end to end. Component errors mark the record failed instead of raising."""
    try:
        return record_from_result(config, simulate_draw(config, L, draw_index))
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        log.warning("draw L=%d #%d failed: %s", L, draw_index, exc)
        return DrawRecord(L=L, draw_index=draw_index, seed=config.seed, failed=True,
                          reason=f"{type(exc).__name__}: {exc}")


def _run_chunk(args):
    config, jobs = args
    return [run_draw(config, L, d) for L, d in jobs]


def run_records(config: ExperimentConfig, workers: int = 1) -> list[DrawRecord]:
    jobs = [(L, d) for L in config.ue_counts for d in range(config.n_draws)]
    if workers <= 1:
        return [run_draw(config, L, d) for L, d in jobs]
    n_chunks = workers * 4
    chunks = [jobs[i::n_chunks] for i in range(n_chunks)]
    chunks = [c for c in chunks if c]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_chunk, [(config, c) for c in chunks])
        records = [r for part in parts for r in part]
    return sorted(records, key=lambda r: (r.L, r.draw_index))


DRAW_COLUMNS_BASE = ["L", "draw", "status", "reason", "nu", "alpha", "enh_iterations"]
METRIC_KEYS = ["power_w", "capacity_mbps", "max_circle_power_w", "audit_max_power_w"]


def write_draws_csv(path, records, schemes) -> None:
    schemes = ["reference"] + [s for s in schemes if s != "reference"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DRAW_COLUMNS_BASE + [f"{s}_{k}" for s in schemes for k in METRIC_KEYS])
        for r in sorted(records, key=lambda r: (r.L, r.draw_index)):
            row = [r.L, r.draw_index, "failed" if r.failed else "ok", r.reason, r.nu,
                   repr(r.alpha), r.enh_iterations]
            for s in schemes:
                m = r.metrics.get(s, {})
                row += [repr(float(m[k])) if k in m else "" for k in METRIC_KEYS]
            w.writerow(row)


def exposure_upper_bound_w(config: ExperimentConfig) -> float:
    """Largest possible received power on the safety circle.

    Cauchy-Schwarz: ||h B||^2 <= ||h||^2 tr(B B^H), and every probe channel
    coefficient at range >= R - aperture/2 is at most lambda / (4 pi d).
    """
    p = config.params
    lam = p.wavelength
    half_ap = (config.scene.n_bs - 1) * 0.25 * lam
    d = p.safety_radius - half_ap
    return config.scene.n_bs * (lam / (4 * math.pi * d)) ** 2 * p.max_power


def discrepancy_notes(config: ExperimentConfig) -> list[str]:
    bound = exposure_upper_bound_w(config)
    notes = [
        "placement law is assumed: UE, RIS and scatterer centers uniform in area over "
        f"[{config.scene.r_min}, {config.scene.r_max}] m around the BS",
        "noise power default is a thermal-floor guess (-94 dBm over 100 MHz); it sets the "
        "SNR regime and hence how much capacity survives a power cut",
        "scatterer and RIS paths carry no distance-dependent path loss, so SNRs are very high "
        "and capacity retention is compressed toward 100%",
        f"circle sampled at {config.params.n_circle_samples} equal-angle points",
        "stacked channel rank is at most S + Z; layers are admitted jointly "
        f"(policy '{config.layer_policy}'), so nu <= {config.scene.n_scatterers + config.scene.n_ris}",
        "fading coefficients are unit-power circular complex Gaussian",
    ]
    if bound <= config.params.emf_threshold:
        notes.append(
            f"exposure on the safety circle is bounded by {10 * math.log10(bound) + 30:.2f} dBm "
            f"< threshold {config.params.emf_threshold_dbm:.2f} dBm: the EMF constraint can never "
            "bind, so reduced and enhanced equal reference on every draw")
    return notes


def _code_version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:  # pragma: no cover
        return "unknown"


def ensure_writable(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_test"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise PermissionError(f"output directory {out} is not writable: {exc}") from exc
    return out


def write_draw_artifacts(config: ExperimentConfig, res: DrawResult, out_dir) -> dict:
    """Heatmaps, exceedance maps and compliance JSON for one draw."""
    out = ensure_writable(out_dir)
    p = config.params
    hw = config.heatmap_half_width_m
    region = (-hw, -hw, 2 * hw, 2 * hw)
    report = {"L": res.L, "draw": res.draw_index, "seed": config.seed, "schemes": {}}
    for name, bf in res.bfs.items():
        if config.heatmaps:
            grid = render_heatmap(bf, res.scene, region, config.heatmap_resolution_m)
            exc = exceedance_map(grid, p.emf_threshold, p.safety_radius)
            write_grid_csv(out / f"heatmap_{name}.csv", grid)
            write_grid_svg(out / f"heatmap_{name}.svg", grid)
            write_grid_csv(out / f"exceedance_{name}.csv", exc)
            write_grid_svg(out / f"exceedance_{name}.svg", exc)
        doc = compliance_json(bf, res.profiles[name], p, res.audit_profiles[name])
        if config.heatmaps:
            doc["exceedance_cells"] = exc.count
        report["schemes"][name] = doc
    (out / "compliance.json").write_text(json.dumps(report, indent=2))
    return report


def run_sweep(config: ExperimentConfig, workers: int = 1, out_dir=None):
    """Full Monte Carlo sweep. Returns ``(summary, records)`` and writes artifacts.

    Files: ``summary.csv``, ``draws.csv``, ``manifest.json`` and, when the
    showcase UE count is part of the sweep, ``showcase/`` maps.
    """
    out = ensure_writable(out_dir or config.output_dir)
    records = run_records(config, workers)
    summary = summarize_sweep(records)
    summary.to_csv(out / "summary.csv")
    write_draws_csv(out / "draws.csv", records, config.schemes)

    if config.heatmaps and config.showcase_ues in config.ue_counts:
        try:
            res = simulate_draw(config, config.showcase_ues, config.showcase_draw)
            write_draw_artifacts(config, res, out / "showcase")
        except (ValueError, RuntimeError) as exc:
            log.warning("showcase draw failed: %s", exc)

    enh = {}
    for L in summary.ue_counts:
        try:
            enh[str(L)] = summary.row(L, "enhanced").capacity_pct_vs_ref
        except KeyError:
            pass
    manifest = {
        "config": config.to_dict(),
        "seed": config.seed,
        "code_version": _code_version(),
        "backend": _kernels.BACKEND,
        "n_records": len(records),
        "n_failed": {str(k): v for k, v in summary.n_failed.items()},
        "capacity_retention_target_pct": TARGET_CAPACITY_RETENTION_PCT,
        "enhanced_capacity_pct_vs_ref": enh,
        "exposure_upper_bound_dbm": 10 * math.log10(exposure_upper_bound_w(config)) + 30,
        "discrepancy_notes": discrepancy_notes(config),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return summary, records


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
