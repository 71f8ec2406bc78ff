"""Spatial maps and Monte Carlo summaries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _kernels
from .precoding import BeamformingMatrix
from .scene import Scene

DBM_FLOOR = -150.0
SVG_SCALE = (-150.0, 40.0)
SCHEMES = ("reference", "reduced", "enhanced")


@dataclass(frozen=True, eq=False)
class HeatmapGrid:
    origin: tuple[float, float]   # lower-left corner (x, y)
    extent: tuple[float, float]
    resolution: float
    values: np.ndarray            # (ny, nx) dBm, NaN where masked
    scheme: str

    @property
    def shape(self):
        return self.values.shape

    def cell_centers(self):
        ny, nx = self.values.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.resolution
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.resolution
        return xs, ys


def default_region(half_width: float = 200.0):
    return (-half_width, -half_width, 2 * half_width, 2 * half_width)


def render_heatmap(bf: BeamformingMatrix, scene: Scene, region=None, resolution: float = 1.0,
                   floor_dbm: float = DBM_FLOOR) -> HeatmapGrid:
    """Received power ||H^Q B||^2 in dBm at every cell center.

    ``region`` is ``(x0, y0, width, height)`` in meters, centered on the BS by
    default. Cells that contain a BS element are masked with NaN.
    """
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    x0, y0, w, h = default_region() if region is None else region
    nx = int(round(w / resolution))
    ny = int(round(h / resolution))
    if nx < 1 or ny < 1:
        raise ValueError("region smaller than one cell")
    xs = x0 + (np.arange(nx) + 0.5) * resolution
    ys = y0 + (np.arange(ny) + 0.5) * resolution
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])

    mask = np.zeros((ny, nx), dtype=bool)
    ix = np.floor((scene.bs_elements[:, 0] - x0) / resolution).astype(int)
    iy = np.floor((scene.bs_elements[:, 1] - y0) / resolution).astype(int)
    inside = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    mask[iy[inside], ix[inside]] = True
    # a cell center sitting exactly on an element would divide by zero
    keep = ~mask.ravel()

    power = np.zeros(pts.shape[0])
    if np.any(bf.powers > 0):
        power[keep] = _kernels.probe_layer_power(
            scene.bs_elements, pts[keep], scene.wavelength, bf.B).sum(axis=1)
    with np.errstate(divide="ignore"):
        dbm = np.where(power > 0, 10.0 * np.log10(np.where(power > 0, power, 1.0)) + 30.0,
                       floor_dbm)
    dbm = np.maximum(dbm, floor_dbm).reshape(ny, nx)
    dbm[mask] = np.nan
    return HeatmapGrid(origin=(float(x0), float(y0)), extent=(nx * resolution, ny * resolution),
                       resolution=float(resolution), values=dbm, scheme=bf.scheme)


@dataclass(frozen=True, eq=False)
class ExceedanceMap:
    origin: tuple[float, float]
    extent: tuple[float, float]
    resolution: float
    exceed: np.ndarray       # bool
    applicable: np.ndarray   # False inside the safety circle or masked
    scheme: str

    @property
    def count(self) -> int:
        return int(np.sum(self.exceed))

    def codes(self) -> np.ndarray:
        """1 exceeds, 0 compliant, -1 not applicable."""
        out = self.exceed.astype(np.int8)
        out[~self.applicable] = -1
        return out


def exceedance_map(heatmap: HeatmapGrid, emf_threshold: float, radius: float,
                   center=(0.0, 0.0)) -> ExceedanceMap:
    """Cells outside the safety circle whose received power is above threshold."""
    xs, ys = heatmap.cell_centers()
    X, Y = np.meshgrid(xs, ys)
    outside = np.hypot(X - center[0], Y - center[1]) > radius
    applicable = outside & np.isfinite(heatmap.values)
    th_dbm = 10.0 * math.log10(emf_threshold) + 30.0
    exceed = applicable & (np.nan_to_num(heatmap.values, nan=-np.inf) > th_dbm)
    return ExceedanceMap(origin=heatmap.origin, extent=heatmap.extent,
                         resolution=heatmap.resolution, exceed=exceed, applicable=applicable,
                         scheme=heatmap.scheme)


# ---------------------------------------------------------------------------
# grid writers

def write_grid_csv(path, grid: HeatmapGrid | ExceedanceMap) -> None:
    values = grid.values if isinstance(grid, HeatmapGrid) else grid.codes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["origin_x", "origin_y", "extent_x", "extent_y", "resolution", "scheme"])
        w.writerow([grid.origin[0], grid.origin[1], grid.extent[0], grid.extent[1],
                    grid.resolution, grid.scheme])
        for row in values:
            w.writerow([f"{v:.6g}" if isinstance(v, (float, np.floating)) else int(v)
                        for v in row])


def read_grid_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        head = next(r)
        rows = [[float(v) for v in row] for row in r]
    meta = {"origin": (float(head[0]), float(head[1])), "extent": (float(head[2]), float(head[3])),
            "resolution": float(head[4]), "scheme": head[5]}
    return meta, np.array(rows)


_STOPS = np.array([  # dark blue -> teal -> yellow -> red
    [0.05, 0.03, 0.30], [0.13, 0.40, 0.55], [0.20, 0.70, 0.45],
    [0.95, 0.85, 0.20], [0.80, 0.10, 0.10]])


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0) * (len(_STOPS) - 1)
    i = min(int(t), len(_STOPS) - 2)
    c = _STOPS[i] + (t - i) * (_STOPS[i + 1] - _STOPS[i])
    return "#%02x%02x%02x" % tuple(int(round(255 * v)) for v in c)


def write_grid_svg(path, grid: HeatmapGrid | ExceedanceMap, levels: int = 64) -> None:
    """Row-run-length SVG; heatmaps use the fixed -150..+40 dBm scale."""
    if isinstance(grid, HeatmapGrid):
        lo, hi = SVG_SCALE
        v = grid.values
        q = np.where(np.isnan(v), -1,
                     np.clip(((v - lo) / (hi - lo) * (levels - 1)).round(), 0, levels - 1))
        palette = {k: _color(k / (levels - 1)) for k in range(levels)}
        palette[-1] = "#ffffff"
    else:
        q = grid.codes().astype(int)
        palette = {-1: "#dddddd", 0: "#ffffff", 1: "#c00000"}
    ny, nx = q.shape
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx}" height="{ny}" '
             f'viewBox="0 0 {nx} {ny}" shape-rendering="crispEdges">']
    for j in range(ny):
        row = q[ny - 1 - j]   # north up
        start = 0
        for i in range(1, nx + 1):
            if i == nx or row[i] != row[start]:
                parts.append(f'<rect x="{start}" y="{j}" width="{i - start}" height="1" '
                             f'fill="{palette[int(row[start])]}"/>')
                start = i
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


# ---------------------------------------------------------------------------
# Monte Carlo summary

class RunningStats:
    """Welford accumulator with Chan's merge."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def merge(self, other: "RunningStats") -> "RunningStats":
        out = RunningStats()
        out.n = self.n + other.n
        if out.n == 0:
            return out
        d = other.mean - self.mean
        out.mean = self.mean + d * other.n / out.n
        out.m2 = self.m2 + other.m2 + d * d * self.n * other.n / out.n
        return out

    @property
    def se(self) -> float:
        if self.n < 2:
            return float("nan")
        return math.sqrt(self.m2 / (self.n - 1) / self.n)


@dataclass(frozen=True)
class SummaryRow:
    L: int
    scheme: str
    mean_capacity_mbps: float
    se_capacity: float
    mean_power_w: float
    se_power: float
    power_pct_vs_ref: float
    capacity_pct_vs_ref: float
    n_draws: int


SUMMARY_COLUMNS = ("L", "scheme", "mean_capacity_mbps", "se_capacity", "mean_power_w",
                   "se_power", "power_pct_vs_ref", "capacity_pct_vs_ref", "n_draws")


@dataclass(frozen=True)
class SweepSummary:
    rows: tuple[SummaryRow, ...]
    n_failed: dict

    def row(self, L: int, scheme: str) -> SummaryRow:
        for r in self.rows:
            if r.L == L and r.scheme == scheme:
                return r
        raise KeyError((L, scheme))

    @property
    def ue_counts(self) -> list[int]:
        return sorted({r.L for r in self.rows})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for r in self.rows:
                w.writerow([r.L, r.scheme] + [repr(float(getattr(r, c)))
                                              for c in SUMMARY_COLUMNS[2:-1]] + [r.n_draws])


def summarize_sweep(records: Iterable) -> SweepSummary:
    """Per-L, per-scheme means and standard errors over successful draws.

    Records are sorted by (L, draw_index) before accumulation so the result
    does not depend on the order in which workers returned them.
    """
    records = sorted(records, key=lambda r: (r.L, r.draw_index))
    if not records:
        raise ValueError("no draw records to summarize")
    stats: dict = {}
    failed: dict = {}
    schemes_seen: dict = {}
    for rec in records:
        failed.setdefault(rec.L, 0)
        if rec.failed:
            failed[rec.L] += 1
            continue
        for scheme, m in rec.metrics.items():
            cap, pw = stats.setdefault((rec.L, scheme), (RunningStats(), RunningStats()))
            cap.push(m["capacity_mbps"])
            pw.push(m["power_w"])
            schemes_seen.setdefault(rec.L, [])
            if scheme not in schemes_seen[rec.L]:
                schemes_seen[rec.L].append(scheme)
    rows = []
    for L in sorted(failed):
        if L not in schemes_seen:
            continue
        order = [s for s in SCHEMES if s in schemes_seen[L]] + \
                [s for s in schemes_seen[L] if s not in SCHEMES]
        ref = stats.get((L, "reference"))
        for scheme in order:
            cap, pw = stats[(L, scheme)]
            if ref is not None:
                p_pct = 100.0 * pw.mean / ref[1].mean if ref[1].mean else float("nan")
                c_pct = 100.0 * cap.mean / ref[0].mean if ref[0].mean else float("nan")
            else:
                p_pct = c_pct = float("nan")
            rows.append(SummaryRow(L=L, scheme=scheme, mean_capacity_mbps=cap.mean,
                                   se_capacity=cap.se, mean_power_w=pw.mean, se_power=pw.se,
                                   power_pct_vs_ref=p_pct, capacity_pct_vs_ref=c_pct,
                                   n_draws=cap.n))
    return SweepSummary(rows=tuple(rows), n_failed=failed)
