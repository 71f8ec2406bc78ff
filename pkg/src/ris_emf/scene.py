"""Deployment geometry, physical constants and unit conversions.

Everything lives in the z=0 plane of a 3D frame. Every array (BS, UE, RIS)
is a uniform linear array along the x-axis with half-wavelength spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watts(x):
    """Convert power in dBm to watts."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("dBm value must be finite")
    out = 10.0 ** ((x - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def watts_to_dbm(x):
    """Convert power in watts to dBm. Raises on non-positive input."""
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("watts must be finite and strictly positive")
    out = 10.0 * np.log10(x) + 30.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PhysicalParams:
    carrier_frequency: float = 3.5e9
    bandwidth: float = 100e6
    noise_power: float = field(default_factory=lambda: dbm_to_watts(-94.0))
    max_power: float = 200.0
    emf_threshold: float = field(default_factory=lambda: dbm_to_watts(-5.0))
    safety_radius: float = 50.0
    n_circle_samples: int = 360

    def __post_init__(self):
        for name in ("carrier_frequency", "bandwidth", "noise_power", "max_power",
                     "emf_threshold", "safety_radius"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if int(self.n_circle_samples) < 3:
            raise ValueError("n_circle_samples must be >= 3")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def emf_threshold_dbm(self) -> float:
        return watts_to_dbm(self.emf_threshold)

    @classmethod
    def from_dbm(cls, *, emf_threshold_dbm: float = -5.0, noise_power_dbm: float = -94.0,
                 **kw) -> "PhysicalParams":
        return cls(emf_threshold=dbm_to_watts(emf_threshold_dbm),
                   noise_power=dbm_to_watts(noise_power_dbm), **kw)


@dataclass(frozen=True)
class SceneConfig:
    """Counts and placement law for one deployment.

    Random entities (UE centers, RIS centers, scatterers) are drawn uniformly
    in area over the annulus ``r_min <= r <= r_max`` around the BS.
    """

    n_bs: int = 64          # M
    n_ue_antennas: int = 4  # N
    n_ues: int = 5          # L
    n_ris_elements: int = 4  # K
    n_scatterers: int = 3   # S
    n_ris: int = 3          # Z
    r_min: float = 60.0
    r_max: float = 200.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_bs", "n_ue_antennas", "n_ues", "n_ris_elements"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("n_scatterers", "n_ris"):
            if int(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_scatterers + self.n_ris == 0:
            raise ValueError("need at least one scatterer or RIS")
        if not (0 < self.r_min < self.r_max):
            raise ValueError("placement annulus needs 0 < r_min < r_max")


def linear_array(center, count: int, spacing: float) -> np.ndarray:
    """Element positions of a ULA along x, centered on ``center``."""
    offsets = (np.arange(count) - (count - 1) / 2.0) * spacing
    pos = np.zeros((count, 3))
    pos[:, 0] = offsets
    return pos + np.asarray(center, dtype=float)


@dataclass(frozen=True, eq=False)
class Scene:
    bs_center: np.ndarray
    bs_elements: np.ndarray        # (M, 3)
    ue_centers: np.ndarray         # (L, 3)
    ue_elements: np.ndarray        # (L, N, 3)
    ris_centers: np.ndarray        # (Z, 3)
    ris_elements: np.ndarray       # (Z, K, 3)
    scatterers: np.ndarray         # (S, 3)
    wavelength: float
    rng_seed: int

    @property
    def n_bs(self) -> int:
        return self.bs_elements.shape[0]

    @property
    def n_ues(self) -> int:
        return self.ue_centers.shape[0]

    @property
    def n_ue_antennas(self) -> int:
        return self.ue_elements.shape[1]

    @property
    def n_ris(self) -> int:
        return self.ris_centers.shape[0]

    @property
    def n_ris_elements(self) -> int:
        return self.ris_elements.shape[1]

    @property
    def n_scatterers(self) -> int:
        return self.scatterers.shape[0]

    def same_as(self, other: "Scene") -> bool:
        names = ("bs_elements", "ue_elements", "ris_elements", "scatterers")
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names)


def _annulus_points(rng: np.random.Generator, count: int, r_min: float, r_max: float):
    r = np.sqrt(rng.uniform(r_min**2, r_max**2, size=count))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=count)
    pts = np.zeros((count, 3))
    pts[:, 0] = r * np.cos(theta)
    pts[:, 1] = r * np.sin(theta)
    return pts


def build_scene(config: SceneConfig, params: PhysicalParams | None = None,
                rng: np.random.Generator | None = None) -> Scene:
    """Place BS, UEs, RISs and scatterers.

    The scene is a pure function of ``config`` (including its seed) unless an
    explicit generator is supplied, which the Monte Carlo harness does to
    derive independent per-draw streams.
    """
    params = params or PhysicalParams()
    lam = params.wavelength
    spacing = 0.5 * lam
    half_span = max(config.n_ue_antennas, config.n_ris_elements) * spacing / 2.0
    if config.r_min - half_span <= params.safety_radius:
        raise ValueError(
            f"placement annulus (r_min={config.r_min} m) intersects the safety "
            f"circle (R={params.safety_radius} m)")
    if rng is None:
        rng = np.random.default_rng(config.seed)

    L, Z, S = config.n_ues, config.n_ris, config.n_scatterers
    ue_c = _annulus_points(rng, L, config.r_min, config.r_max)
    ris_c = _annulus_points(rng, Z, config.r_min, config.r_max)
    sca = _annulus_points(rng, S, config.r_min, config.r_max)

    bs_center = np.zeros(3)
    bs = linear_array(bs_center, config.n_bs, spacing)
    ue = np.stack([linear_array(c, config.n_ue_antennas, spacing) for c in ue_c]) \
        if L else np.zeros((0, config.n_ue_antennas, 3))
    ris = np.stack([linear_array(c, config.n_ris_elements, spacing) for c in ris_c]) \
        if Z else np.zeros((0, config.n_ris_elements, 3))

    for arr in (bs, ue, ris, sca, ue_c, ris_c):
        arr.setflags(write=False)
    return Scene(bs_center=bs_center, bs_elements=bs, ue_centers=ue_c, ue_elements=ue,
                 ris_centers=ris_c, ris_elements=ris, scatterers=sca,
                 wavelength=lam, rng_seed=int(config.seed))


@dataclass(frozen=True, eq=False)
class CirclePointSet:
    points: np.ndarray   # (N_Q, 3)
    angles: np.ndarray   # radians
    center: np.ndarray
    radius: float

    def __len__(self):
        return self.points.shape[0]


def circle_points(center, radius: float, n: int, phase: float = 0.0) -> CirclePointSet:
    if n < 3:
        raise ValueError("need at least 3 circle samples")
    if not radius > 0:
        raise ValueError("radius must be > 0")
    center = np.asarray(center, dtype=float)
    ang = phase + 2.0 * np.pi * np.arange(n) / n
    pts = np.zeros((n, 3))
    pts[:, 0] = radius * np.cos(ang)
    pts[:, 1] = radius * np.sin(ang)
    pts += center
    return CirclePointSet(points=pts, angles=ang, center=center, radius=float(radius))


def sample_safety_circle(scene: Scene, params: PhysicalParams,
                         n: int | None = None) -> CirclePointSet:
    """Equal-angle samples on the safety circle, first sample on the +x axis."""
    n = params.n_circle_samples if n is None else n
    return circle_points(scene.bs_center, params.safety_radius, int(n))
