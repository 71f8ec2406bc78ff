"""Multipath channel synthesis through scatterers and RISs, plus free-space probes.

Path-length offsets use the far-field projection: an element's offset from
its array center is projected onto the unit vector joining the two array
centers of that hop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .scene import Scene


def _unit(vec, what: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec)
    if not norm > 0:
        raise ValueError(f"coincident points: zero-length direction for {what}")
    return vec / norm


# ---------------------------------------------------------------------------
# fading

@dataclass(frozen=True, eq=False)
class FadingDraw:
    scatterer_coeffs: np.ndarray  # beta, (S,)
    ris_coeffs: np.ndarray        # epsilon, (Z,)


def complex_gaussian(rng: np.random.Generator, size) -> np.ndarray:
    """Zero-mean circularly-symmetric complex Gaussian with unit second moment."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def draw_fading(scene: Scene, rng: np.random.Generator) -> FadingDraw:
    return FadingDraw(scatterer_coeffs=complex_gaussian(rng, scene.n_scatterers),
                      ris_coeffs=complex_gaussian(rng, scene.n_ris))


# ---------------------------------------------------------------------------
# path phases (meters) and gains

def path_phase_scatterer(scene: Scene, m: int, s: int, l: int, n: int) -> tuple[float, float]:
    """Projected path-length offsets (BS side, UE side) for the m -> s -> U_n^l path."""
    sca = scene.scatterers[s]
    u_bs = _unit(sca - scene.bs_center, f"BS center -> scatterer {s}")
    u_ue = _unit(scene.ue_centers[l] - sca, f"scatterer {s} -> UE {l}")
    d_bs = float(u_bs @ (scene.bs_elements[m] - scene.bs_center))
    d_ue = float(u_ue @ (scene.ue_elements[l, n] - scene.ue_centers[l]))
    return d_bs, d_ue


def path_phase_ris(scene: Scene, m: int, z: int, k: int, l: int, n: int) -> tuple[float, float]:
    """Projected offsets (BS->RIS hop, RIS->UE hop) for the m -> R_k^z -> U_n^l path."""
    rc = scene.ris_centers[z]
    u_in = _unit(rc - scene.bs_center, f"BS center -> RIS {z}")
    u_out = _unit(scene.ue_centers[l] - rc, f"RIS {z} -> UE {l}")
    ris_off = scene.ris_elements[z, k] - rc
    eta_in = float(u_in @ (scene.bs_elements[m] - scene.bs_center + ris_off))
    eta_out = float(u_out @ (ris_off + scene.ue_elements[l, n] - scene.ue_centers[l]))
    return eta_in, eta_out


def gain_scatterer_path(beta: complex, delta_bs: float, delta_ue: float, wavelength: float) -> complex:
    if not wavelength > 0:
        raise ValueError("wavelength must be > 0")
    return beta * np.exp(-2j * np.pi / wavelength * (delta_bs + delta_ue))


def gain_ris_path(eps: complex, r_ris: float, weight: complex, eta_in: float, eta_out: float,
                  wavelength: float) -> complex:
    if not wavelength > 0:
        raise ValueError("wavelength must be > 0")
    k = 2.0 * np.pi / wavelength
    return r_ris * eps * np.exp(-1j * k * eta_in) * weight * np.exp(-1j * k * eta_out)


# ---------------------------------------------------------------------------
# RIS configuration

@dataclass(frozen=True, eq=False)
class RisConfiguration:
    weights: np.ndarray      # (Z, K) unit-modulus
    reflection_amplitude: float
    target_ue: np.ndarray    # (Z,) int


def resolve_assignment(scene: Scene, assignment) -> np.ndarray:
    Z, L = scene.n_ris, scene.n_ues
    if isinstance(assignment, str):
        if assignment == "round_robin":
            return np.arange(Z, dtype=int) % L
        if assignment == "nearest":
            if Z == 0:
                return np.zeros(0, dtype=int)
            d = np.linalg.norm(scene.ris_centers[:, None, :] - scene.ue_centers[None], axis=2)
            return np.argmin(d, axis=1).astype(int)
        raise ValueError(f"unknown RIS assignment policy {assignment!r}")
    out = np.asarray(assignment, dtype=int).reshape(-1)
    if out.shape[0] != Z:
        raise ValueError(f"assignment has {out.shape[0]} entries for {Z} RISs")
    if np.any(out < 0) or np.any(out >= L):
        raise ValueError(f"assignment index out of range 0..{L - 1}: {out.tolist()}")
    return out


def configure_ris(scene: Scene, fading: FadingDraw | None = None,
                  assignment="round_robin") -> RisConfiguration:
    """Phase-conjugate each RIS onto the BS-center -> RIS -> target-UE-center path.

    ``fading`` is accepted for interface symmetry; the weights only depend on
    geometry.
    """
    targets = resolve_assignment(scene, assignment)
    Z, K = scene.n_ris, scene.n_ris_elements
    k = 2.0 * np.pi / scene.wavelength
    w = np.ones((Z, K), dtype=complex)
    for z in range(Z):
        rc = scene.ris_centers[z]
        u_in = _unit(rc - scene.bs_center, f"BS center -> RIS {z}")
        u_out = _unit(scene.ue_centers[targets[z]] - rc, f"RIS {z} -> UE {targets[z]}")
        off = scene.ris_elements[z] - rc
        w[z] = np.exp(1j * k * (off @ u_in + off @ u_out))
    return RisConfiguration(weights=w, reflection_amplitude=1.0 / K, target_ue=targets)


# ---------------------------------------------------------------------------
# channel assembly

@dataclass(frozen=True, eq=False)
class ChannelSet:
    per_ue: np.ndarray  # (L, N, M)
    scene: Scene
    fading: FadingDraw
    ris_config: RisConfiguration

    @property
    def stacked(self) -> np.ndarray:
        L, N, M = self.per_ue.shape
        return self.per_ue.reshape(L * N, M)

    def __getitem__(self, l: int) -> np.ndarray:
        return self.per_ue[l]

    def __len__(self):
        return self.per_ue.shape[0]


def build_channel(scene: Scene, fading: FadingDraw, ris_config: RisConfiguration) -> ChannelSet:
    """Sum scatterer and RIS path gains into the per-UE N x M channel matrices.

    Each path's phase separates into a BS-side and a UE-side factor, so every
    scatterer and every RIS adds a rank-one term.
    """
    S, Z = scene.n_scatterers, scene.n_ris
    if fading.scatterer_coeffs.shape != (S,) or fading.ris_coeffs.shape != (Z,):
        raise ValueError("fading draw does not match the scene's scatterer/RIS counts")
    if ris_config.weights.shape != (Z, scene.n_ris_elements):
        raise ValueError("RIS weights do not match the scene's RIS geometry")

    k = 2.0 * np.pi / scene.wavelength
    L, N, M = scene.n_ues, scene.n_ue_antennas, scene.n_bs
    bs_off = scene.bs_elements - scene.bs_center             # (M, 3)
    ue_off = scene.ue_elements - scene.ue_centers[:, None]   # (L, N, 3)
    H = np.zeros((L, N, M), dtype=complex)

    for s in range(S):
        sca = scene.scatterers[s]
        u_bs = _unit(sca - scene.bs_center, f"BS center -> scatterer {s}")
        a_bs = np.exp(-1j * k * (bs_off @ u_bs))
        for l in range(L):
            u_ue = _unit(scene.ue_centers[l] - sca, f"scatterer {s} -> UE {l}")
            a_ue = np.exp(-1j * k * (ue_off[l] @ u_ue))
            H[l] += fading.scatterer_coeffs[s] * np.outer(a_ue, a_bs)

    r = ris_config.reflection_amplitude
    for z in range(Z):
        rc = scene.ris_centers[z]
        u_in = _unit(rc - scene.bs_center, f"BS center -> RIS {z}")
        a_bs = np.exp(-1j * k * (bs_off @ u_in))
        ris_off = scene.ris_elements[z] - rc
        for l in range(L):
            u_out = _unit(scene.ue_centers[l] - rc, f"RIS {z} -> UE {l}")
            surface = np.sum(ris_config.weights[z] * np.exp(-1j * k * (ris_off @ (u_in + u_out))))
            a_ue = np.exp(-1j * k * (ue_off[l] @ u_out))
            H[l] += r * fading.ris_coeffs[z] * surface * np.outer(a_ue, a_bs)

    H.setflags(write=False)
    return ChannelSet(per_ue=H, scene=scene, fading=fading, ris_config=ris_config)


# ---------------------------------------------------------------------------
# free-space probe channel

def probe_matrix(scene: Scene, points, wavelength: float | None = None) -> np.ndarray:
    """Free-space BS -> point channels, one row per point: (P, M)."""
    lam = scene.wavelength if wavelength is None else wavelength
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.linalg.norm(pts[:, None, :] - scene.bs_elements[None, :, :], axis=2)
    if np.any(d == 0):
        raise ValueError("probe point coincides with a BS element")
    return lam * np.exp(2j * np.pi / lam * d) / (4.0 * np.pi * d)


def probe_channel(scene: Scene, point, wavelength: float | None = None) -> np.ndarray:
    """Free-space channel row vector H^Q (length M) from each BS element to ``point``."""
    return probe_matrix(scene, point, wavelength)[0]


# ---------------------------------------------------------------------------
# regression dump

def save_channel_dump(path, channels: Sequence[tuple[int, np.ndarray]]) -> None:
    """Write stacked channel matrices as JSON.

    Each entry carries ``draw``, ``shape`` [rows, cols] and ``data``: row-major
    interleaved (re, im) float64 pairs.
    """
    entries = []
    for draw, H in channels:
        H = np.asarray(H, dtype=complex)
        flat = np.empty(2 * H.size)
        flat[0::2] = H.real.ravel()
        flat[1::2] = H.imag.ravel()
        entries.append({"draw": int(draw), "shape": list(H.shape), "data": flat.tolist()})
    doc = {"format": "ris-emf-channel-dump", "version": 1, "dtype": "complex128",
           "order": "row-major", "draws": entries}
    Path(path).write_text(json.dumps(doc))


def load_channel_dump(path) -> list[tuple[int, np.ndarray]]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "ris-emf-channel-dump":
        raise ValueError("not a channel dump file")
    out = []
    for e in doc["draws"]:
        flat = np.asarray(e["data"], dtype=float)
        H = (flat[0::2] + 1j * flat[1::2]).reshape(e["shape"])
        out.append((int(e["draw"]), H))
    return out
