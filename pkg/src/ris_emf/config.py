"""JSON experiment configuration.

Schema (all keys optional unless noted; SI units, powers flagged ``_dbm``)::

    {
      "physical": {carrier_frequency_hz, bandwidth_hz, noise_power_dbm,
                   max_power_w, emf_threshold_dbm, safety_radius_m,
                   n_circle_samples},
      "scene": {n_bs_antennas, n_ue_antennas, n_ris_elements, n_scatterers,
                n_ris, placement_r_min_m, placement_r_max_m},
      "experiment": {seed, ue_counts, n_draws, schemes, layers_per_ue,
                     layer_policy, freeze_geometry, ris_assignment,
                     audit_factor, log_base, max_iterations, compliance_tol,
                     output_dir, showcase_ues, showcase_draw, heatmaps,
                     heatmap_half_width_m, heatmap_resolution_m}
    }

Two bundled presets exist: ``baseline`` and ``stressed`` (same as ``baseline`` with a
-15 dBm exposure threshold, low enough that the constraint binds).
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .scene import PhysicalParams, SceneConfig

SEED_ENV = "RIS_EMF_SEED"
PRESETS = ("baseline", "stressed")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "physical": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "carrier_frequency_hz": _pos,
                "bandwidth_hz": _pos,
                "noise_power_dbm": _num,
                "max_power_w": _pos,
                "emf_threshold_dbm": _num,
                "safety_radius_m": _pos,
                "n_circle_samples": {"type": "integer", "minimum": 3},
            },
        },
        "scene": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_bs_antennas": {"type": "integer", "minimum": 1},
                "n_ue_antennas": {"type": "integer", "minimum": 1},
                "n_ris_elements": {"type": "integer", "minimum": 1},
                "n_scatterers": _count,
                "n_ris": _count,
                "placement_r_min_m": _pos,
                "placement_r_max_m": _pos,
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "ue_counts": {"type": "array", "items": {"type": "integer", "minimum": 1},
                              "minItems": 1},
                "n_draws": {"type": "integer", "minimum": 1},
                "schemes": {"type": "array", "minItems": 1, "items": {
                    "enum": ["reference", "reduced", "enhanced"]}},
                "layers_per_ue": {"type": ["integer", "null"], "minimum": 1},
                "layer_policy": {"enum": ["joint", "strict"]},
                "freeze_geometry": {"type": "boolean"},
                "ris_assignment": {"oneOf": [
                    {"enum": ["round_robin", "nearest"]},
                    {"type": "array", "items": {"type": "integer", "minimum": 0}}]},
                "audit_factor": {"type": "integer", "minimum": 1},
                "log_base": {"oneOf": [{"enum": ["e", "2"]}, {"type": "number",
                                                              "exclusiveMinimum": 1}]},
                "max_iterations": {"type": ["integer", "null"], "minimum": 1},
                "compliance_tol": {"type": "number", "minimum": 0},
                "output_dir": {"type": "string"},
                "showcase_ues": {"type": "integer", "minimum": 1},
                "showcase_draw": {"type": "integer", "minimum": 0},
                "heatmaps": {"type": "boolean"},
                "heatmap_half_width_m": _pos,
                "heatmap_resolution_m": _pos,
            },
        },
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    params: PhysicalParams = field(default_factory=PhysicalParams)
    scene: SceneConfig = field(default_factory=SceneConfig)
    seed: int = 20231018
    ue_counts: tuple = (2, 3, 4, 5, 6, 7)
    n_draws: int = 1000
    schemes: tuple = ("reference", "reduced", "enhanced")
    layers_per_ue: int | None = None
    layer_policy: str = "joint"
    freeze_geometry: bool = False
    ris_assignment: object = "round_robin"
    audit_factor: int = 4
    log_base: float = 2.0
    max_iterations: int | None = None
    compliance_tol: float = 1e-9
    output_dir: str = "out"
    showcase_ues: int = 5
    showcase_draw: int = 0
    heatmaps: bool = True
    heatmap_half_width_m: float = 200.0
    heatmap_resolution_m: float = 1.0

    def scene_for(self, n_ues: int) -> SceneConfig:
        from dataclasses import replace
        return replace(self.scene, n_ues=int(n_ues), seed=int(self.seed))

    def replace(self, **kw) -> "ExperimentConfig":
        from dataclasses import replace
        return replace(self, **kw)

    def to_dict(self) -> dict:
        p, s = self.params, self.scene
        return {
            "physical": {
                "carrier_frequency_hz": p.carrier_frequency,
                "bandwidth_hz": p.bandwidth,
                "noise_power_dbm": 10 * math.log10(p.noise_power) + 30,
                "max_power_w": p.max_power,
                "emf_threshold_dbm": p.emf_threshold_dbm,
                "safety_radius_m": p.safety_radius,
                "n_circle_samples": p.n_circle_samples,
            },
            "scene": {
                "n_bs_antennas": s.n_bs,
                "n_ue_antennas": s.n_ue_antennas,
                "n_ris_elements": s.n_ris_elements,
                "n_scatterers": s.n_scatterers,
                "n_ris": s.n_ris,
                "placement_r_min_m": s.r_min,
                "placement_r_max_m": s.r_max,
            },
            "experiment": {
                "seed": self.seed,
                "ue_counts": list(self.ue_counts),
                "n_draws": self.n_draws,
                "schemes": list(self.schemes),
                "layers_per_ue": self.layers_per_ue,
                "layer_policy": self.layer_policy,
                "freeze_geometry": self.freeze_geometry,
                "ris_assignment": self.ris_assignment if isinstance(self.ris_assignment, str)
                else list(self.ris_assignment),
                "audit_factor": self.audit_factor,
                "log_base": "e" if self.log_base == math.e else self.log_base,
                "max_iterations": self.max_iterations,
                "compliance_tol": self.compliance_tol,
                "output_dir": self.output_dir,
                "showcase_ues": self.showcase_ues,
                "showcase_draw": self.showcase_draw,
                "heatmaps": self.heatmaps,
                "heatmap_half_width_m": self.heatmap_half_width_m,
                "heatmap_resolution_m": self.heatmap_resolution_m,
            },
        }


def from_dict(doc: dict) -> ExperimentConfig:
    jsonschema.validate(doc, SCHEMA)
    phys = doc.get("physical", {})
    sc = doc.get("scene", {})
    ex = doc.get("experiment", {})
    base = ExperimentConfig()

    params = PhysicalParams.from_dbm(
        emf_threshold_dbm=phys.get("emf_threshold_dbm", -5.0),
        noise_power_dbm=phys.get("noise_power_dbm", -94.0),
        carrier_frequency=phys.get("carrier_frequency_hz", 3.5e9),
        bandwidth=phys.get("bandwidth_hz", 100e6),
        max_power=phys.get("max_power_w", 200.0),
        safety_radius=phys.get("safety_radius_m", 50.0),
        n_circle_samples=phys.get("n_circle_samples", 360),
    )
    seed = int(ex.get("seed", base.seed))
    scene = SceneConfig(
        n_bs=sc.get("n_bs_antennas", 64),
        n_ue_antennas=sc.get("n_ue_antennas", 4),
        n_ris_elements=sc.get("n_ris_elements", 4),
        n_scatterers=sc.get("n_scatterers", 3),
        n_ris=sc.get("n_ris", 3),
        r_min=sc.get("placement_r_min_m", 60.0),
        r_max=sc.get("placement_r_max_m", 200.0),
        seed=seed,
    )
    log_base = ex.get("log_base", 2.0)
    log_base = math.e if log_base == "e" else float(log_base)
    kw = {k: ex[k] for k in ("n_draws", "layers_per_ue", "layer_policy", "freeze_geometry",
                             "audit_factor", "max_iterations", "compliance_tol", "output_dir",
                             "showcase_ues", "showcase_draw", "heatmaps",
                             "heatmap_half_width_m", "heatmap_resolution_m") if k in ex}
    if "ris_assignment" in ex:
        ra = ex["ris_assignment"]
        kw["ris_assignment"] = ra if isinstance(ra, str) else tuple(ra)
    if "ue_counts" in ex:
        kw["ue_counts"] = tuple(int(v) for v in ex["ue_counts"])
    if "schemes" in ex:
        kw["schemes"] = tuple(ex["schemes"])
    return ExperimentConfig(params=params, scene=scene, seed=seed, log_base=log_base, **kw)


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("ris_emf").joinpath("presets", f"{name}.json").read_text()
    return json.loads(text)


def load_config(source: str | os.PathLike | None = None,
                seed_override: int | None = None) -> ExperimentConfig:
    """Load a config from a JSON file or a preset name.

    Seed precedence: ``seed_override`` beats ``$RIS_EMF_SEED`` beats the file.
    """
    if source is None:
        doc = preset_dict("baseline")
    elif Path(source).is_file():
        doc = json.loads(Path(source).read_text())
    elif str(source) in PRESETS:
        doc = preset_dict(str(source))
    else:
        raise FileNotFoundError(f"no config file or preset named {source!r}")
    doc = copy.deepcopy(doc)
    seed = seed_override
    if seed is None and os.environ.get(SEED_ENV, "").strip():
        seed = int(os.environ[SEED_ENV])
    if seed is not None:
        doc.setdefault("experiment", {})["seed"] = int(seed)
    return from_dict(doc)
