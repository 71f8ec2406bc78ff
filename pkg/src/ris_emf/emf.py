"""Exposure on the safety circle and the two EMF-compliant power-control schemes."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channel import probe_matrix
from .precoding import BeamformingMatrix, assemble_bf
from .scene import CirclePointSet, PhysicalParams, Scene, watts_to_dbm

log = logging.getLogger(__name__)

DBM_FLOOR = -150.0
FORM_RTOL = 1e-9


class EnhancedBFError(RuntimeError):
    """The per-layer loop hit its iteration cap; ``trace`` holds what happened."""

    def __init__(self, message: str, trace: "EnhancedTrace"):
        super().__init__(message)
        self.trace = trace


def to_dbm(watts: float) -> float:
    return watts_to_dbm(watts) if watts > 0 else DBM_FLOOR


@dataclass(frozen=True, eq=False)
class ExposureProfile:
    points: np.ndarray
    layer_gains: np.ndarray   # (P, nu): |H^Q v~+_i|^2, per unit layer power
    per_layer: np.ndarray     # (P, nu): layer_gains * P_i
    powers: np.ndarray        # (P,)
    argmax: int
    norm_form_max: float      # ||H^Q B||^2 at the argmax point, computed directly

    @property
    def max_power(self) -> float:
        return float(self.powers[self.argmax])

    @property
    def argmax_point(self) -> np.ndarray:
        return self.points[self.argmax]

    @property
    def per_layer_at_max(self) -> np.ndarray:
        return self.per_layer[self.argmax]


def layer_gains(bf: BeamformingMatrix, points, scene: Scene) -> np.ndarray:
    return _kernels.probe_layer_power(scene.bs_elements, np.asarray(points, dtype=float),
                                      scene.wavelength, bf.precoder.V_tilde_pinv)


def exposure(bf: BeamformingMatrix, circle: CirclePointSet | np.ndarray, scene: Scene,
             gains: np.ndarray | None = None) -> ExposureProfile:
    """Received power at each sample point.

    Computed in trace form (sum over layers of P_i |H^Q v~+_i|^2) and
    cross-checked against the direct norm ||H^Q B||^2 at the worst point.
    """
    pts = circle.points if isinstance(circle, CirclePointSet) else np.atleast_2d(circle)
    if pts.shape[0] == 0:
        raise ValueError("no sample points")
    G = layer_gains(bf, pts, scene) if gains is None else gains
    per_layer = G * bf.powers[None, :]
    P_Q = per_layer.sum(axis=1)
    q = int(np.argmax(P_Q))
    hq = probe_matrix(scene, pts[q])[0]
    direct = float(np.sum(np.abs(hq @ bf.B) ** 2))
    if abs(direct - P_Q[q]) > FORM_RTOL * max(direct, P_Q[q], 1e-300):
        raise RuntimeError(
            f"trace-form and norm-form exposure disagree: {P_Q[q]!r} vs {direct!r}")
    return ExposureProfile(points=pts, layer_gains=G, per_layer=per_layer, powers=P_Q,
                           argmax=q, norm_form_max=direct)


def reduced_bf(reference: BeamformingMatrix, profile: ExposureProfile,
               emf_threshold: float) -> BeamformingMatrix:
    """Scale every layer by one factor so the worst sample sits at the threshold."""
    peak = profile.max_power
    alpha = min(emf_threshold / peak, 1.0) if peak > 0 else 1.0
    if alpha >= 1.0:
        return BeamformingMatrix(B=reference.B, powers=reference.powers, scheme="reduced",
                                 precoder=reference.precoder, extras={"alpha": 1.0})
    P = reference.powers * alpha
    P.setflags(write=False)
    return BeamformingMatrix(B=np.sqrt(alpha) * reference.B, powers=P, scheme="reduced",
                             precoder=reference.precoder, extras={"alpha": alpha})


@dataclass(frozen=True, eq=False)
class EnhancedTrace:
    q_index: np.ndarray
    q_points: np.ndarray
    p_max: np.ndarray
    layer: np.ndarray
    factor: np.ndarray
    initial_powers: np.ndarray
    final_powers: np.ndarray
    converged: bool
    degenerate: bool

    @property
    def iterations(self) -> int:
        return int(self.layer.size)


def enhanced_bf(reference: BeamformingMatrix, circle: CirclePointSet, scene: Scene,
                emf_threshold: float, max_iterations: int | None = None, tol: float = 1e-9,
                gains: np.ndarray | None = None):
    """Per-layer iterative reduction.

    While the worst sample exceeds the threshold, find the layer contributing
    most at that sample and multiply its power by threshold / worst power.
    Exposure is linear in the layer powers, so the loop runs on the
    precomputed unit-power gain matrix and rebuilds B once at the end.

    Returns ``(bf, trace)``. Raises :class:`EnhancedBFError` when the cap
    (default ``10 * nu * N_Q``) is reached first.
    """
    pts = circle.points
    G = layer_gains(reference, pts, scene) if gains is None else gains
    nu = reference.nu
    cap = 10 * nu * pts.shape[0] if max_iterations is None else int(max_iterations)
    P, n, q_idx, p_max, layer, factor, ok = _kernels.enhanced_loop(
        G, reference.powers, emf_threshold, tol, cap)
    P = np.minimum(P, reference.powers)
    ref_peak = float(np.max(reference.powers, initial=0.0))
    degenerate = bool(n > 0 and ref_peak > 0 and np.all(P <= 1e-12 * ref_peak))
    trace = EnhancedTrace(q_index=np.asarray(q_idx), q_points=pts[np.asarray(q_idx, dtype=int)],
                          p_max=np.asarray(p_max), layer=np.asarray(layer),
                          factor=np.asarray(factor), initial_powers=reference.powers.copy(),
                          final_powers=P.copy(), converged=bool(ok), degenerate=degenerate)
    if not ok:
        raise EnhancedBFError(f"per-layer reduction did not reach compliance in {cap} iterations",
                              trace)
    if degenerate:
        log.warning("enhanced beamformer drove every layer to ~0 power")
    if n == 0:
        bf = BeamformingMatrix(B=reference.B, powers=reference.powers, scheme="enhanced",
                               precoder=reference.precoder, extras={"iterations": 0})
    else:
        bf = assemble_bf(reference.precoder, P, scheme="enhanced", iterations=n)
    return bf, trace


@dataclass(frozen=True)
class ComplianceReport:
    scheme: str
    power_slack: float      # Pmax - sum_i P_i c_i
    exposure_slack: float   # EMF_th - max_Q P_Q
    min_power: float        # min_i P_i
    max_circle_power: float
    total_power: float

    def satisfied(self, params: PhysicalParams, rtol: float = 1e-9) -> bool:
        return (self.power_slack >= -rtol * params.max_power
                and self.exposure_slack >= -rtol * params.emf_threshold
                and self.min_power >= 0.0)


def constrained_problem_check(bf: BeamformingMatrix, circle: CirclePointSet, scene: Scene,
                              params: PhysicalParams,
                              profile: ExposureProfile | None = None) -> ComplianceReport:
    """Residuals of the power, exposure and non-negativity constraints."""
    prof = profile if profile is not None else exposure(bf, circle, scene)
    total = bf.total_power
    return ComplianceReport(scheme=bf.scheme, power_slack=params.max_power - total,
                            exposure_slack=params.emf_threshold - prof.max_power,
                            min_power=float(np.min(bf.powers)),
                            max_circle_power=prof.max_power, total_power=total)


def compliance_json(bf: BeamformingMatrix, profile: ExposureProfile, params: PhysicalParams,
                    audit: ExposureProfile | None = None) -> dict:
    doc = {"scheme": bf.scheme}
    if "alpha" in bf.extras:
        doc["alpha"] = float(bf.extras["alpha"])
    if "iterations" in bf.extras:
        doc["iterations"] = int(bf.extras["iterations"])
    doc["max_circle_power_dbm"] = to_dbm(profile.max_power)
    doc["emf_threshold_dbm"] = params.emf_threshold_dbm
    doc["audit_max_dbm"] = to_dbm(audit.max_power) if audit is not None else None
    doc["per_layer_power_w"] = [float(p) for p in bf.powers]
    return doc
