"""Water-filling over layers with unequal transmit-power costs, and capacity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .precoding import BeamformingMatrix, Precoder, assemble_bf
from .scene import PhysicalParams


@dataclass(frozen=True)
class WaterFillingSolution:
    powers: np.ndarray
    water_level: float   # 1/mu
    active_set: np.ndarray
    iterations: int

    @property
    def mu(self) -> float:
        return 1.0 / self.water_level


def waterfill(gains, costs, max_power: float, noise: float) -> WaterFillingSolution:
    """Maximise sum_i log(1 + g_i P_i / N0) subject to sum_i c_i P_i = Pmax.

    Active-set iteration: solve for the multiplier in closed form over the
    current active set, drop every layer whose power comes out negative,
    repeat. Dropping lowers the water level, so a dropped layer never comes
    back and at most ``nu`` rounds are needed.
    """
    g = np.asarray(gains, dtype=float).reshape(-1)
    c = np.asarray(costs, dtype=float).reshape(-1)
    if g.shape != c.shape:
        raise ValueError("gains and costs must have equal length")
    if g.size == 0:
        raise ValueError("no layers to allocate")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(c))
            and np.isfinite(max_power) and np.isfinite(noise)):
        raise ValueError("non-finite water-filling input")
    if np.any(g <= 0) or np.any(c <= 0) or max_power <= 0 or noise <= 0:
        raise ValueError("gains, costs, max_power and noise must be > 0")

    floor = noise * c / g          # c_i * N0 / lambda_i, budget units
    active = np.ones(g.size, dtype=bool)
    it = 0
    while True:
        it += 1
        assert active.any(), "active set emptied"
        n_act = active.sum()
        level = (max_power + floor[active].sum()) / n_act   # 1/mu
        # c_i P_i = level - floor_i, written without the large common floor so
        # that Pmax << floor does not cancel away
        spread = floor[active].sum() - n_act * floor
        P = np.where(active, (max_power + spread) / (n_act * c), 0.0)
        neg = active & (P < 0)
        if not neg.any():
            break
        active &= ~neg
    P = np.maximum(P, 0.0)
    return WaterFillingSolution(powers=P, water_level=float(level),
                                active_set=np.flatnonzero(active), iterations=it)


def kkt_residuals(sol: WaterFillingSolution, gains, costs, max_power: float, noise: float):
    """(stationarity, slackness, feasibility) residuals, all dimensionless."""
    g = np.asarray(gains, dtype=float)
    c = np.asarray(costs, dtype=float)
    mu = sol.mu
    act = np.zeros(g.size, dtype=bool)
    act[sol.active_set] = True
    stat = np.abs(mu * c[act] * (sol.powers[act] + noise / g[act]) - 1.0)
    # inactive layers: water level must not exceed their floor
    slack = np.maximum(sol.water_level / c[~act] - noise / g[~act], 0.0) * g[~act] / noise
    feas = abs(np.dot(c, sol.powers) - max_power) / max_power
    neg = np.maximum(-sol.powers, 0.0).max(initial=0.0) / max_power
    return (float(stat.max(initial=0.0)), float(slack.max(initial=0.0)), float(max(feas, neg)))


def capacity(powers, gains, bandwidth: float, noise: float, log_base: float = 2.0) -> float:
    """Sum rate in bit/s (or nat/s with ``log_base=e``)."""
    P = np.asarray(powers, dtype=float)
    if np.any(P < 0):
        raise ValueError("negative layer power")
    snr = np.asarray(gains, dtype=float) * P / noise
    return float(bandwidth * np.sum(np.log1p(snr)) / np.log(log_base))


def reference_bf(precoder: Precoder, params: PhysicalParams) -> BeamformingMatrix:
    """Full-power ZF beamformer with water-filled layer powers."""
    sol = waterfill(precoder.layer_map.gains, precoder.coupling, params.max_power,
                    params.noise_power)
    return assemble_bf(precoder, sol.powers, scheme="reference", waterfilling=sol)
