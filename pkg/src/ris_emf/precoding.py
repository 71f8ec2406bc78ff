"""Zero-forcing precoder built from per-UE right-singular subspaces."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

RANK_RTOL = 1e-10
COND_CAP = 1e12
INDEPENDENCE_TOL = 0.1


class LayerSelectionError(ValueError):
    pass


class IllConditionedError(ValueError):
    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True, eq=False)
class UeDecomposition:
    U: np.ndarray              # (N, N)
    singular_values: np.ndarray  # descending, sqrt(lambda)
    V: np.ndarray              # (M, N) orthonormal columns

    @property
    def rank(self) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > RANK_RTOL * s[0]))

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.singular_values.size


def decompose_ue(H: np.ndarray) -> UeDecomposition:
    """Thin SVD with each right-singular vector's largest entry made real-positive."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ValueError("channel must be a 2-D matrix")
    if not np.all(np.isfinite(H)):
        raise ValueError("channel contains non-finite entries")
    if H.shape[0] > H.shape[1]:
        raise ValueError(f"need N <= M, got {H.shape}")
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    V = Vh.conj().T
    idx = np.argmax(np.abs(V), axis=0)
    pivot = V[idx, np.arange(V.shape[1])]
    mag = np.abs(pivot)
    phase = np.where(mag > 0, pivot / np.where(mag > 0, mag, 1.0), 1.0)
    V = V / phase
    U = U / phase
    return UeDecomposition(U=U, singular_values=s, V=V)


@dataclass(frozen=True, eq=False)
class LayerMap:
    counts: np.ndarray   # nu_l per UE
    layers: np.ndarray   # (nu, 2): (ue, local singular index), UE-major, strongest first
    gains: np.ndarray    # lambda_i = squared singular value

    @property
    def nu(self) -> int:
        return self.layers.shape[0]

    def layers_of(self, ue: int) -> np.ndarray:
        return np.flatnonzero(self.layers[:, 0] == ue)


def _requested_counts(decomps, requested) -> list[int]:
    L = len(decomps)
    if requested is None:
        return [d.singular_values.size for d in decomps]
    if np.isscalar(requested):
        return [int(requested)] * L
    req = [int(r) for r in requested]
    if len(req) != L:
        raise LayerSelectionError(f"{len(req)} layer counts given for {L} UEs")
    return req


def _make_map(decomps, picks: Sequence[tuple[int, int]]) -> LayerMap:
    picks = sorted(picks)
    counts = np.zeros(len(decomps), dtype=int)
    for l, _ in picks:
        counts[l] += 1
    layers = np.array(picks, dtype=int).reshape(-1, 2)
    gains = np.array([decomps[l].singular_values[n] ** 2 for l, n in picks])
    return LayerMap(counts=counts, layers=layers, gains=gains)


def select_layers(decomps: Sequence[UeDecomposition], requested=None) -> LayerMap:
    """Take the ``nu_l`` strongest singular directions of every UE."""
    req = _requested_counts(decomps, requested)
    picks = []
    for l, (d, r) in enumerate(zip(decomps, req)):
        if r < 1:
            raise LayerSelectionError(f"UE {l}: need at least one layer, got {r}")
        if r > d.rank:
            raise LayerSelectionError(
                f"UE {l}: requested {r} layers but numerical rank is {d.rank}")
        picks.extend((l, n) for n in range(r))
    return _make_map(decomps, picks)


def admit_layers(decomps: Sequence[UeDecomposition], requested=None,
                 tol: float = INDEPENDENCE_TOL) -> LayerMap:
    """Select layers jointly so the stacked rows stay well conditioned.

    Greedy: at every step admit the candidate with the largest
    ``lambda * ||r||^2``, where ``r`` is the part of its row orthogonal to the
    rows admitted so far (its zero-forcing gain per unit power). Candidates
    with ``||r|| < tol`` are never admitted. Each UE gets at most
    ``min(nu_l, rank(H_l))`` layers; requests above the rank are clipped
    rather than rejected. Ties go to the lowest (ue, index).
    """
    req = _requested_counts(decomps, requested)
    limits = [min(max(r, 0), d.rank) for r, d in zip(req, decomps)]
    cands = [(l, n) for l, d in enumerate(decomps) for n in range(limits[l])]
    if not cands:
        raise LayerSelectionError("no admissible layer")
    rows = np.array([decomps[l].V[:, n].conj() for l, n in cands])
    lam = np.array([decomps[l].singular_values[n] ** 2 for l, n in cands])
    resid = rows.copy()
    taken = np.zeros(len(cands), dtype=bool)
    used = np.zeros(len(decomps), dtype=int)
    picks = []
    while True:
        norms = np.linalg.norm(resid, axis=1)
        ok = ~taken & (norms >= tol)
        if not ok.any():
            break
        score = np.where(ok, lam * norms ** 2, -np.inf)
        j = int(np.argmax(score))
        l = cands[j][0]
        taken[j] = True
        used[l] += 1
        picks.append(cands[j])
        q = resid[j] / norms[j]
        resid = resid - np.outer(resid @ q.conj(), q)
        if used[l] >= limits[l]:
            taken[[i for i, c in enumerate(cands) if c[0] == l]] = True
    return _make_map(decomps, picks)


@dataclass(frozen=True, eq=False)
class Precoder:
    V_tilde: np.ndarray       # (nu, M) selected rows of V
    V_tilde_pinv: np.ndarray  # (M, nu)
    coupling: np.ndarray      # c_i = [(V~ V~^H)^-1]_ii
    layer_map: LayerMap
    condition: float          # condition number of V~ V~^H


def build_precoder(decomps: Sequence[UeDecomposition], layer_map: LayerMap,
                   cond_cap: float = COND_CAP) -> Precoder:
    """Right pseudo-inverse of the selected rows via a QR factorisation.

    Mathematically equal to ``V^H (V V^H)^-1`` but avoids forming the Gram
    matrix.
    """
    rows = np.array([decomps[l].V[:, n].conj() for l, n in layer_map.layers])
    nu, M = rows.shape
    if nu > M:
        raise IllConditionedError(f"{nu} layers exceed {M} BS antennas", np.inf)
    Q, R = np.linalg.qr(rows.conj().T)
    sv = np.linalg.svd(R, compute_uv=False)
    cond = np.inf if sv[-1] == 0 else float((sv[0] / sv[-1]) ** 2)
    if not cond <= cond_cap:
        raise IllConditionedError(
            f"layer Gram matrix is ill-conditioned (cond ~ {cond:.3g} > {cond_cap:.3g}); "
            "selected directions are nearly colinear", cond)
    pinv = np.linalg.solve(R, Q.conj().T).conj().T
    coupling = np.sum(np.abs(pinv) ** 2, axis=0)
    return Precoder(V_tilde=rows, V_tilde_pinv=pinv, coupling=coupling,
                    layer_map=layer_map, condition=cond)


@dataclass(frozen=True, eq=False)
class BeamformingMatrix:
    B: np.ndarray
    powers: np.ndarray
    scheme: str
    precoder: Precoder
    extras: dict = field(default_factory=dict)

    @property
    def total_power(self) -> float:
        """Transmit power through the coupling identity sum_i P_i c_i."""
        return float(np.sum(self.powers * self.precoder.coupling))

    @property
    def nu(self) -> int:
        return self.powers.size


def assemble_bf(precoder: Precoder, powers, scheme: str = "custom", **extras) -> BeamformingMatrix:
    P = np.asarray(powers, dtype=float).reshape(-1)
    if P.size != precoder.V_tilde_pinv.shape[1]:
        raise ValueError(f"{P.size} powers for {precoder.V_tilde_pinv.shape[1]} layers")
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        raise ValueError("layer powers must be finite and non-negative")
    B = precoder.V_tilde_pinv * np.sqrt(P)[None, :]
    P = P.copy()
    P.setflags(write=False)
    return BeamformingMatrix(B=B, powers=P, scheme=scheme, precoder=precoder, extras=dict(extras))


def zf_check(per_ue_channels, decomps: Sequence[UeDecomposition], bf: BeamformingMatrix):
    """Interference and per-layer gain residuals of the combined link U_l^H H_l B.

    Only the combiner rows of selected layers are examined: those are the
    streams a UE decodes. Returns ``(max_interference_rel, max_gain_rel_err)``.
    The interference figure is the worst off-diagonal magnitude divided by the
    smallest nonzero on-diagonal magnitude of that UE's block.
    """
    lm = bf.precoder.layer_map
    expected = np.sqrt(lm.gains * bf.powers)
    worst_intf = 0.0
    worst_gain = 0.0
    for l, d in enumerate(decomps):
        mine = lm.layers_of(l)
        if mine.size == 0:
            continue
        rows = lm.layers[mine, 1]
        eff = d.U[:, rows].conj().T @ per_ue_channels[l] @ bf.B   # (nu_l, nu)
        diag = eff[np.arange(mine.size), mine]
        ref = np.abs(diag)
        ref = ref[ref > 0]
        scale = ref.min() if ref.size else 1.0
        off = eff.copy()
        off[np.arange(mine.size), mine] = 0.0
        worst_intf = max(worst_intf, float(np.max(np.abs(off)) / scale))
        exp = expected[mine]
        nz = exp > 0
        if np.any(nz):
            worst_gain = max(worst_gain, float(np.max(np.abs(diag[nz] - exp[nz]) / exp[nz])))
    return worst_intf, worst_gain


def write_singular_values_csv(path, rows) -> None:
    """``rows``: iterable of (draw, decomps). Columns: draw, ue, index, sigma."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["draw", "ue", "index", "sigma"])
        for draw, decomps in rows:
            for l, d in enumerate(decomps):
                for n, s in enumerate(d.singular_values):
                    w.writerow([draw, l, n, repr(float(s))])
