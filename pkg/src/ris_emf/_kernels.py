"""Hot loops with a numba path and a pure-numpy path.

The backend is picked once at import from ``RIS_EMF_BACKEND`` (``numba`` or
``numpy``). ``numba`` is the default when it imports; otherwise numpy is used
silently. Both implementations are always importable under explicit names so
tests and the benchmark can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

_requested = os.environ.get("RIS_EMF_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"RIS_EMF_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
BACKEND = "numba" if (_requested == "numba" and HAS_NUMBA) else "numpy"

_CHUNK = 4096


# ---------------------------------------------------------------------------
# free-space probe gains: out[p, i] = |sum_m h_m(p) * W[m, i]|^2

def probe_layer_power_numpy(elements, points, wavelength, weights):
    """Per-point, per-column received power through the free-space probe channel.

    ``weights`` is (M, nu) complex. Returns (P, nu) float.
    """
    elements = np.ascontiguousarray(elements, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.complex128)
    k = 2.0 * np.pi / wavelength
    out = np.empty((points.shape[0], weights.shape[1]))
    for start in range(0, points.shape[0], _CHUNK):
        pts = points[start:start + _CHUNK]
        d = np.sqrt(((pts[:, None, :] - elements[None, :, :]) ** 2).sum(axis=2))
        h = wavelength * np.exp(1j * k * d) / (4.0 * np.pi * d)
        y = h @ weights
        out[start:start + _CHUNK] = y.real ** 2 + y.imag ** 2
    return out


def _probe_layer_power_nb(elements, points, wavelength, weights):  # pragma: no cover
    n_pts = points.shape[0]
    n_el = elements.shape[0]
    nu = weights.shape[1]
    k = 2.0 * np.pi / wavelength
    scale = wavelength / (4.0 * np.pi)
    out = np.empty((n_pts, nu))
    acc = np.empty(nu, dtype=np.complex128)
    for p in range(n_pts):
        for i in range(nu):
            acc[i] = 0.0
        for m in range(n_el):
            dx = points[p, 0] - elements[m, 0]
            dy = points[p, 1] - elements[m, 1]
            dz = points[p, 2] - elements[m, 2]
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            a = scale / d
            h = complex(a * np.cos(k * d), a * np.sin(k * d))
            for i in range(nu):
                acc[i] += h * weights[m, i]
        for i in range(nu):
            out[p, i] = acc[i].real ** 2 + acc[i].imag ** 2
    return out


# ---------------------------------------------------------------------------
# per-layer iterative reduction on a linear exposure model P_Q = G @ P

def enhanced_loop_numpy(gains, powers, threshold, tol, max_iter):
    """Run the per-layer reduction loop.

    Returns ``(powers, n_iter, q_idx, p_max, layer, factor, converged)`` with
    trace arrays truncated to ``n_iter``. Ties break to the lowest index.
    """
    gains = np.ascontiguousarray(gains, dtype=np.float64)
    p = np.array(powers, dtype=np.float64)
    q_idx = np.empty(max_iter, dtype=np.int64)
    p_max = np.empty(max_iter)
    layer = np.empty(max_iter, dtype=np.int64)
    factor = np.empty(max_iter)
    limit = threshold * (1.0 + tol)
    n = 0
    pq = gains @ p
    q = int(np.argmax(pq))
    while pq[q] > limit:
        if n >= max_iter:
            return p, n, q_idx[:n], p_max[:n], layer[:n], factor[:n], False
        contrib = gains[q] * p
        i0 = int(np.argmax(contrib))
        f = threshold / pq[q]
        q_idx[n], p_max[n], layer[n], factor[n] = q, pq[q], i0, f
        p[i0] *= f
        n += 1
        pq = gains @ p
        q = int(np.argmax(pq))
    return p, n, q_idx[:n], p_max[:n], layer[:n], factor[:n], True


def _enhanced_loop_nb(gains, powers, threshold, tol, max_iter):  # pragma: no cover
    n_pts, nu = gains.shape
    p = powers.copy()
    q_idx = np.empty(max_iter, dtype=np.int64)
    p_max = np.empty(max_iter)
    layer = np.empty(max_iter, dtype=np.int64)
    factor = np.empty(max_iter)
    limit = threshold * (1.0 + tol)
    pq = np.empty(n_pts)
    n = 0
    while True:
        q = 0
        for j in range(n_pts):
            s = 0.0
            for i in range(nu):
                s += gains[j, i] * p[i]
            pq[j] = s
            if s > pq[q]:
                q = j
        if not pq[q] > limit:
            return p, n, q_idx[:n], p_max[:n], layer[:n], factor[:n], True
        if n >= max_iter:
            return p, n, q_idx[:n], p_max[:n], layer[:n], factor[:n], False
        i0 = 0
        best = gains[q, 0] * p[0]
        for i in range(1, nu):
            c = gains[q, i] * p[i]
            if c > best:
                best = c
                i0 = i
        f = threshold / pq[q]
        q_idx[n] = q
        p_max[n] = pq[q]
        layer[n] = i0
        factor[n] = f
        p[i0] *= f
        n += 1


if HAS_NUMBA:
    probe_layer_power_numba = numba.njit(cache=True)(_probe_layer_power_nb)
    _enhanced_loop_numba_jit = numba.njit(cache=True)(_enhanced_loop_nb)

    def enhanced_loop_numba(gains, powers, threshold, tol, max_iter):
        return _enhanced_loop_numba_jit(
            np.ascontiguousarray(gains, dtype=np.float64),
            np.ascontiguousarray(powers, dtype=np.float64),
            float(threshold), float(tol), int(max_iter))

    def _probe_numba_entry(elements, points, wavelength, weights):
        return probe_layer_power_numba(
            np.ascontiguousarray(elements, dtype=np.float64),
            np.ascontiguousarray(points, dtype=np.float64),
            float(wavelength),
            np.ascontiguousarray(weights, dtype=np.complex128))
else:  # pragma: no cover
    probe_layer_power_numba = None
    enhanced_loop_numba = None
    _probe_numba_entry = None


if BACKEND == "numba":
    probe_layer_power = _probe_numba_entry
    enhanced_loop = enhanced_loop_numba
else:
    probe_layer_power = probe_layer_power_numpy
    enhanced_loop = enhanced_loop_numpy


def implementations():
    """Mapping backend name -> (probe_layer_power, enhanced_loop)."""
    impls = {"numpy": (probe_layer_power_numpy, enhanced_loop_numpy)}
    if HAS_NUMBA:
        impls["numba"] = (_probe_numba_entry, enhanced_loop_numba)
    return impls
