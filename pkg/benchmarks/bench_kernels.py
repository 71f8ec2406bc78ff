"""Time the numba and numpy kernels on sweep-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import time

import numpy as np

from ris_emf import _kernels
from ris_emf.config import load_config
from ris_emf.harness import simulate_draw


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--ues", type=int, default=5)
    args = ap.parse_args()

    cfg = load_config("stressed")
    res = simulate_draw(cfg, args.ues, 0)
    scene = res.scene
    W = res.precoder.V_tilde_pinv
    circle = res.circle.points
    # heatmap-sized probe set: 400 x 400 cells
    g = np.linspace(-199.5, 199.5, 400)
    X, Y = np.meshgrid(g, g)
    grid = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    G = res.profiles["reference"].layer_gains
    P0 = res.bfs["reference"].powers
    th = cfg.params.emf_threshold

    cases = {
        "probe circle (360 pts)": lambda f: lambda: f[0](scene.bs_elements, circle,
                                                         scene.wavelength, W),
        "probe heatmap (160k pts)": lambda f: lambda: f[0](scene.bs_elements, grid,
                                                           scene.wavelength, W),
        "enhanced loop": lambda f: lambda: f[1](G, P0, th, 1e-9, 10 * G.size),
    }
    impls = _kernels.implementations()
    print(f"{'case':<26}" + "".join(f"{k:>12}" for k in impls) + f"{'max rel diff':>14}")
    for name, make in cases.items():
        row, outs = [], []
        for fns in impls.values():
            make(fns)()  # warm-up / JIT compile
            rep = 2 if "heatmap" in name else args.repeat
            t, out = best_of(make(fns), rep)
            row.append(t)
            outs.append(np.asarray(out[0] if isinstance(out, tuple) else out))
        diff = max(float(np.max(np.abs(o - outs[0]) / np.maximum(np.abs(outs[0]), 1e-300)))
                   for o in outs[1:]) if len(outs) > 1 else 0.0
        print(f"{name:<26}" + "".join(f"{1e3 * t:10.2f}ms" for t in row) + f"{diff:14.2e}")


if __name__ == "__main__":
    main()
