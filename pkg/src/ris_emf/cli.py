"""Command line entry point: ``ris-emf simulate | sweep | validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from . import _kernels
from .config import load_config


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="baseline",
                   help="JSON config file or preset name (baseline, stressed)")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed; beats $RIS_EMF_SEED, which beats the config")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ris-emf", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one draw and emit maps + compliance JSON")
    _common(sim)
    sim.add_argument("--draw", type=int, default=None, help="draw index")
    sim.add_argument("--ues", type=int, default=None, help="number of UEs L")
    sim.add_argument("--heatmap-out", default=None, help="directory for maps and JSON")

    sw = sub.add_parser("sweep", help="Monte Carlo sweep over the configured UE counts")
    _common(sw)
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out", default=None, help="output directory")
    sw.add_argument("--draws", type=int, default=None, help="override draws per L")
    sw.add_argument("--no-heatmaps", action="store_true")

    va = sub.add_parser("validate", help="invariant/compliance checks on a fixed seed")
    _common(va)
    va.add_argument("--ues", type=int, default=None)
    va.add_argument("--draw", type=int, default=0)
    return ap


def cmd_simulate(args) -> int:
    from .harness import simulate_draw, write_draw_artifacts
    cfg = load_config(args.config, args.seed)
    L = args.ues or cfg.showcase_ues
    draw = cfg.showcase_draw if args.draw is None else args.draw
    res = simulate_draw(cfg, L, draw)
    if args.heatmap_out:
        report = write_draw_artifacts(cfg, res, args.heatmap_out)
    else:
        from .emf import compliance_json
        report = {"L": L, "draw": draw, "seed": cfg.seed, "schemes": {
            name: compliance_json(bf, res.profiles[name], cfg.params, res.audit_profiles[name])
            for name, bf in res.bfs.items()}}
    print(json.dumps(report, indent=2))
    return 0


def cmd_sweep(args) -> int:
    from .harness import run_sweep
    cfg = load_config(args.config, args.seed)
    if args.draws is not None:
        cfg = cfg.replace(n_draws=args.draws)
    if args.no_heatmaps:
        cfg = cfg.replace(heatmaps=False)
    out = args.out or cfg.output_dir
    t0 = time.perf_counter()
    summary, records = run_sweep(cfg, workers=args.workers, out_dir=out)
    dt = time.perf_counter() - t0
    print(f"{'L':>2} {'scheme':<10} {'cap Mbit/s':>12} {'power W':>10} {'P %ref':>8} {'C %ref':>8}")
    for r in summary.rows:
        print(f"{r.L:>2} {r.scheme:<10} {r.mean_capacity_mbps:12.1f} {r.mean_power_w:10.3f} "
              f"{r.power_pct_vs_ref:8.2f} {r.capacity_pct_vs_ref:8.2f}")
    n_fail = sum(summary.n_failed.values())
    print(f"{len(records)} draws ({n_fail} failed) in {dt:.1f}s, backend={_kernels.BACKEND}; "
          f"artifacts in {out}")
    return 0


def cmd_validate(args) -> int:
    from .checks import run_checks
    cfg = load_config(args.config, args.seed)
    _, results = run_checks(cfg, args.ues, args.draw)
    for r in results:
        print(r.line())
    n_bad = sum(not r.passed for r in results)
    print(f"{len(results) - n_bad}/{len(results)} checks passed")
    return 1 if n_bad else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"simulate": cmd_simulate, "sweep": cmd_sweep, "validate": cmd_validate}
    return handler[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
