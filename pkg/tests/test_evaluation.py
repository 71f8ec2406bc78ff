import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from ris_emf.emf import exposure
from ris_emf.evaluation import (ExceedanceMap, HeatmapGrid, RunningStats, exceedance_map,
                                read_grid_csv, render_heatmap, summarize_sweep,
                                write_grid_csv, write_grid_svg)
from ris_emf.harness import DrawRecord
from ris_emf.precoding import assemble_bf

from test_emf import pipeline


def test_zero_beamformer_is_floored():
    scene, ref, _ = pipeline(1)
    zero = assemble_bf(ref.precoder, np.zeros(ref.nu))
    grid = render_heatmap(zero, scene, (-20, -20, 40, 40), 2.0)
    vals = grid.values[np.isfinite(grid.values)]
    assert np.all(vals == -150.0)


def test_doubling_power_shifts_by_3db():
    scene, ref, _ = pipeline(2)
    a = render_heatmap(ref, scene, (60, 60, 20, 20), 2.0)
    b = render_heatmap(assemble_bf(ref.precoder, 2 * ref.powers), scene, (60, 60, 20, 20), 2.0)
    np.testing.assert_allclose(b.values - a.values, 10 * math.log10(2), atol=1e-9)


def test_heatmap_matches_point_exposure_and_masks_bs():
    scene, ref, _ = pipeline(3)
    grid = render_heatmap(ref, scene, (-50, -50, 100, 100), 5.0)
    assert grid.shape == (20, 20)
    xs, ys = grid.cell_centers()
    pt = np.array([[xs[3], ys[17], 0.0]])
    want = 10 * np.log10(exposure(ref, pt, scene).max_power) + 30
    assert grid.values[17, 3] == pytest.approx(want, abs=1e-9)
    # BS at the origin sits in cells (9|10, 9|10); at least one cell is masked
    assert np.isnan(grid.values).sum() >= 1
    assert np.isnan(grid.values[9:11, 9:11]).any()


def test_heatmap_bad_resolution():
    scene, ref, _ = pipeline(4)
    with pytest.raises(ValueError):
        render_heatmap(ref, scene, (0, 0, 10, 10), 0.0)


def _grid(values, res=1.0, origin=(-2.0, -2.0)):
    v = np.array(values, dtype=float)
    return HeatmapGrid(origin=origin, extent=(v.shape[1] * res, v.shape[0] * res),
                       resolution=res, values=v, scheme="reference")


def test_exceedance_codes():
    vals = np.full((4, 4), -10.0)
    vals[0, 0] = 0.0        # outside, above threshold
    vals[1, 1] = 0.0        # inside the radius: not applicable
    vals[3, 3] = np.nan     # masked
    ex = exceedance_map(_grid(vals), 10 ** (-5 / 10) / 1000, radius=1.0)
    codes = ex.codes()
    assert codes[0, 0] == 1
    assert codes[1, 1] == -1
    assert codes[3, 3] == -1
    assert codes[0, 1] == 0
    assert ex.count == 1


def test_grid_csv_round_trip_and_svg(tmp_path):
    vals = np.array([[-150.0, -20.5], [np.nan, 10.25]])
    g = _grid(vals, 2.0, (0.0, 0.0))
    write_grid_csv(tmp_path / "g.csv", g)
    meta, back = read_grid_csv(tmp_path / "g.csv")
    assert meta["resolution"] == 2.0 and meta["scheme"] == "reference"
    np.testing.assert_array_equal(np.isnan(back), np.isnan(vals))
    np.testing.assert_allclose(back[~np.isnan(back)], vals[~np.isnan(vals)])
    write_grid_svg(tmp_path / "g.svg", g)
    root = ET.parse(tmp_path / "g.svg").getroot()
    assert root.get("width") == "2" and root.get("height") == "2"
    ex = exceedance_map(g, 1e-3, 0.5)
    write_grid_svg(tmp_path / "e.svg", ex)
    write_grid_csv(tmp_path / "e.csv", ex)
    _, codes = read_grid_csv(tmp_path / "e.csv")
    np.testing.assert_array_equal(codes, ex.codes())


def test_running_stats_matches_numpy(rng):
    x = rng.standard_normal(1000) * 3 + 7
    a, b = RunningStats(), RunningStats()
    for v in x[:400]:
        a.push(v)
    for v in x[400:]:
        b.push(v)
    m = a.merge(b)
    assert m.mean == pytest.approx(x.mean(), rel=1e-12)
    assert m.se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-10)
    assert math.isnan(RunningStats().se)


def _rec(L, d, cap, pw, failed=False):
    if failed:
        return DrawRecord(L=L, draw_index=d, seed=0, failed=True, reason="x")
    return DrawRecord(L=L, draw_index=d, seed=0, metrics={
        "reference": {"capacity_mbps": cap, "power_w": pw},
        "reduced": {"capacity_mbps": 0.5 * cap, "power_w": 0.5 * pw}})


def test_summary_counts_and_percentages():
    recs = [_rec(2, 0, 10, 200), _rec(2, 1, 20, 200), _rec(3, 0, 5, 100),
            _rec(3, 1, 0, 0, failed=True)]
    s = summarize_sweep(recs)
    assert len(s.rows) == 4
    assert s.n_failed == {2: 0, 3: 1}
    r = s.row(2, "reduced")
    assert r.power_pct_vs_ref == pytest.approx(50.0)
    assert r.capacity_pct_vs_ref == pytest.approx(50.0)
    assert s.row(2, "reference").mean_capacity_mbps == 15.0
    assert s.row(3, "reference").n_draws == 1
    assert s.ue_counts == [2, 3]
    with pytest.raises(KeyError):
        s.row(4, "reference")
    with pytest.raises(ValueError):
        summarize_sweep([])


def test_summary_independent_of_order(tmp_path, rng):
    recs = [_rec(L, d, float(rng.uniform(1, 100)), float(rng.uniform(1, 200)))
            for L in (2, 3) for d in range(50)]
    a = summarize_sweep(recs)
    b = summarize_sweep(list(reversed(recs)))
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
