import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ris_emf.scene import (CirclePointSet, PhysicalParams, SceneConfig, build_scene,
                           dbm_to_watts, sample_safety_circle, watts_to_dbm)


def test_dbm_conversions():
    assert dbm_to_watts(-5.0) == pytest.approx(3.1623e-4, rel=1e-4)
    assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ValueError):
        watts_to_dbm(0.0)
    with pytest.raises(ValueError):
        watts_to_dbm(-1.0)
    with pytest.raises(ValueError):
        dbm_to_watts(float("nan"))


@given(st.floats(min_value=-200, max_value=200))
def test_dbm_round_trip(x):
    assert watts_to_dbm(dbm_to_watts(x)) == pytest.approx(x, rel=1e-12, abs=1e-12)


@given(st.floats(min_value=1e-20, max_value=1e6))
def test_watts_round_trip(w):
    assert dbm_to_watts(watts_to_dbm(w)) == pytest.approx(w, rel=1e-12)


def test_physical_params_validation():
    p = PhysicalParams()
    assert p.wavelength == pytest.approx(299_792_458 / 3.5e9)
    with pytest.raises(ValueError):
        PhysicalParams(max_power=0.0)
    with pytest.raises(ValueError):
        PhysicalParams(n_circle_samples=2)
    with pytest.raises(ValueError):
        PhysicalParams(safety_radius=-1.0)


def test_build_scene_is_deterministic():
    cfg = SceneConfig(seed=7)
    a, b = build_scene(cfg), build_scene(cfg)
    assert a.same_as(b)
    assert not a.same_as(build_scene(SceneConfig(seed=8)))


def test_element_counts_match_deployment():
    cfg = SceneConfig(n_bs=64, n_ris_elements=4, n_ue_antennas=4, n_ris=3, n_scatterers=3,
                      n_ues=5)
    s = build_scene(cfg)
    assert s.bs_elements.shape == (64, 3)
    assert s.ue_elements.shape == (5, 4, 3)
    assert s.ris_elements.shape == (3, 4, 3)
    assert s.scatterers.shape == (3, 3)


def test_half_wavelength_spacing():
    s = build_scene(SceneConfig(seed=1))
    spacing = 299_792_458 / 3.5e9 / 2
    assert spacing == pytest.approx(0.04283, abs=1e-5)
    for arr in (s.bs_elements, *s.ue_elements, *s.ris_elements):
        gaps = np.linalg.norm(np.diff(arr, axis=0), axis=1)
        np.testing.assert_allclose(gaps, spacing, rtol=1e-12)


def test_random_entities_inside_annulus_and_outside_circle():
    cfg = SceneConfig(seed=3, n_ues=7, r_min=60, r_max=200)
    s = build_scene(cfg)
    for pts in (s.ue_centers, s.ris_centers, s.scatterers):
        r = np.linalg.norm(pts, axis=1)
        assert np.all((r >= 60) & (r <= 200))
    assert np.all(np.abs(s.ue_elements[..., 2]) == 0)


def test_scene_rejects_bad_configs():
    with pytest.raises(ValueError):
        build_scene(SceneConfig(r_min=40.0, r_max=200.0))  # intersects R = 50
    with pytest.raises(ValueError):
        SceneConfig(n_bs=0)
    with pytest.raises(ValueError):
        SceneConfig(n_scatterers=-1)


def test_circle_four_points():
    s = build_scene(SceneConfig(seed=0))
    c = sample_safety_circle(s, PhysicalParams(n_circle_samples=4))
    assert isinstance(c, CirclePointSet)
    np.testing.assert_allclose(c.points, [[50, 0, 0], [0, 50, 0], [-50, 0, 0], [0, -50, 0]],
                               atol=1e-12)


def test_circle_radius_and_spacing():
    s = build_scene(SceneConfig(seed=0))
    c = sample_safety_circle(s, PhysicalParams(n_circle_samples=360))
    r = np.linalg.norm(c.points - s.bs_center, axis=1)
    assert np.max(np.abs(r - 50.0)) / 50.0 <= 1e-9
    ang = np.degrees(np.arctan2(c.points[:, 1], c.points[:, 0])) % 360
    np.testing.assert_allclose(np.diff(ang)[:-1], 1.0, atol=1e-9)
    assert len(np.unique(np.round(c.points, 9), axis=0)) == 360
    assert math.isclose(c.radius, 50.0)
