import numpy as np
import pytest

from ris_emf.scene import PhysicalParams, SceneConfig, build_scene, linear_array, Scene

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def params():
    return PhysicalParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_small_scene(rng, M=None, N=None, K=None, S=None, Z=None, L=None):
    """Scene with counts <= 4 and random planar placement outside 50 m."""
    M = M or int(rng.integers(1, 5))
    N = N or int(rng.integers(1, 5))
    K = K or int(rng.integers(1, 5))
    S = int(rng.integers(0, 5)) if S is None else S
    Z = int(rng.integers(0, 5)) if Z is None else Z
    if S + Z == 0:
        S = 1
    L = L or int(rng.integers(1, 4))
    cfg = SceneConfig(n_bs=M, n_ue_antennas=N, n_ues=L, n_ris_elements=K, n_scatterers=S,
                      n_ris=Z)
    return build_scene(cfg, PhysicalParams(), rng)


def manual_scene(bs_center=(0, 0, 0), M=1, ue_centers=((100, 0, 0),), N=1, ris_centers=(),
                 K=1, scatterers=(), wavelength=None):
    lam = PhysicalParams().wavelength if wavelength is None else wavelength
    sp = 0.5 * lam
    ue_c = np.array(ue_centers, dtype=float).reshape(-1, 3)
    ris_c = np.array(ris_centers, dtype=float).reshape(-1, 3)
    return Scene(
        bs_center=np.array(bs_center, dtype=float),
        bs_elements=linear_array(bs_center, M, sp),
        ue_centers=ue_c,
        ue_elements=np.stack([linear_array(c, N, sp) for c in ue_c]),
        ris_centers=ris_c,
        ris_elements=(np.stack([linear_array(c, K, sp) for c in ris_c]) if len(ris_c)
                      else np.zeros((0, K, 3))),
        scatterers=np.array(scatterers, dtype=float).reshape(-1, 3),
        wavelength=lam, rng_seed=0)
