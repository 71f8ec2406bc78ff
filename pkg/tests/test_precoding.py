import numpy as np
import pytest
import scipy.linalg

from ris_emf.precoding import (IllConditionedError, LayerSelectionError, admit_layers,
                               assemble_bf, build_precoder, decompose_ue, select_layers,
                               write_singular_values_csv, zf_check)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_identity_decomposition():
    d = decompose_ue(np.eye(4))
    np.testing.assert_allclose(d.singular_values, 1.0)
    lm = select_layers([d])
    np.testing.assert_allclose(lm.gains, 1.0)


def test_diagonal_padded():
    H = np.zeros((2, 5), complex)
    H[0, 0], H[1, 1] = 2.0, 1.0
    np.testing.assert_allclose(decompose_ue(H).singular_values, [2.0, 1.0])


def test_svd_against_gesvd(rng):
    for _ in range(10):
        H = crandn(rng, 4, 8)
        d = decompose_ue(H)
        rec = d.U @ np.diag(d.singular_values) @ d.V.conj().T
        assert np.linalg.norm(rec - H) / np.linalg.norm(H) <= 1e-10
        np.testing.assert_allclose(d.U.conj().T @ d.U, np.eye(4), atol=1e-10)
        np.testing.assert_allclose(d.V.conj().T @ d.V, np.eye(4), atol=1e-10)
        ref = scipy.linalg.svd(H, compute_uv=False, lapack_driver="gesvd")
        np.testing.assert_allclose(d.singular_values, ref, rtol=1e-10)
        assert np.all(np.diff(d.singular_values) <= 0)


def test_phase_convention_is_reproducible(rng):
    H = crandn(rng, 3, 6)
    d = decompose_ue(H)
    idx = np.argmax(np.abs(d.V), axis=0)
    piv = d.V[idx, range(3)]
    np.testing.assert_allclose(piv.imag, 0.0, atol=1e-15)
    assert np.all(piv.real > 0)
    d2 = decompose_ue(H * np.exp(0j))
    np.testing.assert_array_equal(d.V, d2.V)


def test_decompose_rejects_nonfinite_and_tall():
    with pytest.raises(ValueError):
        decompose_ue(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        decompose_ue(np.ones((3, 2)))


def test_select_layers_cases(rng):
    ds = [decompose_ue(crandn(rng, 4, 16)) for _ in range(3)]
    lm = select_layers(ds)
    assert lm.nu == 12
    np.testing.assert_array_equal(lm.layers[:4], [[0, 0], [0, 1], [0, 2], [0, 3]])
    lm1 = select_layers(ds, 1)
    assert lm1.nu == 3
    np.testing.assert_allclose(lm1.gains, [d.singular_values[0] ** 2 for d in ds])


def test_select_layers_rejects_degenerate():
    H = np.zeros((2, 4), complex)
    H[0, 0] = 1.0
    H[1, 1] = 1e-14
    d = decompose_ue(H)
    assert d.rank == 1 and d.rank_deficient
    with pytest.raises(LayerSelectionError, match="UE 0"):
        select_layers([d], 2)


def test_orthonormal_rows_precoder():
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((8, 8))
                        + 1j * np.random.default_rng(1).standard_normal((8, 8)))
    H = Q[:, :3].conj().T  # 3 x 8 with orthonormal rows
    d = decompose_ue(H)
    pre = build_precoder([d], select_layers([d]))
    np.testing.assert_allclose(pre.V_tilde_pinv, pre.V_tilde.conj().T, atol=1e-12)
    np.testing.assert_allclose(pre.coupling, 1.0, rtol=1e-12)
    bf = assemble_bf(pre, [2.0, 2.0, 2.0])
    assert np.real(np.trace(bf.B @ bf.B.conj().T)) == pytest.approx(6.0, rel=1e-12)


def test_identical_ue_rows_are_ill_conditioned(rng):
    H = crandn(rng, 2, 8)
    d = decompose_ue(H)
    with pytest.raises(IllConditionedError) as err:
        build_precoder([d, d], select_layers([d, d]))
    assert err.value.condition > 1e12


def test_random_precoder_against_explicit_inverse(rng):
    for _ in range(10):
        ds = [decompose_ue(crandn(rng, 2, 16)) for _ in range(3)]
        pre = build_precoder(ds, select_layers(ds))
        V = pre.V_tilde
        assert np.linalg.norm(V @ pre.V_tilde_pinv - np.eye(6)) <= 1e-8
        G_inv = scipy.linalg.inv(V @ V.conj().T)
        np.testing.assert_allclose(pre.coupling, np.real(np.diag(G_inv)), rtol=1e-10)
        np.testing.assert_allclose(pre.V_tilde_pinv, V.conj().T @ G_inv, atol=1e-10)
        assert np.all(pre.coupling >= 1 - 1e-8)


def test_assemble_bf(rng):
    ds = [decompose_ue(crandn(rng, 2, 10)) for _ in range(2)]
    pre = build_precoder(ds, select_layers(ds))
    zero = assemble_bf(pre, np.zeros(4))
    assert not np.any(zero.B)
    P = rng.uniform(0, 3, 4)
    bf = assemble_bf(pre, P)
    np.testing.assert_allclose(bf.B, pre.V_tilde_pinv @ np.diag(np.sqrt(P)), atol=1e-14)
    direct = np.real(np.trace(bf.B @ bf.B.conj().T))
    assert bf.total_power == pytest.approx(direct, rel=1e-10)
    with pytest.raises(ValueError):
        assemble_bf(pre, [1.0, -1.0, 1.0, 1.0])


def test_zf_properties(rng):
    ds_H = [crandn(rng, 3, 12) for _ in range(3)]
    ds = [decompose_ue(H) for H in ds_H]
    pre = build_precoder(ds, select_layers(ds, [2, 3, 1]))
    bf = assemble_bf(pre, rng.uniform(0.5, 2.0, pre.layer_map.nu))
    intf, gain = zf_check(ds_H, ds, bf)
    assert intf <= 1e-8 and gain <= 1e-8
    # other UEs' layers are nulled through the full combiner of every UE
    for l, H in enumerate(ds_H):
        other = np.flatnonzero(pre.layer_map.layers[:, 0] != l)
        eff = ds[l].U.conj().T @ H @ bf.B
        assert np.linalg.norm(eff[:ds[l].rank, other][:pre.layer_map.counts[l]]) <= \
            1e-8 * np.linalg.norm(bf.B) * np.linalg.norm(np.vstack(ds_H))


def test_admit_layers_handles_shared_row_space(rng):
    # every UE channel lives in the same 3-dim row space, as with shared scatterers
    basis = crandn(rng, 3, 16)
    Hs = [crandn(rng, 4, 3) @ basis for _ in range(4)]
    ds = [decompose_ue(H) for H in Hs]
    assert all(d.rank == 3 for d in ds)
    with pytest.raises(IllConditionedError):
        build_precoder(ds, select_layers(ds, 3))
    lm = admit_layers(ds)
    assert lm.nu == 3
    pre = build_precoder(ds, lm)
    assert pre.condition < 1e4
    assert np.all(lm.counts <= 3)
    bf = assemble_bf(pre, np.ones(lm.nu))
    intf, gain = zf_check(Hs, ds, bf)
    assert intf <= 1e-8 and gain <= 1e-8


def test_admit_layers_full_rank_takes_everything(rng):
    ds = [decompose_ue(crandn(rng, 2, 16)) for _ in range(3)]
    lm = admit_layers(ds)
    assert lm.nu == 6
    np.testing.assert_array_equal(lm.layers, select_layers(ds).layers)
    assert admit_layers(ds, 1).nu == 3


def test_singular_value_csv(tmp_path, rng):
    ds = [decompose_ue(crandn(rng, 2, 4))]
    path = tmp_path / "sv.csv"
    write_singular_values_csv(path, [(0, ds)])
    lines = path.read_text().splitlines()
    assert lines[0] == "draw,ue,index,sigma"
    assert len(lines) == 3
    assert float(lines[1].split(",")[3]) == ds[0].singular_values[0]
