import numpy as np
import pytest

import mrsiscrub as ms


def test_axis_and_fft_round_trip():
    ax = ms.SpectralAxis(64, 4000.0)
    ppm = ax.ppm()
    assert ppm.shape == (64,)
    assert np.all(np.diff(ppm) < 0)
    rng = np.random.default_rng(0)
    x = rng.normal(size=64) + 1j * rng.normal(size=64)
    back = ms.to_time(ms.to_frequency(x, ax), ax)
    assert np.allclose(back, x, atol=1e-12)
    assert np.isclose(np.linalg.norm(ms.to_frequency(x, ax)), np.linalg.norm(x))


def test_hlsvd_single_component():
    ax = ms.SpectralAxis(512, 4000.0)
    t = np.arange(512) / 4000.0
    fid = 2.0 * np.exp(2j * np.pi * 100.0 * t - 20.0 * t)
    comps = ms.hlsvd_decompose(fid, ax, 2)
    top = comps[0]
    assert abs(top.frequency_hz - 100.0) < 0.01
    assert abs(top.damping_per_s - 20.0) < 0.1
    assert abs(top.amplitude - 2.0) < 0.02


def test_lipid_operator_matches_dense_inverse():
    ax = ms.SpectralAxis(16, 4000.0)
    rng = np.random.default_rng(1)
    cols = [rng.normal(size=16) + 1j * rng.normal(size=16) for _ in range(3)]
    op = ms.lipid_operator(cols, ax, beta=2.5)
    L = np.stack([c / np.abs(c).max() for c in cols], axis=1)
    dense = np.linalg.inv(np.eye(16) + 2.5 * L @ L.conj().T)
    s = rng.normal(size=16) + 1j * rng.normal(size=16)
    assert np.allclose(op.apply(s), dense @ s, atol=1e-8)
    assert np.allclose(op.apply(s) + op.project_lipid(s), s, atol=1e-14)


def test_phantom_pipeline():
    ph = ms.build_phantom(nx=16, ny=16, points=128, seed=2)
    v = ms.b0_correct(ph["measured"])
    assert v.fids.shape == (16, 16, 128)
    assert v.brain_mask.sum() > 0 and v.scalp_mask.sum() > 0
    cleaned = ms.remove("hlsvd+l2", v, op=ms.lipid_operator_from_volume(v))
    water_before = ms.residual_map(v, (5.2, 4.2))
    water_after = ms.residual_map(cleaned, (5.2, 4.2))
    brain = v.brain_mask.astype(bool)
    assert np.all(water_after[brain] < water_before[brain])
    low = ms.lowrank_denoise(cleaned, 10)
    assert np.abs(low.fids[~brain]).max() == 0.0


def test_errors_are_typed(tmp_path):
    ax = ms.SpectralAxis(32, 4000.0)
    with pytest.raises(ms.ConfigError):
        ms.hlsvd_decompose(np.zeros(32, complex), ax, 0)
    with pytest.raises(ms.DataError):
        ms.hlsvd_decompose(np.zeros(16, complex), ax, 2)
    with pytest.raises(ms.FormatError):
        ms.read_volume(tmp_path / "missing.mrsx")
    with pytest.raises(ms.ConfigError):
        ms.remove("walinet", ms.build_phantom(nx=16, ny=16, points=64)["measured"])


def test_volume_file_round_trip(tmp_path):
    v = ms.Volume(2, 3, ms.SpectralAxis(8, 1000.0))
    rng = np.random.default_rng(3)
    v.fids = (rng.normal(size=(2, 3, 8)) + 1j * rng.normal(size=(2, 3, 8))).astype(np.complex64)
    ms.write_volume(v, tmp_path / "v.mrsx")
    back = ms.read_volume(tmp_path / "v.mrsx")
    assert np.array_equal(back.fids, v.fids)
