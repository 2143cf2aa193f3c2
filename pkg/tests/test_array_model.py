import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsvdoa.array_model import (ArrayConfig, ErrorModel, SourceSpec,
                                corrupted_steering_vector, source_waveforms,
                                steering_vector, synthesize_snapshots)


def test_broadside_is_all_ones():
    cfg = ArrayConfig(6)
    np.testing.assert_array_equal(steering_vector(cfg, 0.0), np.ones(6))


def test_endfire_limit_phase_pi():
    cfg = ArrayConfig(2)
    v = steering_vector(cfg, np.pi / 2 - 1e-9)
    assert abs(v[1] - (-1)) < 1e-8


def test_thirty_degrees_hand_values():
    # d = lambda/2, sin 30 = 0.5: element m = exp(j pi (m-1) 0.5)
    cfg = ArrayConfig(4)
    v = steering_vector(cfg, np.deg2rad(30))
    expected = np.array([1, 1j, -1, -1j])
    np.testing.assert_allclose(v, expected, atol=1e-12)


@pytest.mark.parametrize("theta", [np.pi / 2, -np.pi / 2, 2.0, -1.7])
def test_rejects_out_of_range_angle(theta):
    with pytest.raises(ValueError):
        steering_vector(ArrayConfig(4), theta)
    with pytest.raises(ValueError):
        corrupted_steering_vector(ArrayConfig(4), theta)


def test_corrupted_identity_equals_ideal():
    cfg = ArrayConfig(5)
    for th in np.linspace(-1.5, 1.5, 11):
        np.testing.assert_allclose(corrupted_steering_vector(cfg, th),
                                   steering_vector(cfg, th), rtol=0, atol=1e-15)


def test_corrupted_broadside_is_error_diagonal():
    rng = np.random.default_rng(1)
    err = ErrorModel.random(7, rng)
    cfg = ArrayConfig(7, errors=err)
    np.testing.assert_allclose(corrupted_steering_vector(cfg, 0.0),
                               err.gains * np.exp(1j * err.phases), atol=1e-15)


def test_corrupted_three_element_example():
    err = ErrorModel(np.array([1.0, 2.0, 1.0]), np.array([0.0, np.pi / 2, 0.0]))
    v = corrupted_steering_vector(ArrayConfig(3, errors=err), 0.0)
    np.testing.assert_allclose(v, [1, 2j, 1], atol=1e-15)


def test_error_model_reference_enforced():
    with pytest.raises(ValueError):
        ErrorModel(np.array([1.1, 1.0]), np.zeros(2))
    with pytest.raises(ValueError):
        ErrorModel(np.ones(2), np.array([0.1, 0.0]))
    with pytest.raises(ValueError):
        ErrorModel(np.array([1.0, -0.5]), np.zeros(2))


def test_array_config_defaults_half_wavelength():
    cfg = ArrayConfig(3, carrier_wavelength=0.2)
    assert cfg.spacing == pytest.approx(0.1)
    with pytest.raises(ValueError):
        ArrayConfig(1)


@settings(max_examples=200, deadline=None)
@given(theta=st.floats(-np.pi / 2 + 1e-9, np.pi / 2 - 1e-9), M=st.integers(2, 16))
def test_steering_unit_modulus(theta, M):
    v = steering_vector(ArrayConfig(M), theta)
    assert np.max(np.abs(np.abs(v) - 1)) < 1e-12
    assert abs(v[0] - 1) < 1e-12


def test_noiseless_single_source_snapshots():
    cfg = ArrayConfig(4)
    src = SourceSpec([0.0], [3])
    L = 16
    x = synthesize_snapshots(cfg, src, L, np.inf).data
    ell = np.arange(1, L + 1)
    np.testing.assert_allclose(x, np.tile(np.exp(2j * np.pi * 3 * ell / L), (4, 1)),
                               atol=1e-14)


def test_synthesis_deterministic():
    cfg = ArrayConfig(8, errors=ErrorModel.random(8, np.random.default_rng(2)))
    src = SourceSpec(np.deg2rad([-40, 20]), [9])
    a = synthesize_snapshots(cfg, src, 128, 5.0, seed=11).data
    b = synthesize_snapshots(cfg, src, 128, 5.0, seed=11).data
    c = synthesize_snapshots(cfg, src, 128, 5.0, seed=12).data
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_coherent_sources_rank_one():
    cfg = ArrayConfig(8, errors=ErrorModel.random(8, np.random.default_rng(3)))
    src = SourceSpec(np.deg2rad([-40, 20]), [17])
    x = synthesize_snapshots(cfg, src, 128, np.inf).data
    sv = np.linalg.svd(x, compute_uv=False)
    assert sv[1] < 1e-10 * sv[0]


def test_noise_power_matches_snr():
    cfg = ArrayConfig(8)
    src = SourceSpec([0.3], [1], amplitudes=[2.0])
    L = 4096   # M L = 32768 samples
    snr = 3.0
    x = synthesize_snapshots(cfg, src, L, snr, seed=5)
    clean = synthesize_snapshots(cfg, src, L, np.inf).data
    sigma2 = 4.0 / 10 ** (snr / 10)
    assert x.noise_power == pytest.approx(sigma2)
    measured = np.mean(np.abs(x.data - clean) ** 2)
    assert abs(measured / sigma2 - 1) < 0.05


def test_snr_uses_total_source_power():
    cfg = ArrayConfig(4)
    src = SourceSpec([0.1, 0.5], [2], amplitudes=[1.0, 1.0])
    x = synthesize_snapshots(cfg, src, 8, 0.0, seed=0)
    assert x.noise_power == pytest.approx(2.0)


def test_synthesis_contract_errors():
    cfg = ArrayConfig(3)
    with pytest.raises(ValueError):
        synthesize_snapshots(cfg, SourceSpec([0.1], [9]), 8, 10.0)
    with pytest.raises(ValueError):
        synthesize_snapshots(cfg, SourceSpec([0.1, 0.2, 0.3], [1]), 8, 10.0)
    with pytest.raises(ValueError):
        SourceSpec([0.1, 0.2], [1, 2], coherent=True)


def test_waveform_phase_convention():
    s = source_waveforms(SourceSpec([0.0], [1], amplitudes=[1j]), 4)
    np.testing.assert_allclose(s[0], 1j * np.exp(2j * np.pi * np.arange(1, 5) / 4))
