import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lidarbeam.beam import (SignalConfig, array_response, generate_codebook,
                            measure_power_vector, optimal_beam_index, receive_power)

UNIT = SignalConfig(1.0, 0.0)


def linear_scan_argmax(values):
    best, best_i = -np.inf, None
    for i, v in enumerate(values):
        if v > best:
            best, best_i = v, i + 1
    return best_i


def test_array_response_boresight():
    np.testing.assert_array_equal(array_response(0.0, 4, 1.0), np.ones(4))


def test_array_response_single_element():
    np.testing.assert_array_equal(array_response(np.pi / 2 - 1e-9, 1), [1.0])


def test_array_response_half_sine():
    np.testing.assert_allclose(array_response(np.pi / 6, 2, 1.0), [1.0, 1j], atol=1e-15)


def test_array_response_unit_modulus():
    a = array_response(0.7, 32, 0.8)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-15)


@pytest.mark.parametrize("theta", [np.nan, np.inf])
def test_array_response_rejects_nonfinite(theta):
    with pytest.raises(ValueError):
        array_response(theta, 4)


def test_array_response_rejects_empty_array():
    with pytest.raises(ValueError):
        array_response(0.1, 0)


def test_codebook_unit_norm():
    cb = generate_codebook(16, 64, np.radians([-60, 60]))
    assert cb.beams.shape == (64, 16)
    assert np.all(np.abs(np.linalg.norm(cb.beams, axis=1) - 1) < 1e-12)
    assert np.all(np.diff(cb.steering_angles) > 0)
    np.testing.assert_allclose(cb.steering_angles[[0, -1]], np.radians([-60, 60]))


def test_codebook_single_element_has_no_directivity():
    cb = generate_codebook(1, 2, (-1.0, 1.0))
    np.testing.assert_array_equal(cb.beams, [[1.0], [1.0]])


def test_codebook_needs_two_beams():
    with pytest.raises(ValueError):
        generate_codebook(4, 1)


def test_receive_power_matched():
    f = generate_codebook(8, 4).beams[2]
    assert receive_power(f, f, UNIT) == pytest.approx(1.0, abs=1e-14)


def test_receive_power_orthogonal():
    # DFT columns are orthogonal
    n = np.arange(4)
    h = np.exp(2j * np.pi * n * 1 / 4) / 2
    f = np.exp(2j * np.pi * n * 2 / 4) / 2
    assert receive_power(h, f, SignalConfig(5.0, 0.0)) == pytest.approx(0.0, abs=1e-28)


def test_receive_power_scaled_channel():
    f = generate_codebook(8, 4).beams[1]
    assert receive_power(2 * f, f, UNIT) == pytest.approx(4.0, abs=1e-13)


def test_receive_power_noise_sample():
    f = np.array([1.0, 0.0])
    h = np.array([0.5, 0.0])
    got = receive_power(h, f, SignalConfig(4.0, 1.0), noise_sample=0.25j)
    assert got == pytest.approx(abs(0.5 * 2 + 0.25j) ** 2)


def test_receive_power_dimension_mismatch():
    with pytest.raises(ValueError):
        receive_power(np.ones(3), np.ones(4) / 2, UNIT)


@given(st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
def test_receive_power_linear_in_transmit_power(P, seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    f = generate_codebook(6, 8).beams[3]
    assert receive_power(h, f, SignalConfig(P, 0.0)) == P * receive_power(h, f, UNIT)


def test_measure_matched_beam_is_unique_max():
    cb = generate_codebook(16, 64, np.radians([-60, 60]))
    h = array_response(cb.steering_angles[6], 16)  # beam 7
    pv = measure_power_vector(h, cb, UNIT)
    assert linear_scan_argmax(pv) == 7
    assert np.sum(pv == pv.max()) == 1


def test_measure_zero_channel():
    cb = generate_codebook(16, 64)
    np.testing.assert_array_equal(measure_power_vector(np.zeros(16), cb, UNIT), np.zeros(64))


def test_measure_deterministic_under_seed():
    cb = generate_codebook(16, 64)
    h = array_response(0.2, 16)
    cfg = SignalConfig(1.0, 0.5)
    a = measure_power_vector(h, cb, cfg, np.random.default_rng(3))
    b = measure_power_vector(h, cb, cfg, np.random.default_rng(3))
    assert a.tobytes() == b.tobytes()
    assert np.all(a >= 0)


def test_measure_dimension_mismatch():
    with pytest.raises(ValueError):
        measure_power_vector(np.ones(8), generate_codebook(16, 4), UNIT)


def test_noise_has_requested_variance():
    cb = generate_codebook(4, 2)
    rng = np.random.default_rng(0)
    vals = [measure_power_vector(np.zeros(4), cb, SignalConfig(1.0, 0.3), rng) for _ in range(5000)]
    # |n|^2 of a complex Gaussian has mean sigma^2
    assert np.mean(vals) == pytest.approx(0.3, rel=0.03)


def test_optimal_beam_index_examples():
    assert optimal_beam_index([0.1, 0.9, 0.3]) == 2
    assert optimal_beam_index([0.5, 0.5]) == 1


def test_optimal_beam_index_empty():
    with pytest.raises(ValueError):
        optimal_beam_index([])


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=64))
def test_optimal_beam_index_matches_linear_scan(values):
    assert optimal_beam_index(values) == linear_scan_argmax(values)


def test_matched_beam_optimality_all_beams():
    cb = generate_codebook(16, 64, np.radians([-60, 60]))
    for m in range(1, 65):
        h = array_response(cb.steering_angles[m - 1], 16) * np.sqrt(16)
        assert optimal_beam_index(measure_power_vector(h, cb, UNIT)) == m


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-np.pi, np.pi))
def test_argmax_scale_invariant(seed, mag, phase):
    rng = np.random.default_rng(seed)
    cb = generate_codebook(16, 64, np.radians([-60, 60]))
    h = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    base = optimal_beam_index(measure_power_vector(h, cb, UNIT))
    scaled = optimal_beam_index(measure_power_vector(mag * np.exp(1j * phase) * h, cb, UNIT))
    assert base == scaled
