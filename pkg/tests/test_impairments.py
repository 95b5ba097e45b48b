import numpy as np
import pytest

from mmwlin.impairments import (AdcConfig, agc, agc_clip_level, iip3_dbm_from_params, lna,
                                lna_params_from_spec, optimize_loading_fraction, quantize,
                                rms_per_dim)
from mmwlin.metrics import bussgang_distortion
from mmwlin.signal import ConfigError


def test_footnote_parameters():
    p = lna_params_from_spec(35, -10, 50)
    assert p.beta1 == pytest.approx(56.234, rel=1e-4)
    assert p.beta3 == pytest.approx(-7497, abs=1.0)
    assert p.v_sat == pytest.approx(0.025)
    assert p.v_max == pytest.approx(p.beta1 * p.v_sat + p.beta3 * p.v_sat**3, rel=1e-15)


def test_table_parameters():
    assert lna_params_from_spec(15, -10).beta1 == pytest.approx(5.623, rel=1e-3)
    b3 = lna_params_from_spec(15, -40).beta3
    assert abs(b3) == pytest.approx(7.50e5, rel=2e-3)
    assert 1e3 < abs(b3) < 1e6


def test_knee_is_below_peak():
    for iip3 in np.arange(-40, -15, 2.0):
        p = lna_params_from_spec(15, iip3)
        assert p.v_sat < p.peak_radius
        assert p.invertible_radius == p.v_sat


def test_iip3_round_trip():
    for iip3 in [-40.0, -30.0, -16.0, -10.0, 5.5]:
        p = lna_params_from_spec(15, iip3)
        assert abs(iip3_dbm_from_params(p) - iip3) < 1e-9


def test_lna_branches():
    p = lna_params_from_spec(35, -10, 50)
    assert lna(0j, p) == 0
    y = lna(2 * p.v_sat * np.exp(0.7j), p)
    assert abs(y) == pytest.approx(1.2886, abs=1e-4)
    assert np.angle(y) == pytest.approx(0.7)
    assert lna(p.v_sat + 0j, p) == pytest.approx(p.v_max, rel=1e-15)


def test_lna_modes():
    p = lna_params_from_spec(15, -30)
    x = np.array([0.5, 2.0]) * p.v_sat
    assert np.allclose(lna(x, p.linear()), p.beta1 * x)
    c = p.clip_only()
    assert np.allclose(lna(x, c), [p.beta1 * x[0], p.beta1 * p.v_sat])
    q = p.poly_only()
    assert lna(x[1], q) == pytest.approx(p.beta1 * x[1] + p.beta3 * x[1] ** 3)


def test_agc():
    cfg = AdcConfig(bits=6, loading_fraction=3.0)
    assert agc_clip_level(0.1, cfg) == pytest.approx(0.3)
    assert agc_clip_level(0.1, AdcConfig(bits=4, loading_fraction=1.0)) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        agc_clip_level(0.0, cfg)
    y = np.full((4, 10), 0.2 + 0.2j)
    assert rms_per_dim(y) == pytest.approx(0.2)
    assert agc(y, cfg).clip_level == pytest.approx(0.6)


def test_quantizer_examples():
    c = AdcConfig(bits=1, clip_level=1.0)
    assert quantize(0.7 - 0.2j, c) == pytest.approx(0.5 - 0.5j)
    c6 = AdcConfig(bits=6, clip_level=1.0)
    top = 1.0 - c6.step / 2
    assert quantize(10.0 + 0j, c6).real == pytest.approx(top)
    assert quantize(-10.0 + 0j, c6).real == pytest.approx(-top)
    codes = c6.step * (np.arange(-32, 32) + 0.5)
    assert np.array_equal(quantize(codes + 0j, c6).real, codes)


def test_quantizer_codebook_size(rng):
    c = AdcConfig(bits=3, clip_level=0.5)
    q = quantize(rng.standard_normal(10_000) + 1j * rng.standard_normal(10_000), c)
    assert len(np.unique(q.real)) == 8
    assert len(np.unique(q.imag)) == 8


@pytest.mark.parametrize("kw", [dict(bits=0), dict(bits=13), dict(bits=4, clip_level=0),
                                dict(bits=4, loading_fraction=4.5)])
def test_bad_adc_config(kw):
    with pytest.raises(ConfigError):
        AdcConfig(**kw)


def _gauss(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)


def test_loading_fraction_brute_force(rng):
    x = _gauss(rng, 20_000)
    grid = np.round(np.arange(1.0, 4.01, 0.1), 1)
    got = optimize_loading_fraction(x, 4, grid)
    sig = rms_per_dim(x)
    d = [bussgang_distortion(x, quantize(x, AdcConfig(4, f * sig, f))).d_bar for f in grid]
    assert got == grid[int(np.argmin(d))]


def test_loading_fraction_gaussian_range(rng):
    x = _gauss(rng, 20_000)
    f = optimize_loading_fraction(x, 6, np.round(np.arange(1.0, 4.01, 0.1), 1))
    assert 2.0 < f < 4.0


def test_loading_fraction_fine_and_trivial(rng):
    x = _gauss(rng, 5000)
    f = optimize_loading_fraction(x, 12, np.arange(1.0, 4.01, 0.5))
    q = quantize(x, AdcConfig(12, f * rms_per_dim(x), f))
    assert bussgang_distortion(x, q).d_bar < 1e-5
    assert optimize_loading_fraction(x, 3, [2.7]) == 2.7
    # constant-modulus input: all fractions that avoid overload tie, keep the smallest
    with pytest.raises(ValueError):
        optimize_loading_fraction(np.array([]), 4, [1.0])
