"""
散射核心测试
"""

import math

import numpy as np
import pytest

from src.core.exceptions import ParameterError
from src.core.models import EmitterParams, FilterSide
from src.services.scattering import (
    SpectralWavepacket,
    compute_coefficients,
    filter_wavepacket,
    overlap_success_probability,
    purcell_factor,
    raw_herald_probability,
    reflection_probability,
    success_threshold_region,
)


class TestCoefficients:
    def test_headline_point(self):
        """P = 100，Δ = 0.1 时 p_s ≈ 94.33%"""
        p_s = reflection_probability(EmitterParams(purcell=100.0, detuning=0.1))
        assert p_s == pytest.approx(0.9433, abs=1e-4)
        assert p_s == pytest.approx(1.0 / 1.0601, rel=1e-12)

    def test_unit_purcell_on_resonance(self):
        c = compute_coefficients(EmitterParams(purcell=1.0))
        assert c.r == pytest.approx(-0.5)
        assert c.t == pytest.approx(0.5)
        assert c.loss == pytest.approx(0.5)

    def test_ideal_limit(self, ideal_params):
        c = compute_coefficients(ideal_params)
        assert c.r == -1.0
        assert c.t == 0.0
        assert c.loss == 0.0

    def test_ideal_limit_with_detuning_is_lossless(self):
        c = compute_coefficients(EmitterParams(purcell=math.inf, detuning=0.3))
        assert c.loss == 0.0
        assert c.reflectance + c.transmittance == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("purcell", [0.5, 1.0, 7.3, 63.1, 1e4])
    @pytest.mark.parametrize("detuning", [-0.5, -0.1, 0.0, 0.2, 0.5])
    def test_energy_conservation(self, purcell, detuning):
        """|r|² + |t|² + loss = 1"""
        c = compute_coefficients(EmitterParams(purcell=purcell, detuning=detuning))
        assert c.reflectance + c.transmittance + c.loss == pytest.approx(1.0, abs=1e-12)
        assert c.t == pytest.approx(1.0 + c.r)

    def test_detuning_symmetry(self):
        a = reflection_probability(EmitterParams(purcell=30.0, detuning=0.2))
        b = reflection_probability(EmitterParams(purcell=30.0, detuning=-0.2))
        assert a == pytest.approx(b, rel=1e-15)

    def test_monotone_in_purcell(self):
        values = [reflection_probability(EmitterParams(purcell=p)) for p in np.linspace(1.0, 50.0, 60)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_monotone_in_detuning(self):
        values = [reflection_probability(EmitterParams(purcell=50.0, detuning=d)) for d in np.linspace(0.0, 0.5, 60)]
        assert all(b < a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("purcell", [0.0, -1.0, math.nan])
    def test_rejects_bad_purcell(self, purcell):
        with pytest.raises(ValueError):
            EmitterParams(purcell=purcell)

    def test_rejects_infinite_detuning(self):
        with pytest.raises(ValueError):
            EmitterParams(purcell=10.0, detuning=math.inf)


def test_platform_purcell_from_rates():
    assert purcell_factor(6.182e9, 98e6) == pytest.approx(63.1, abs=0.05)
    assert purcell_factor(1.0, 0.0) == math.inf
    with pytest.raises(ParameterError):
        purcell_factor(0.0, 1.0)


def test_threshold_region():
    """P ≥ 50 且 |Δ| ≤ 0.13 时 p_s ≥ 0.90，最小值在角点"""
    minimum, (purcell, detuning) = success_threshold_region(points=100)
    assert minimum >= 0.90
    assert minimum == pytest.approx(0.902527, abs=1e-5)
    assert purcell == pytest.approx(50.0)
    assert abs(detuning) == pytest.approx(0.13)


class TestWavepacket:
    def test_gaussian_is_normalized(self):
        wp = SpectralWavepacket.gaussian(0.1)
        assert len(wp) == 101
        assert wp.is_normalized
        assert wp.detunings[0] == pytest.approx(-0.5)
        assert wp.detunings[-1] == pytest.approx(0.5)

    def test_gaussian_variance(self):
        """|amplitude|² 的标准差为 σ"""
        sigma = 0.2
        wp = SpectralWavepacket.gaussian(sigma, bins=401)
        weights = np.abs(wp.amplitudes) ** 2
        variance = float(np.sum(weights * wp.detunings**2))
        assert math.sqrt(variance) == pytest.approx(sigma, rel=1e-3)

    def test_single_bin_overlap_equals_reflectance(self, platform_params):
        wp = SpectralWavepacket.single_bin()
        assert overlap_success_probability(wp, platform_params) == pytest.approx(
            reflection_probability(platform_params), rel=1e-15
        )
        assert raw_herald_probability(wp, platform_params) == pytest.approx(reflection_probability(platform_params))

    def test_broadband_lowers_success(self):
        params = EmitterParams(purcell=20.0)
        wp = SpectralWavepacket.gaussian(0.1)
        p_s = overlap_success_probability(wp, params)
        assert p_s < reflection_probability(params)
        assert raw_herald_probability(wp, params) >= p_s

    def test_filter_splits_norm(self):
        """反射、透射与损耗分量的 norm 之和为 1"""
        params = EmitterParams(purcell=5.0, detuning=0.05)
        wp = SpectralWavepacket.gaussian(0.3, bins=51)
        reflected = filter_wavepacket(wp, params, FilterSide.REFLECTED)
        transmitted = filter_wavepacket(wp, params, FilterSide.TRANSMITTED)
        lost = sum(
            abs(a) ** 2 * compute_coefficients(params.shifted(d)).loss for d, a in wp.bins
        )
        assert reflected.norm_squared + transmitted.norm_squared + lost == pytest.approx(1.0, abs=1e-12)

    def test_ideal_mirror_negates_amplitudes(self, ideal_params):
        wp = SpectralWavepacket.single_bin()
        reflected = filter_wavepacket(wp, ideal_params, FilterSide.REFLECTED)
        assert np.allclose(reflected.amplitudes, -wp.amplitudes)
        assert reflected.norm_squared == pytest.approx(1.0)

    def test_unit_purcell_reflects_a_quarter(self):
        reflected = filter_wavepacket(SpectralWavepacket.single_bin(), EmitterParams(purcell=1.0), FilterSide.REFLECTED)
        assert reflected.norm_squared == pytest.approx(0.25)

    def test_narrow_gaussian_reflects_less_than_single_bin(self):
        """σ = 0.05，P = 50：宽带反射率严格低于单色的 (50/51)²"""
        params = EmitterParams(purcell=50.0)
        single = filter_wavepacket(SpectralWavepacket.single_bin(), params, FilterSide.REFLECTED).norm_squared
        broadband = filter_wavepacket(SpectralWavepacket.gaussian(0.05, bins=101), params, FilterSide.REFLECTED)
        assert single == pytest.approx((50 / 51) ** 2, rel=1e-12)
        assert broadband.norm_squared < single
        assert broadband.norm_squared == pytest.approx(0.9522, abs=1e-3)

    def test_rejects_unnormalized(self, platform_params):
        wp = SpectralWavepacket(detunings=np.array([0.0, 0.1]), amplitudes=np.array([0.5, 0.5]))
        with pytest.raises(ParameterError):
            overlap_success_probability(wp, platform_params)

    def test_rejects_unsorted_bins(self):
        with pytest.raises(ParameterError):
            SpectralWavepacket(detunings=np.array([0.1, 0.0]), amplitudes=np.array([0.6, 0.8]))

    @pytest.mark.parametrize("sigma", [0.0, -0.1, math.inf])
    def test_rejects_bad_sigma(self, sigma):
        with pytest.raises(ParameterError):
            SpectralWavepacket.gaussian(sigma)

    @pytest.mark.parametrize("bins", [0, -3])
    def test_rejects_bad_bins(self, bins):
        with pytest.raises(ParameterError):
            SpectralWavepacket.gaussian(0.1, bins=bins)

    @pytest.mark.parametrize("span", [0.0, -1.0, math.inf])
    def test_rejects_bad_span(self, span):
        with pytest.raises(ParameterError):
            SpectralWavepacket.gaussian(0.1, span=span)
