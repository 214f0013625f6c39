"""
纠缠创建测试
"""

import math

import numpy as np
import pytest

from src.core.exceptions import ParameterError
from src.core.models import Detector, EmitterParams, EvaluationMode, HeraldTag, NoiseParams, PauliWord
from src.services.creation import CreationReport, CreationResult, initial_state, run_creation
from src.services.protocols import analytic_protocol_success
from src.services.scattering import SpectralWavepacket, reflection_probability
from src.services.state_engine import SQRT1_2, MixedEnsemble
from tests.conftest import random_noise, random_params

FIDELITY_ATOL = 1e-10


def enumerate_creation(params: EmitterParams, noise: NoiseParams | None = None, **kwargs) -> CreationReport:
    report = run_creation(params, noise, evaluation=EvaluationMode.ENUMERATE, **kwargs)
    assert isinstance(report, CreationReport)
    return report


def test_initial_state_layout():
    state = initial_state()
    assert state.ids == ("p", "bin", "a", "b")
    assert state.norm_squared == pytest.approx(1.0)


def test_ideal_creation(ideal_params):
    report = enumerate_creation(ideal_params)
    assert report.success_probability == pytest.approx(1.0, abs=1e-12)
    assert report.herald_fail_probability == pytest.approx(0.0, abs=1e-12)
    assert report.loss_probability == 0.0
    assert report.fidelity == pytest.approx(1.0, abs=FIDELITY_ATOL)


def test_ideal_creation_under_noise(ideal_params):
    """|γ|² + |δ|² = 1 的集体噪声不影响结果"""
    report = enumerate_creation(ideal_params, NoiseParams(gamma=0.6, delta=0.8))
    assert report.success_probability == pytest.approx(1.0, abs=1e-12)
    assert report.fidelity == pytest.approx(1.0, abs=FIDELITY_ATOL)


def test_platform_success_matches_analytic(platform_params):
    report = enumerate_creation(platform_params)
    p1, _, _ = analytic_protocol_success(platform_params)
    assert p1 == pytest.approx(0.9100, abs=5e-4)
    assert report.success_probability == pytest.approx(p1, abs=1e-10)
    assert report.success_probability == pytest.approx(reflection_probability(platform_params) ** 3, abs=1e-12)


def test_probabilities_sum_to_one(lossy_params):
    report = enumerate_creation(lossy_params, NoiseParams(gamma=0.8j, delta=0.6))
    total = report.success_probability + report.herald_fail_probability + report.loss_probability
    assert total == pytest.approx(1.0, abs=1e-12)
    assert sum(r.probability for r in report.results) == pytest.approx(1.0, abs=1e-12)
    assert sum(report.detector_probability(d) for d in Detector) == pytest.approx(report.success_probability)


def test_corrections_per_detector(lossy_params):
    report = enumerate_creation(lossy_params)
    for result in report.results:
        if not result.succeeded:
            assert result.final_state is None
            continue
        expected = PauliWord.X if result.herald in ("D2", "D3") else PauliWord.I
        assert result.correction == expected


def test_heralded_fidelity_property():
    """随机 (P, Δ, 噪声) 下每个成功分支修正后都是 |φ+⟩"""
    rng = np.random.default_rng(4)
    for _ in range(200):
        report = enumerate_creation(random_params(rng), random_noise(rng))
        successes = [r for r in report.results if r.succeeded]
        assert successes
        for result in successes:
            assert result.fidelity is not None
            assert result.fidelity >= 1.0 - FIDELITY_ATOL


@pytest.mark.parametrize(
    "gamma,delta",
    [(0.6, 0.8), (0.6, 0.8j), (1.0, 0.0), (SQRT1_2, -SQRT1_2)],
)
def test_detector_split_follows_noise(gamma, delta, ideal_params):
    """路径 1（D1、D2）各占 |γ|²/2，路径 2（D3、D4）各占 |δ|²/2"""
    report = enumerate_creation(ideal_params, NoiseParams(gamma=gamma, delta=delta))
    for detector in (Detector.D1, Detector.D2):
        assert report.detector_probability(detector) == pytest.approx(abs(gamma) ** 2 / 2, abs=1e-12)
    for detector in (Detector.D3, Detector.D4):
        assert report.detector_probability(detector) == pytest.approx(abs(delta) ** 2 / 2, abs=1e-12)


def test_success_is_noise_invariant():
    rng = np.random.default_rng(5)
    params = EmitterParams(purcell=12.0, detuning=0.05)
    reference = enumerate_creation(params).success_probability
    for _ in range(50):
        report = enumerate_creation(params, random_noise(rng))
        assert report.success_probability == pytest.approx(reference, abs=1e-12)


class TestWaveformCorrection:
    def test_spectral_with_wfc_is_perfect(self):
        params = EmitterParams(purcell=20.0)
        report = enumerate_creation(params, wavepacket=SpectralWavepacket.gaussian(0.1))
        assert report.spectral
        assert isinstance(report.success_state, MixedEnsemble)
        assert report.fidelity is not None
        assert report.fidelity >= 1.0 - FIDELITY_ATOL

    def test_spectral_without_wfc_loses_fidelity(self):
        params = EmitterParams(purcell=20.0)
        report = enumerate_creation(params, wavepacket=SpectralWavepacket.gaussian(0.1), wfc=False)
        assert report.fidelity is not None
        assert report.fidelity < 1.0 - 1e-4

    def test_monochromatic_without_wfc_loses_fidelity(self):
        report = enumerate_creation(EmitterParams(purcell=20.0), wfc=False)
        assert report.fidelity is not None
        assert report.fidelity < 1.0 - 1e-4
        assert report.fidelity > 0.99

    def test_broadband_lowers_success(self):
        params = EmitterParams(purcell=20.0)
        spectral = enumerate_creation(params, wavepacket=SpectralWavepacket.gaussian(0.1))
        assert spectral.success_probability < enumerate_creation(params).success_probability

    def test_rejects_unnormalized_wavepacket(self):
        wp = SpectralWavepacket(detunings=np.array([0.0]), amplitudes=np.array([0.5]))
        with pytest.raises(ParameterError):
            run_creation(EmitterParams(purcell=20.0), wavepacket=wp)


class TestSampling:
    def test_same_seed_same_result(self, lossy_params):
        first = run_creation(lossy_params, evaluation=EvaluationMode.SAMPLE, seed=11)
        second = run_creation(lossy_params, evaluation=EvaluationMode.SAMPLE, seed=11)
        assert isinstance(first, CreationResult)
        assert isinstance(second, CreationResult)
        assert first.herald == second.herald
        assert first.fidelity == second.fidelity

    def test_sampled_success_is_heralded(self, lossy_params):
        rng = np.random.default_rng(9)
        for _ in range(30):
            result = run_creation(lossy_params, evaluation=EvaluationMode.SAMPLE, rng=rng)
            assert isinstance(result, CreationResult)
            if result.succeeded:
                assert result.fidelity is not None
                assert result.fidelity >= 1.0 - FIDELITY_ATOL
            else:
                assert result.herald in (HeraldTag.HERALD_FAIL.value, HeraldTag.LOSS.value)

    def test_sample_needs_seed(self, lossy_params):
        with pytest.raises(ParameterError):
            run_creation(lossy_params, evaluation=EvaluationMode.SAMPLE)


def test_summary(platform_params):
    summary = enumerate_creation(platform_params).summary()
    assert summary.protocol == "creation"
    assert summary.mode == EvaluationMode.ENUMERATE
    assert set(summary.extra) == {"p_D1", "p_D2", "p_D3", "p_D4", "p_s"}
    keys = [key for key, _ in summary.as_pairs()]
    assert keys[:5] == ["protocol", "mode", "success_probability", "herald_fail_probability", "loss_probability"]
    assert not math.isnan(summary.success_probability)
