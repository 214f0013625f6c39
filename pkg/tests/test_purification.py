"""
纠缠提纯测试
"""

import numpy as np
import pytest

from src.core.exceptions import ParameterError
from src.core.models import EmitterParams, EvaluationMode, PauliWord
from src.services.density_oracle import compare, density_matrix, fidelity_rho, is_physical
from src.services.protocols import (
    analytic_protocol_success,
    iterate_fidelity,
    purification_fidelity_map,
    purification_keep_probability,
)
from src.services.purification import (
    DISCARDED_COINCIDENCES,
    INPUT_CASES,
    KEPT_COINCIDENCES,
    PurificationReport,
    PurificationStatistics,
    atom_cases,
    expected_keep_probability,
    input_cases,
    propagate_purification_density,
    purification_coincidence_table,
    run_purification,
    sample_purification,
    target_state,
)
from src.services.trials import TrialSpec, run_trials

FIDELITY_ATOL = 1e-10


def enumerate_purification(fidelity_in: float, params: EmitterParams) -> PurificationReport:
    report = run_purification(fidelity_in, params)
    assert isinstance(report, PurificationReport)
    return report


class TestInputCases:
    def test_weights(self):
        weights = {case: w for w, _, case in atom_cases(0.8)}
        assert tuple(weights) == INPUT_CASES
        assert weights["phi+phi+"] == pytest.approx(0.64)
        assert weights["phi+psi+"] == pytest.approx(0.16)
        assert weights["psi+phi+"] == pytest.approx(0.16)
        assert weights["psi+psi+"] == pytest.approx(0.04)

    def test_photons_are_attached(self):
        _, state, _ = input_cases(0.9)[0]
        assert state.n_qubits == 8
        assert {"pa", "arm_a", "pb", "arm_b"} <= set(state.ids)

    @pytest.mark.parametrize("bad", [0.0, -0.1, 1.2, float("nan")])
    def test_invalid_fidelity(self, bad, ideal_params):
        with pytest.raises(ParameterError):
            run_purification(bad, ideal_params)


@pytest.mark.parametrize("fidelity_in", [0.55, 0.6, 0.7, 0.8, 0.9, 0.95])
def test_output_fidelity_matches_map(fidelity_in, ideal_params):
    report = enumerate_purification(fidelity_in, ideal_params)
    assert report.output_fidelity == pytest.approx(purification_fidelity_map(fidelity_in), abs=FIDELITY_ATOL)
    assert report.keep_probability == pytest.approx(purification_keep_probability(fidelity_in), abs=1e-12)


def test_documented_point(ideal_params):
    report = enumerate_purification(0.8, ideal_params)
    assert report.output_fidelity == pytest.approx(0.941176, abs=1e-6)
    assert report.keep_probability == pytest.approx(0.68, abs=1e-12)


def test_fixed_point_and_perfect_input(ideal_params):
    half = enumerate_purification(0.5, ideal_params)
    assert half.output_fidelity == pytest.approx(0.5, abs=FIDELITY_ATOL)

    perfect = enumerate_purification(1.0, ideal_params)
    assert perfect.keep_probability == pytest.approx(1.0, abs=1e-12)
    assert perfect.output_fidelity == pytest.approx(1.0, abs=FIDELITY_ATOL)


def test_platform_success_matches_analytic(platform_params):
    report = enumerate_purification(0.8, platform_params)
    _, _, p3 = analytic_protocol_success(platform_params)
    assert p3 == pytest.approx(0.8818, abs=5e-4)
    assert report.success_probability == pytest.approx(p3, abs=1e-10)
    assert report.kept_probability == pytest.approx(expected_keep_probability(0.8, platform_params), abs=1e-10)
    total = report.success_probability + report.herald_fail_probability + report.loss_probability
    assert total == pytest.approx(1.0, abs=1e-12)


def test_lossy_output_fidelity_unchanged(lossy_params):
    """散射成功的条件下输出保真度与 P、Δ 无关"""
    report = enumerate_purification(0.75, lossy_params)
    assert report.output_fidelity == pytest.approx(purification_fidelity_map(0.75), abs=FIDELITY_ATOL)


class TestDensityOracle:
    @pytest.mark.parametrize("fidelity_in", [0.6, 0.65, 0.75, 0.8, 0.85, 0.95])
    def test_matches_branch_enumeration(self, fidelity_in, lossy_params):
        rho, kept = propagate_purification_density(fidelity_in, lossy_params)
        report = enumerate_purification(fidelity_in, lossy_params)
        assert report.output_state is not None
        assert compare(rho, density_matrix(report.output_state), atol=1e-10)
        assert kept == pytest.approx(report.kept_probability, abs=1e-10)

    def test_matches_monte_carlo(self, lossy_params):
        """抽样的保留频率落在 oracle 保留概率的 3σ 以内"""
        _, kept = propagate_purification_density(0.8, lossy_params)
        spec = TrialSpec(protocol="purify", params=lossy_params, fidelity=0.8)
        statistics = run_trials(spec, seed=31, trials=3_000)
        assert statistics.within_sigma("kept", kept, n_sigma=3.0)

    def test_fidelity_and_physicality(self, ideal_params):
        rho, kept = propagate_purification_density(0.8, ideal_params)
        assert is_physical(rho)
        assert rho.trace == pytest.approx(1.0)
        assert fidelity_rho(rho, target_state()) == pytest.approx(purification_fidelity_map(0.8), abs=FIDELITY_ATOL)
        assert kept == pytest.approx(0.68, abs=1e-12)


class TestCoincidenceTable:
    def test_every_case_fires_expected_pairs(self):
        table = purification_coincidence_table()
        assert set(table) == set(INPUT_CASES)
        assert table["phi+phi+"] == KEPT_COINCIDENCES
        assert table["psi+psi+"] == KEPT_COINCIDENCES
        assert table["phi+psi+"] == DISCARDED_COINCIDENCES
        assert table["psi+phi+"] == DISCARDED_COINCIDENCES

    def test_table_is_parameter_independent(self, lossy_params):
        assert purification_coincidence_table(lossy_params) == purification_coincidence_table()

    def test_detuned_lossy_table_matches_parity_rule(self, lossy_params):
        """P = 20，Δ = 0.07 时数值残差不会多出符合计数"""
        table = purification_coincidence_table(lossy_params)
        assert table["phi+phi+"] == KEPT_COINCIDENCES
        assert table["psi+psi+"] == KEPT_COINCIDENCES
        assert table["phi+psi+"] == DISCARDED_COINCIDENCES
        assert table["psi+phi+"] == DISCARDED_COINCIDENCES

    def test_detuned_lossy_results_have_no_residue(self, lossy_params):
        report = enumerate_purification(0.8, lossy_params)
        expected = {
            "phi+phi+": KEPT_COINCIDENCES,
            "psi+psi+": KEPT_COINCIDENCES,
            "phi+psi+": DISCARDED_COINCIDENCES,
            "psi+phi+": DISCARDED_COINCIDENCES,
        }
        fired = [r for r in report.results if r.coincidence is not None]
        assert fired
        for result in fired:
            assert result.input_case is not None
            assert result.coincidence in expected[result.input_case]
            assert result.probability > 1e-9

    def test_results_follow_keep_rule(self, platform_params):
        for result in enumerate_purification(0.8, platform_params).results:
            if result.coincidence is None:
                continue
            assert result.kept == (result.coincidence in KEPT_COINCIDENCES)
            if result.kept:
                assert result.correction in (PauliWord.I, PauliWord.Z)
                assert result.final_state is not None
            else:
                assert result.final_state is None


def test_iterate_fidelity():
    values = iterate_fidelity(0.7, 3)
    assert len(values) == 4
    assert values[1] == pytest.approx(purification_fidelity_map(0.7))
    assert values == sorted(values)
    with pytest.raises(ParameterError):
        iterate_fidelity(0.7, -1)


class TestSampling:
    def test_kept_outputs_are_pure_bell_states(self, ideal_params):
        rng = np.random.default_rng(21)
        for _ in range(30):
            result = sample_purification(0.8, ideal_params, rng)
            if result.kept:
                assert result.output_fidelity is not None
                assert min(result.output_fidelity, 1.0 - result.output_fidelity) < 1e-10
            else:
                assert result.output_fidelity is None

    def test_statistics(self, lossy_params):
        statistics = run_purification(0.8, lossy_params, evaluation=EvaluationMode.SAMPLE, seed=5, trials=60)
        assert isinstance(statistics, PurificationStatistics)
        assert statistics.trials == 60
        assert sum(statistics.counts.values()) == 60
        summary = statistics.summary()
        assert summary.mode == EvaluationMode.SAMPLE
        assert summary.extra["F_in"] == 0.8

    def test_sample_needs_seed(self, ideal_params):
        with pytest.raises(ParameterError):
            run_purification(0.8, ideal_params, evaluation=EvaluationMode.SAMPLE)


def test_summary(platform_params):
    summary = enumerate_purification(0.8, platform_params).summary()
    assert summary.protocol == "purify"
    assert summary.extra["F_expected"] == pytest.approx(purification_fidelity_map(0.8))
    assert summary.extra["F_out"] == pytest.approx(summary.extra["F_expected"], abs=FIDELITY_ATOL)
