"""
Monte Carlo 试验测试
"""

from collections import defaultdict

import pytest
from pydantic import ValidationError

from src.core.exceptions import ParameterError
from src.core.models import EmitterParams, EvaluationMode, NoiseParams
from src.services.creation import run_creation
from src.services.purification import run_purification
from src.services.swapping import run_swapping
from src.services.trials import (
    TrialRecord,
    TrialSpec,
    aggregate,
    binomial_sigma,
    run_trials,
    sample_trial,
    within_binomial_error,
)

LARGE_TRIALS = 100_000


def enumerated_outcomes(spec: TrialSpec) -> dict[str, float]:
    """枚举模式下每个结果名的精确概率"""
    if spec.protocol == "creation":
        report = run_creation(spec.params, spec.noise, spec.wavepacket(), wfc=spec.wfc)
    elif spec.protocol == "swap":
        report = run_swapping(spec.params)
    else:
        assert spec.fidelity is not None
        report = run_purification(spec.fidelity, spec.params)
    probabilities: dict[str, float] = defaultdict(float)
    for result in report.results:  # type: ignore[union-attr]
        probabilities[result.herald] += result.probability
    return dict(probabilities)


def assert_consistent(spec: TrialSpec, trials: int, seed: int, workers: int = 1) -> None:
    statistics = run_trials(spec, seed=seed, trials=trials, workers=workers)
    expected = enumerated_outcomes(spec)
    assert set(statistics.counts) <= set(expected)
    for outcome, probability in expected.items():
        assert statistics.within_sigma(outcome, probability), (outcome, statistics.count(outcome), probability)


SPECS = {
    "creation": TrialSpec(protocol="creation", params=EmitterParams(purcell=20.0, detuning=0.07)),
    "creation-noise": TrialSpec(
        protocol="creation",
        params=EmitterParams(purcell=20.0, detuning=0.07),
        noise=NoiseParams(gamma=0.6, delta=0.8j),
    ),
    "swap": TrialSpec(protocol="swap", params=EmitterParams(purcell=5.0, detuning=0.1)),
    "purify": TrialSpec(protocol="purify", params=EmitterParams(purcell=20.0), fidelity=0.8),
}


@pytest.mark.parametrize("name", sorted(SPECS))
def test_frequencies_match_enumeration(name):
    assert_consistent(SPECS[name], trials=2_000, seed=17)


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(SPECS))
def test_large_run_matches_enumeration(name):
    assert_consistent(SPECS[name], trials=LARGE_TRIALS, seed=2024, workers=4)


class TestReproducibility:
    def test_same_seed_same_records(self):
        spec = SPECS["creation-noise"]
        first = run_trials(spec, seed=9, trials=300)
        second = run_trials(spec, seed=9, trials=300)
        assert first.records == second.records
        assert first.counts == second.counts
        assert first.fidelity_sum == second.fidelity_sum

    def test_different_seed_differs(self):
        spec = SPECS["swap"]
        first = run_trials(spec, seed=1, trials=300)
        second = run_trials(spec, seed=2, trials=300)
        assert first.records != second.records

    def test_parallel_equals_serial(self):
        spec = SPECS["purify"]
        serial = run_trials(spec, seed=4, trials=400, workers=1, chunk_size=50)
        parallel = run_trials(spec, seed=4, trials=400, workers=2, chunk_size=50)
        assert serial.records == parallel.records
        assert serial.counts == parallel.counts
        assert serial.fidelity_sum == parallel.fidelity_sum

    def test_chunking_does_not_matter(self):
        spec = SPECS["creation"]
        whole = run_trials(spec, seed=8, trials=120, chunk_size=120)
        pieces = run_trials(spec, seed=8, trials=120, chunk_size=7)
        assert whole.records == pieces.records

    def test_trial_is_independent_of_position(self):
        spec = SPECS["swap"]
        statistics = run_trials(spec, seed=3, trials=50)
        assert statistics.records[37] == sample_trial(spec, 37, 3)


def test_aggregate_sorts_by_index():
    records = [TrialRecord(2, "D1", 1.0), TrialRecord(0, "loss"), TrialRecord(1, "D1", 0.5)]
    statistics = aggregate("swap", 0, records)
    assert [r.index for r in statistics.records] == [0, 1, 2]
    assert statistics.counts == {"D1": 2, "loss": 1}
    assert statistics.success_count == 2
    assert statistics.mean_fidelity == pytest.approx(0.75)
    summary = statistics.summary()
    assert summary.mode == EvaluationMode.SAMPLE
    assert summary.success_probability == pytest.approx(2 / 3)
    assert summary.extra["count_loss"] == 1.0


class TestBinomial:
    def test_sigma(self):
        assert binomial_sigma(0.5, 100) == pytest.approx(0.05)
        with pytest.raises(ParameterError):
            binomial_sigma(0.5, 0)

    def test_within_error(self):
        assert within_binomial_error(520, 1000, 0.5)
        assert not within_binomial_error(700, 1000, 0.5)

    def test_degenerate_probability_needs_exact_match(self):
        assert within_binomial_error(0, 1000, 0.0)
        assert not within_binomial_error(1, 1000, 0.0)
        assert within_binomial_error(1000, 1000, 1.0)


class TestTrialSpec:
    def test_purify_needs_fidelity(self):
        with pytest.raises(ValidationError):
            TrialSpec(protocol="purify", params=EmitterParams(purcell=10.0))

    def test_rejects_bad_fidelity(self):
        with pytest.raises((ValidationError, ParameterError)):
            TrialSpec(protocol="purify", params=EmitterParams(purcell=10.0), fidelity=1.5)

    def test_unknown_protocol(self):
        with pytest.raises(ValidationError):
            TrialSpec(protocol="teleport", params=EmitterParams(purcell=10.0))  # type: ignore[arg-type]

    def test_wavepacket(self):
        assert SPECS["creation"].wavepacket() is None
        spec = TrialSpec(protocol="creation", params=EmitterParams(purcell=10.0), sigma=0.1, bins=11)
        wavepacket = spec.wavepacket()
        assert wavepacket is not None
        assert len(wavepacket.amplitudes) == 11


@pytest.mark.parametrize("trials,seed", [(0, 1), (10, -1)])
def test_run_trials_rejects_bad_arguments(trials, seed):
    with pytest.raises(ParameterError):
        run_trials(SPECS["swap"], seed=seed, trials=trials)
