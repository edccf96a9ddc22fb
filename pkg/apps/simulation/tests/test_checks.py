import math

import numpy as np
import pytest

from apps.core.domain import EffectStream, GaussianDist
from apps.core.exceptions import HorizonMismatch, InvalidComparison, InvalidConfig
from apps.inference.model import ModelConfig
from apps.inference.rules import RuleName
from apps.simulation.checks import (
    CheckBundle,
    CheckStatistic,
    CheckStatisticName,
    Direction,
    ObservedCorpus,
    _tail,
    compute_statistic,
    discrepancy,
    reference_check,
    replicate_corpus,
    statistic_values,
)

HORIZON = 14


def observed_corpus(thetas, seed, sigma=1.0):
    generator = np.random.default_rng(seed)
    thetas = np.asarray(thetas, dtype=float)
    estimates = thetas[:, np.newaxis] + sigma * generator.standard_normal((len(thetas), HORIZON))
    ids = tuple(f"exp-{i:05d}" for i in range(len(thetas)))
    return ObservedCorpus(ids, estimates, np.full(len(thetas), sigma))


@pytest.fixture
def null_corpus():
    return observed_corpus(np.zeros(20), seed=11)


class TestDiscrepancy:
    def test_absolute_and_signed(self):
        replicated = CheckStatistic(CheckStatisticName.AGREEMENT, 0.75)
        observed = CheckStatistic(CheckStatisticName.AGREEMENT, 0.5)
        assert discrepancy(replicated, observed) == 0.25
        assert discrepancy(observed, replicated, signed=True) == -0.25

    def test_statistics_must_match(self):
        with pytest.raises(InvalidComparison):
            discrepancy(
                CheckStatistic(CheckStatisticName.AGREEMENT, 0.5),
                CheckStatistic(CheckStatisticName.MEAN_STATISTIC, 0.5),
            )


class TestObservedCorpus:
    def test_from_streams_sorts_ids(self):
        streams = {'b': EffectStream((1.0,) * HORIZON, 2.0), 'a': EffectStream((0.0,) * HORIZON, 1.0)}
        corpus = ObservedCorpus.from_streams(streams, HORIZON)
        assert corpus.experiment_ids == ('a', 'b')
        assert corpus.sigmas.tolist() == [1.0, 2.0]
        assert corpus.horizon == HORIZON

    def test_rejects_partial_streams(self):
        with pytest.raises(HorizonMismatch):
            ObservedCorpus.from_streams({'a': EffectStream((0.0,) * 7, 1.0)}, HORIZON)

    def test_rejects_empty(self):
        with pytest.raises(InvalidConfig):
            ObservedCorpus.from_streams({}, HORIZON)

    def test_flat_prior_fit(self, null_corpus):
        posteriors = null_corpus.fitted_posteriors(ModelConfig())
        assert posteriors[0].mean == pytest.approx(null_corpus.estimates[0].mean())
        assert posteriors[0].variance == pytest.approx(1 / HORIZON)


class TestReplicates:
    def test_shape_and_determinism(self):
        posteriors = [GaussianDist(0.0, 0.1), GaussianDist(1.0, 0.1)]
        first = replicate_corpus(ModelConfig(), posteriors, 1.0, 5, seed=3)
        assert first.shape == (5, 2, HORIZON)
        assert np.array_equal(first, replicate_corpus(ModelConfig(), posteriors, 1.0, 5, seed=3))
        assert not np.array_equal(first, replicate_corpus(ModelConfig(), posteriors, 1.0, 5, seed=4))

    def test_degenerate_posterior_is_constant(self):
        corpora = replicate_corpus(ModelConfig(), [GaussianDist(0.5, 0.0)], 1e-9, 50, seed=0)
        assert np.abs(corpora - 0.5).max() < 1e-6

    def test_centered_on_posterior_means(self):
        means = [-1.0, 0.0, 2.5]
        corpora = replicate_corpus(ModelConfig(), [GaussianDist(m, 0.2) for m in means], 1.0, 4000, seed=8)
        per_replicate = corpora.mean(axis=2)
        tolerance = 4 * math.sqrt((0.2 + 1 / HORIZON) / 4000)
        for index, mean in enumerate(means):
            assert abs(per_replicate[:, index].mean() - mean) < tolerance

    def test_needs_a_replicate(self):
        with pytest.raises(InvalidConfig):
            replicate_corpus(ModelConfig(), [GaussianDist(0.0, 1.0)], 1.0, 0, seed=0)


class TestStatistics:
    @pytest.mark.parametrize('name', list(CheckStatisticName))
    def test_rates_stay_in_bounds(self, name, null_corpus):
        posteriors = null_corpus.fitted_posteriors(ModelConfig())
        corpora = replicate_corpus(ModelConfig(), posteriors, null_corpus.sigmas, 30, seed=1)
        values = statistic_values(name, corpora, null_corpus.sigmas, ModelConfig(), CheckBundle())
        assert values.shape == (30,)
        assert np.all((values >= 0) & (values <= 1))

    def test_agreement_of_a_clear_winner(self):
        corpus = observed_corpus(np.full(10, 10.0), seed=2)
        value = compute_statistic('agreement', corpus, ModelConfig(), CheckBundle()).value
        assert value == 1.0

    def test_bundle_rule_is_used(self, null_corpus):
        heuristic = CheckBundle(rule=RuleName.HEURISTIC)
        ppos = compute_statistic('mean_statistic', null_corpus, ModelConfig(), CheckBundle())
        lower_bound = compute_statistic('mean_statistic', null_corpus, ModelConfig(), heuristic)
        assert lower_bound.value < 0 < ppos.value

    def test_unknown_statistic_lists_names(self, null_corpus):
        with pytest.raises(InvalidConfig) as excinfo:
            reference_check(null_corpus, ModelConfig(), 'median_lift', 10, seed=0)
        for name in CheckStatisticName.values:
            assert name in str(excinfo.value)


class TestTail:
    def test_ties_count_as_extreme(self):
        samples = np.array([0.1, 0.2, 0.2, 0.4])
        assert _tail(samples, 0.2, Direction.TWO_SIDED) == 0.75
        assert _tail(samples, 0.2, Direction.LESS) == 0.75

    @pytest.mark.parametrize('direction', list(Direction))
    def test_invariant_under_monotone_transforms(self, direction):
        samples = np.random.default_rng(6).normal(size=200)
        observed = 0.37
        expected = _tail(samples, observed, direction)
        assert _tail(3.0 * samples + 1.0, 3.0 * observed + 1.0, direction) == expected
        assert _tail(np.exp(samples), math.exp(observed), direction) == expected


class TestReferenceCheck:
    def test_single_replicate(self, null_corpus):
        result = reference_check(null_corpus, ModelConfig(), 'mean_statistic', 1, seed=0)
        assert result.replicates == 1
        assert result.tail_probability in (0.0, 1.0)

    def test_deterministic(self, null_corpus):
        first = reference_check(null_corpus, ModelConfig(), 'agreement', 40, seed=5)
        second = reference_check(null_corpus, ModelConfig(), 'agreement', 40, seed=5)
        assert first == second
        assert first.to_report()['replicates'] == 40

    def test_one_sided_tails_complement(self, null_corpus):
        greater = reference_check(null_corpus, ModelConfig(), 'mean_statistic', 100, seed=2,
                                  direction=Direction.GREATER)
        less = reference_check(null_corpus, ModelConfig(), 'mean_statistic', 100, seed=2, direction='less')
        assert greater.observed_discrepancy == less.observed_discrepancy == 0.0
        assert greater.tail_probability + less.tail_probability == pytest.approx(1.0)

    def test_unknown_direction(self, null_corpus):
        with pytest.raises(InvalidConfig):
            reference_check(null_corpus, ModelConfig(), 'agreement', 10, seed=0, direction='sideways')

    def test_horizon_must_match(self, null_corpus):
        with pytest.raises(HorizonMismatch):
            reference_check(null_corpus, ModelConfig(horizon=20), 'agreement', 10, seed=0)

    def test_reference_posteriors_cover_every_experiment(self, null_corpus):
        with pytest.raises(InvalidConfig):
            reference_check(null_corpus, ModelConfig(), 'agreement', 10, seed=0,
                            posteriors=[GaussianDist(0.0, 1.0)])

    def test_detects_shift_against_null_reference(self, null_corpus):
        model = ModelConfig()
        reference = null_corpus.fitted_posteriors(model)
        shifted = ObservedCorpus(null_corpus.experiment_ids, null_corpus.estimates + 10.0, null_corpus.sigmas)
        result = reference_check(shifted, model, CheckStatisticName.STOP_SUCCESS_RATE, 200, seed=1,
                                 posteriors=reference)
        assert result.observed == 1.0
        assert result.tail_probability < 0.01

    @pytest.mark.slow
    def test_calibrated_when_model_is_right(self):
        # effects on the scale of one full-horizon standard error, PPoS rule decided in closed form
        sigma = 1.0
        model = ModelConfig()
        bundle = CheckBundle()
        generator = np.random.default_rng(2024)
        small = 0
        trials = 400
        for trial in range(trials):
            thetas = generator.normal(0.0, math.sqrt(sigma ** 2 / HORIZON), 20)
            corpus = observed_corpus(thetas, seed=trial, sigma=sigma)
            result = reference_check(corpus, model, CheckStatisticName.AGREEMENT, 500, seed=trial, bundle=bundle)
            small += result.tail_probability < 0.05
        assert 0.01 <= small / trials <= 0.12
