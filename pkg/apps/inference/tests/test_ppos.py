import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from apps.core.domain import EffectStream, Verdict
from apps.core.exceptions import EmptyStream, HorizonMismatch, InvalidConfig
from apps.inference.model import ModelConfig, PredictiveMode, ProperPrior, final_success
from apps.inference.ppos import (
    CHUNK_SIZE,
    PposConfig,
    PposMethod,
    PposResult,
    ppos_closed_form,
    ppos_closed_form_batch,
    ppos_decision,
    ppos_estimate,
    ppos_monte_carlo,
)


def mc_bound(p, draws):
    # 4 standard errors plus one draw of resolution
    return 4 * math.sqrt(p * (1 - p) / draws) + 1 / draws


class TestClosedForm:
    def test_half_horizon_null_equals_alpha(self, null_stream, model_config):
        result = ppos_closed_form(null_stream, model_config)
        assert result.estimate == pytest.approx(0.05, abs=1e-10)
        assert result.mc_std_error == 0.0
        assert result.method == PposMethod.CLOSED_FORM

    def test_additive_variance_mode(self, null_stream):
        config = ModelConfig(predictive_mode=PredictiveMode.ADDITIVE_VARIANCE)
        estimate = ppos_closed_form(null_stream, config).estimate
        boundary = norm.isf(0.05) / math.sqrt(14)
        spread = math.sqrt(1 / 14 + 1 / 7)
        assert estimate == pytest.approx(norm.cdf(-0.43962 / 0.46291), abs=1e-4)
        mass, _ = quad(lambda x: norm.pdf(x, 0.0, spread), boundary, np.inf)
        assert estimate == pytest.approx(mass, abs=1e-9)

    def test_alpha_override(self, null_stream, model_config):
        assert ppos_closed_form(null_stream, model_config, alpha=0.1).estimate == pytest.approx(0.1, abs=1e-10)

    def test_strictly_increasing_in_interim_mean(self, model_config):
        values = [ppos_closed_form(EffectStream((m,) * 7, 1.0), model_config).estimate
                  for m in np.linspace(-1, 1, 21)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_decreasing_in_success_threshold(self):
        stream = EffectStream((0.2,) * 7, 1.0)
        loose = ppos_closed_form(stream, ModelConfig(alpha=0.1)).estimate
        strict = ppos_closed_form(stream, ModelConfig(alpha=0.01)).estimate
        assert strict < loose

    def test_scale_invariance(self, model_config):
        stream = EffectStream((0.3, -0.2, 0.5, 0.1, 0.0, 0.4, 0.2), 1.3)
        base = ppos_closed_form(stream, model_config).estimate
        assert ppos_closed_form(stream.scaled(2.0), model_config).estimate == base
        assert ppos_closed_form(stream.scaled(3.7), model_config).estimate == pytest.approx(base, rel=1e-9)

    def test_batch_matches_scalar(self, model_config):
        generator = np.random.default_rng(5)
        prefixes = generator.normal(0.1, 1.0, (40, 7))
        sigmas = generator.uniform(0.5, 2.0, 40)
        batch = ppos_closed_form_batch(prefixes.sum(axis=1), 7, sigmas, model_config)
        for row, sigma, value in zip(prefixes, sigmas, batch):
            scalar = ppos_closed_form(EffectStream(tuple(row), sigma), model_config).estimate
            assert value == pytest.approx(scalar, rel=1e-9, abs=1e-12)

    def test_proper_prior_batch_matches_scalar(self):
        config = ModelConfig(prior=ProperPrior(0.1, 0.05))
        stream = EffectStream((0.4, 0.1, -0.3, 0.2, 0.6), 1.0)
        batch = ppos_closed_form_batch([stream.total], 5, [1.0], config)
        assert batch[0] == pytest.approx(ppos_closed_form(stream, config).estimate, rel=1e-12)


class TestMonteCarlo:
    def test_half_horizon_null(self, null_stream, model_config):
        result = ppos_monte_carlo(null_stream, model_config, PposConfig(mc_draws=1_000_000, seed=3))
        assert abs(result.estimate - 0.05) <= 4 * result.mc_std_error
        assert result.draws_used == 1_000_000

    def test_overwhelming_effect(self, model_config):
        stream = EffectStream((10.0,) * 3, 1.0)
        assert ppos_monte_carlo(stream, model_config, PposConfig()).estimate >= 0.999

    def test_bit_identical_replay(self, model_config):
        stream = EffectStream((0.2, -0.1, 0.3, 0.0, 0.1, 0.2, 0.05), 1.0)
        pcfg = PposConfig(mc_draws=CHUNK_SIZE + 123, seed=99)
        assert ppos_monte_carlo(stream, model_config, pcfg) == ppos_monte_carlo(stream, model_config, pcfg)

    def test_agrees_with_closed_form(self):
        generator = np.random.default_rng(2024)
        for case in range(50):
            observed = int(generator.choice([3, 7, 10]))
            horizon = int(generator.choice([14, 28]))
            sigma = float(generator.uniform(0.5, 2.0))
            target = float(generator.uniform(-3, 3)) * sigma
            noise = generator.normal(0.0, sigma, observed)
            stream = EffectStream(tuple(noise - noise.mean() + target), sigma)
            config = ModelConfig(horizon=horizon)
            exact = ppos_closed_form(stream, config).estimate
            simulated = ppos_monte_carlo(stream, config, PposConfig(mc_draws=100_000, seed=case)).estimate
            assert abs(simulated - exact) <= mc_bound(exact, 100_000), (case, observed, horizon, target)

    def test_long_remaining_horizon(self):
        stream = EffectStream((0.02, -0.01, 0.03, 0.0, 0.01, 0.02, 0.005), 1.0)
        config = ModelConfig(horizon=5_000_000)
        exact = ppos_closed_form(stream, config).estimate
        simulated = ppos_monte_carlo(stream, config, PposConfig(mc_draws=2 * CHUNK_SIZE, seed=4)).estimate
        assert abs(simulated - exact) <= mc_bound(exact, 2 * CHUNK_SIZE)

    def test_scale_invariance_exact_for_power_of_two(self, model_config):
        stream = EffectStream((0.1, 0.3, -0.2, 0.25, 0.0, 0.1, 0.4), 1.0)
        pcfg = PposConfig(mc_draws=20_000, seed=8)
        assert ppos_monte_carlo(stream.scaled(2.0), model_config, pcfg).estimate == \
            ppos_monte_carlo(stream, model_config, pcfg).estimate


class TestTerminal:
    def test_equals_final_success(self, model_config):
        generator = np.random.default_rng(17)
        pcfg = PposConfig(mc_draws=10)
        for _ in range(1000):
            stream = EffectStream(tuple(generator.normal(0.4, 1.0, 14)), 1.0)
            expected = float(final_success(stream, model_config))
            closed = ppos_closed_form(stream, model_config)
            simulated = ppos_monte_carlo(stream, model_config, pcfg)
            assert closed.estimate == expected
            assert simulated.estimate == expected
            assert simulated.draws_used == 0

    def test_beyond_horizon(self, model_config):
        with pytest.raises(HorizonMismatch):
            ppos_closed_form(EffectStream((0.0,) * 15, 1.0), model_config)

    def test_empty(self, model_config):
        with pytest.raises(EmptyStream):
            ppos_monte_carlo(EffectStream((), 1.0), model_config, PposConfig())


def test_estimate_dispatches_on_method(null_stream, model_config):
    closed = ppos_estimate(null_stream, model_config, PposConfig(method='closed_form'))
    assert closed.method == PposMethod.CLOSED_FORM
    simulated = ppos_estimate(null_stream, model_config, PposConfig(mc_draws=500))
    assert simulated.method == PposMethod.MONTE_CARLO


@pytest.mark.parametrize('estimate, verdict', [
    (0.05, Verdict.STOP_FAILURE),
    (0.95, Verdict.STOP_SUCCESS),
    (0.9, Verdict.CONTINUE),
    (0.1, Verdict.CONTINUE),
    (0.5, Verdict.CONTINUE),
])
def test_decision_thresholds(estimate, verdict):
    decision = ppos_decision(PposResult(estimate, 0.0, PposMethod.CLOSED_FORM, 0), PposConfig())
    assert decision.verdict == verdict
    assert decision.statistic == estimate
    assert decision.rule_name == 'ppos'


@pytest.mark.parametrize('kwargs', [
    {'gamma_success': 0.1, 'gamma_failure': 0.9},
    {'mc_draws': 0},
    {'seed': -1},
    {'method': 'importance'},
])
def test_config_rejects(kwargs):
    with pytest.raises(InvalidConfig):
        PposConfig(**kwargs)
