"""
Predictive probability of success (PPoS) at an interim look.

Two estimators are provided: a seeded Monte-Carlo simulation of the remaining
periods and the closed form available in the conjugate Gaussian model. Both
return 1[final success] once the stream already covers the horizon.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from django.db import models
from scipy.stats import norm

from apps.core import rng
from apps.core.domain import Decision, EffectStream, Verdict
from apps.core.exceptions import EmptyStream, HorizonMismatch, InvalidConfig

from .model import (
    FlatPrior,
    ModelConfig,
    PredictiveMode,
    final_success,
    posterior,
    posterior_from_sum,
    predictive_end_state,
    success_boundary,
    success_from_totals,
)

logger = logging.getLogger(__name__)

# Replicates are drawn in chunks; chunk c owns replicates [c * CHUNK_SIZE, (c + 1) * CHUNK_SIZE).
CHUNK_SIZE = 65536

RULE_NAME = 'ppos'


class PposMethod(models.TextChoices):
    MONTE_CARLO = 'monte_carlo', 'Monte-Carlo simulation'
    CLOSED_FORM = 'closed_form', 'Closed form'


@dataclass(frozen=True)
class PposConfig:
    gamma_success: float = 0.9
    gamma_failure: float = 0.1
    mc_draws: int = 10000
    seed: int = 0
    method: PposMethod = PposMethod.MONTE_CARLO

    def __post_init__(self):
        if not 0 <= self.gamma_failure < self.gamma_success <= 1:
            raise InvalidConfig(
                f"need 0 <= gamma_failure < gamma_success <= 1, "
                f"got {self.gamma_failure} and {self.gamma_success}"
            )
        if isinstance(self.mc_draws, bool) or int(self.mc_draws) != self.mc_draws or self.mc_draws < 1:
            raise InvalidConfig(f"mc_draws must be a positive integer, got {self.mc_draws}")
        rng.validate_seed(self.seed)
        try:
            object.__setattr__(self, 'method', PposMethod(self.method))
        except ValueError:
            raise InvalidConfig(f"unknown PPoS method {self.method!r}") from None
        object.__setattr__(self, 'mc_draws', int(self.mc_draws))

    def to_dict(self) -> dict:
        data = asdict(self)
        data['method'] = str(self.method)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> PposConfig:
        return cls(**{key: data[key] for key in ('gamma_success', 'gamma_failure', 'mc_draws', 'seed', 'method') if key in data})


@dataclass(frozen=True)
class PposResult:
    estimate: float
    mc_std_error: float
    method: PposMethod
    draws_used: int


def _check_interim(stream: EffectStream, config: ModelConfig):
    if stream.n == 0:
        raise EmptyStream("PPoS needs at least one observed period")
    if stream.n > config.horizon:
        raise HorizonMismatch(f"stream covers {stream.n} periods, horizon is {config.horizon}")


def _terminal(stream: EffectStream, config: ModelConfig, method: PposMethod) -> PposResult:
    return PposResult(float(final_success(stream, config)), 0.0, method, 0)


def ppos_monte_carlo(stream: EffectStream, config: ModelConfig, pcfg: PposConfig) -> PposResult:
    """
    For each replicate: draw theta from the interim posterior, draw the total of
    the remaining r periods (i.i.d. N(theta, sigma^2), so the total is exactly
    N(r theta, r sigma^2)), and evaluate the final success criterion on the
    completed stream. The completed-stream posterior is exact, so no inner
    sampling is needed, and a chunk holds O(CHUNK_SIZE) doubles whatever r is.
    """
    _check_interim(stream, config)
    if stream.n == config.horizon:
        return _terminal(stream, config, PposMethod.MONTE_CARLO)

    interim = posterior(stream, config)
    remaining = config.horizon - stream.n
    observed_total = stream.total
    theta_sd = math.sqrt(interim.variance)
    future_sd = stream.sigma * math.sqrt(remaining)

    draws = pcfg.mc_draws
    successes = 0
    for chunk, start in enumerate(range(0, draws, CHUNK_SIZE)):
        size = min(CHUNK_SIZE, draws - start)
        generator = rng.substream(pcfg.seed, rng.PPOS_MC, chunk)
        theta = interim.mean + theta_sd * generator.standard_normal(size)
        future_total = remaining * theta + future_sd * generator.standard_normal(size)
        totals = observed_total + future_total
        successes += int(np.count_nonzero(success_from_totals(totals, stream.sigma, config)))

    estimate = successes / draws
    std_error = math.sqrt(estimate * (1.0 - estimate) / draws)
    logger.debug("[PPOS] monte_carlo K=%s estimate=%.6f se=%.6f", draws, estimate, std_error)
    return PposResult(estimate, std_error, PposMethod.MONTE_CARLO, draws)


def ppos_closed_form(stream: EffectStream, config: ModelConfig, alpha: float | None = None) -> PposResult:
    """
    Phi((m - b) / s): m and s are the mean and standard deviation of the
    end-of-experiment mean under the configured predictive mode, b the success
    boundary on that mean (z_{1-alpha} sigma / sqrt(T) under the flat prior).
    """
    config = config.with_alpha(alpha)
    _check_interim(stream, config)
    if stream.n == config.horizon:
        return _terminal(stream, config, PposMethod.CLOSED_FORM)

    end_state = predictive_end_state(stream, config)
    boundary = float(success_boundary(stream.sigma, config))
    if end_state.variance == 0:
        estimate = 1.0 if end_state.mean > boundary else 0.0
    else:
        estimate = float(norm.cdf((end_state.mean - boundary) / end_state.sd))
    logger.debug("[PPOS] closed_form estimate=%.6f", estimate)
    return PposResult(estimate, 0.0, PposMethod.CLOSED_FORM, 0)


def ppos_closed_form_batch(totals, observed: int, sigmas, config: ModelConfig):
    """
    Closed-form PPoS for many interim streams of equal length, given their totals.
    Mirrors ppos_closed_form element-wise.
    """
    totals = np.asarray(totals, dtype=float)
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), totals.shape)
    if observed < 1:
        raise EmptyStream("PPoS needs at least one observed period")
    if observed > config.horizon:
        raise HorizonMismatch(f"streams cover {observed} periods, horizon is {config.horizon}")
    if observed == config.horizon:
        return success_from_totals(totals, sigmas, config).astype(float)

    horizon = config.horizon
    remaining = horizon - observed
    mean, variance = posterior_from_sum(totals, observed, sigmas, config.prior)
    sigma2 = sigmas * sigmas
    if config.predictive_mode == PredictiveMode.ADDITIVE_VARIANCE:
        end_mean, end_variance = mean, sigma2 / horizon + variance
    else:
        end_mean = mean if isinstance(config.prior, FlatPrior) else (totals + remaining * mean) / horizon
        end_variance = (remaining / horizon) ** 2 * (variance + sigma2 / remaining)
    boundary = success_boundary(sigmas, config)
    with np.errstate(divide='ignore', invalid='ignore'):
        smooth = norm.cdf((end_mean - boundary) / np.sqrt(end_variance))
    return np.where(end_variance > 0, smooth, (end_mean > boundary).astype(float))


def ppos_estimate(stream: EffectStream, config: ModelConfig, pcfg: PposConfig) -> PposResult:
    if pcfg.method == PposMethod.CLOSED_FORM:
        return ppos_closed_form(stream, config)
    return ppos_monte_carlo(stream, config, pcfg)


def verdict_for(estimate: float, pcfg: PposConfig) -> Verdict:
    # boundary values continue
    if estimate < pcfg.gamma_failure:
        return Verdict.STOP_FAILURE
    if estimate > pcfg.gamma_success:
        return Verdict.STOP_SUCCESS
    return Verdict.CONTINUE


def ppos_decision(result: PposResult, pcfg: PposConfig) -> Decision:
    return Decision(verdict_for(result.estimate, pcfg), RULE_NAME, result.estimate)
