"""
Predictive checking of the model and decision-rule configuration.

Replicated corpora are drawn from each experiment's fitted posterior, a corpus
statistic is computed on the observed and on every replicated corpus, and the
observed discrepancy is located within the replicated ones. The resulting tail
probability is rank based, so any strictly monotone transform of the
discrepancies leaves it unchanged.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from django.db import models
from scipy.stats import norm

from apps.core import rng
from apps.core.domain import EffectStream, GaussianDist
from apps.core.exceptions import HorizonMismatch, InvalidComparison, InvalidConfig
from apps.inference.model import ModelConfig, posterior_from_sum
from apps.inference.ppos import PposConfig, PposMethod
from apps.inference.rules import (
    FAILURE_CODE,
    SUCCESS_CODE,
    RuleName,
    RuleSpec,
    evaluate_rule_batch,
)

from .corpus import POSITIVE_CODE, outcome_codes

logger = logging.getLogger(__name__)


class CheckStatisticName(models.TextChoices):
    AGREEMENT = 'agreement', 'Interim/final agreement rate'
    STOP_SUCCESS_RATE = 'stop_success_rate', 'Stop-as-success rate'
    MEAN_STATISTIC = 'mean_statistic', 'Mean decision statistic'
    INTERVAL_COVERAGE = 'interval_coverage', 'Interim interval coverage of the final mean'


class Direction(models.TextChoices):
    TWO_SIDED = 'two_sided', 'Two-sided'
    GREATER = 'greater', 'Replicates at least as large'
    LESS = 'less', 'Replicates at most as large'


def statistic_name(name) -> CheckStatisticName:
    try:
        return CheckStatisticName(name)
    except ValueError:
        raise InvalidConfig(
            f"unknown statistic {name!r}; available: {', '.join(CheckStatisticName.values)}"
        ) from None


@dataclass(frozen=True)
class CheckStatistic:
    name: CheckStatisticName
    value: float


@dataclass(frozen=True)
class CheckBundle:
    """
    The decision configuration a decision-dependent statistic is computed under.
    It is part of the checked model: replicates are decided with the same rule.
    """
    rule: RuleSpec = field(default_factory=lambda: RuleSpec(RuleName.PPOS))
    ppos: PposConfig = field(default_factory=lambda: PposConfig(method=PposMethod.CLOSED_FORM))
    interim_day: int = 7
    interval_level: float = 0.90

    def __post_init__(self):
        if not isinstance(self.rule, RuleSpec):
            object.__setattr__(self, 'rule', RuleSpec(self.rule))
        if int(self.interim_day) != self.interim_day or self.interim_day < 1:
            raise InvalidConfig(f"interim day must be >= 1, got {self.interim_day}")
        if not 0 < self.interval_level < 1:
            raise InvalidConfig(f"interval level must lie in (0, 1), got {self.interval_level}")

    def to_dict(self) -> dict:
        return {
            'rule': self.rule.to_dict(),
            'ppos': self.ppos.to_dict(),
            'interim_day': self.interim_day,
            'interval_level': self.interval_level,
        }


@dataclass(frozen=True)
class ObservedCorpus:
    """Full-horizon observed streams, in experiment-id order."""
    experiment_ids: tuple[str, ...]
    estimates: np.ndarray
    sigmas: np.ndarray

    @classmethod
    def from_streams(cls, streams: Mapping[str, EffectStream], horizon: int) -> ObservedCorpus:
        if not streams:
            raise InvalidConfig("observed corpus has no experiments")
        ids = tuple(sorted(streams))
        for experiment_id in ids:
            if streams[experiment_id].n != horizon:
                raise HorizonMismatch(
                    f"{experiment_id} covers {streams[experiment_id].n} periods, horizon is {horizon}"
                )
        estimates = np.array([streams[i].estimates for i in ids], dtype=float)
        sigmas = np.array([streams[i].sigma for i in ids], dtype=float)
        return cls(ids, estimates, sigmas)

    @property
    def horizon(self) -> int:
        return self.estimates.shape[1]

    def fitted_posteriors(self, model: ModelConfig) -> list[GaussianDist]:
        means, variances = posterior_from_sum(self.estimates.sum(axis=1), self.horizon, self.sigmas, model.prior)
        return [GaussianDist(m, v) for m, v in np.broadcast(means, variances)]


@dataclass(frozen=True)
class ReferenceDistribution:
    statistic: CheckStatisticName
    direction: Direction
    observed: float
    samples: tuple[float, ...]
    observed_discrepancy: float
    tail_probability: float

    @property
    def replicates(self) -> int:
        return len(self.samples)

    def to_report(self) -> dict:
        return {
            'statistic': str(self.statistic),
            'observed': self.observed,
            'replicates': self.replicates,
            'tail_probability': self.tail_probability,
            'direction': str(self.direction),
            'observed_discrepancy': self.observed_discrepancy,
        }


def replicate_corpus(model: ModelConfig, posteriors: Sequence[GaussianDist], sigmas, replicates: int, seed: int):
    """
    Array of shape (R, m, T): per replicate and experiment, theta from the
    experiment's posterior, then T estimates from N(theta, sigma^2).
    """
    if isinstance(replicates, bool) or int(replicates) != replicates or replicates < 1:
        raise InvalidConfig(f"replicate count must be >= 1, got {replicates}")
    rng.validate_seed(seed)
    means = np.array([p.mean for p in posteriors], dtype=float)
    sds = np.sqrt(np.array([p.variance for p in posteriors], dtype=float))
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), means.shape)
    count, horizon = len(means), model.horizon

    corpora = np.empty((int(replicates), count, horizon))
    for r in range(int(replicates)):
        generator = rng.substream(seed, rng.REPLICATE, r)
        theta = means + sds * generator.standard_normal(count)
        corpora[r] = theta[:, np.newaxis] + sigmas[:, np.newaxis] * generator.standard_normal((count, horizon))
    return corpora


def statistic_values(name, corpora, sigmas, model: ModelConfig, bundle: CheckBundle):
    """The statistic for each corpus in `corpora` (shape (R, m, T)); returns shape (R,)."""
    name = statistic_name(name)
    corpora = np.asarray(corpora, dtype=float)
    replicates, count, horizon = corpora.shape
    if not 1 <= bundle.interim_day < horizon:
        raise InvalidConfig(f"interim day {bundle.interim_day} must come before the horizon {horizon}")
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), (count,))
    rows = corpora.reshape(replicates * count, horizon)
    row_sigmas = np.tile(sigmas, replicates)
    interim = rows[:, :bundle.interim_day]

    if name == CheckStatisticName.INTERVAL_COVERAGE:
        mean, variance = posterior_from_sum(interim.sum(axis=1), bundle.interim_day, row_sigmas, model.prior)
        half_width = float(norm.ppf((1.0 + bundle.interval_level) / 2.0)) * np.sqrt(variance)
        final_mean, _ = posterior_from_sum(rows.sum(axis=1), horizon, row_sigmas, model.prior)
        covered = (mean - half_width <= final_mean) & (final_mean <= mean + half_width)
        return covered.reshape(replicates, count).mean(axis=1)

    codes, statistics = evaluate_rule_batch(bundle.rule, interim, row_sigmas, model, bundle.ppos)
    codes = codes.reshape(replicates, count)
    if name == CheckStatisticName.STOP_SUCCESS_RATE:
        return (codes == SUCCESS_CODE).mean(axis=1)
    if name == CheckStatisticName.MEAN_STATISTIC:
        return np.asarray(statistics, dtype=float).reshape(replicates, count).mean(axis=1)

    outcomes = outcome_codes(rows.sum(axis=1), row_sigmas, model).reshape(replicates, count)
    disagree = ((codes == SUCCESS_CODE) & (outcomes != POSITIVE_CODE)) | \
               ((codes == FAILURE_CODE) & (outcomes == POSITIVE_CODE))
    return 1.0 - disagree.mean(axis=1)


def compute_statistic(name, observed: ObservedCorpus, model: ModelConfig, bundle: CheckBundle) -> CheckStatistic:
    value = statistic_values(name, observed.estimates[np.newaxis], observed.sigmas, model, bundle)[0]
    return CheckStatistic(statistic_name(name), float(value))


def discrepancy(f_rep: CheckStatistic, f_obs: CheckStatistic, signed: bool = False) -> float:
    if f_rep.name != f_obs.name:
        raise InvalidComparison(f"cannot compare {f_rep.name} with {f_obs.name}")
    difference = f_rep.value - f_obs.value
    return difference if signed else abs(difference)


def _tail(samples: np.ndarray, observed: float, direction: Direction) -> float:
    # ties count as extreme
    if direction == Direction.LESS:
        extreme = np.count_nonzero(samples <= observed)
    else:
        extreme = np.count_nonzero(samples >= observed)
    return extreme / len(samples)


def reference_check(
    observed: ObservedCorpus,
    model: ModelConfig,
    statistic,
    replicates: int,
    seed: int,
    bundle: CheckBundle | None = None,
    direction=Direction.TWO_SIDED,
    posteriors: Sequence[GaussianDist] | None = None,
) -> ReferenceDistribution:
    """
    Reference distribution of the discrepancy between replicated and observed
    statistics. Replicates are drawn from `posteriors` when given (a reference
    fit, e.g. on data from a null period), otherwise from each observed
    experiment's own full-horizon posterior under the model prior.

    two_sided: samples |f_rep - mean(f_rep)|, observed |f_obs - mean(f_rep)|,
    tail = share of samples >= observed. greater / less: samples f_rep - f_obs,
    tail = share of samples >= 0 / <= 0.
    """
    name = statistic_name(statistic)
    try:
        direction = Direction(direction)
    except ValueError:
        raise InvalidConfig(f"unknown direction {direction!r}; available: {', '.join(Direction.values)}") from None
    bundle = bundle or CheckBundle()
    if observed.horizon != model.horizon:
        raise HorizonMismatch(f"observed streams cover {observed.horizon} periods, horizon is {model.horizon}")
    if posteriors is None:
        posteriors = observed.fitted_posteriors(model)
    elif len(posteriors) != len(observed.experiment_ids):
        raise InvalidConfig(
            f"{len(posteriors)} reference posteriors for {len(observed.experiment_ids)} experiments"
        )

    f_obs = compute_statistic(name, observed, model, bundle)
    corpora = replicate_corpus(model, posteriors, observed.sigmas, replicates, seed)
    f_rep = statistic_values(name, corpora, observed.sigmas, model, bundle)

    if direction == Direction.TWO_SIDED:
        center = math.fsum(f_rep) / len(f_rep)
        samples = np.abs(f_rep - center)
        observed_discrepancy = abs(f_obs.value - center)
    else:
        samples = np.asarray([
            discrepancy(CheckStatistic(name, float(value)), f_obs, signed=True) for value in f_rep
        ])
        observed_discrepancy = 0.0
    tail = _tail(samples, observed_discrepancy, direction)

    logger.info("[CHECK] statistic=%s R=%s observed=%.6f tail=%.4f", name, len(f_rep), f_obs.value, tail)
    return ReferenceDistribution(
        statistic=name,
        direction=direction,
        observed=f_obs.value,
        samples=tuple(float(s) for s in samples),
        observed_discrepancy=float(observed_discrepancy),
        tail_probability=tail,
    )
