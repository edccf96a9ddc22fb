"""
Interim decision rules behind one interface.

Three rules are compared head to head:

* heuristic: lower end of a central credible interval against thresholds l and m;
* always-valid: mixture SPRT p-value against p_success / p_fail;
* ppos: predictive probability of success against gamma_success / gamma_failure.

Each rule is available for a single stream (returns a Decision) and as a batch
over equal-length prefixes (returns verdict codes and statistics), which the
predictive checks use on replicated corpora.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np
from django.db import models
from scipy.stats import norm

from apps.core.domain import VERDICT_ORDER, Decision, EffectStream, GaussianDist, Verdict
from apps.core.exceptions import EmptyStream, InvalidConfig

from .model import ModelConfig, posterior, posterior_from_sum
from .ppos import PposConfig, ppos_closed_form_batch, ppos_decision, ppos_estimate

# Smallest p-value reported; keeps p in (0, 1] when exp underflows.
P_FLOOR = np.finfo(float).tiny


class RuleName(models.TextChoices):
    HEURISTIC = 'heuristic', 'Practical heuristic'
    ALWAYS_VALID = 'always-valid', 'Always-valid p-value'
    PPOS = 'ppos', 'Predictive probability of success'


@dataclass(frozen=True)
class HeuristicConfig:
    lower_fail: float = 0.0
    lower_success: float = 0.0
    interval_level: float = 0.90

    def __post_init__(self):
        if not (math.isfinite(self.lower_fail) and math.isfinite(self.lower_success)):
            raise InvalidConfig("heuristic thresholds must be finite")
        # l == m is allowed: the three regions stay disjoint
        if self.lower_fail > self.lower_success:
            raise InvalidConfig(
                f"heuristic needs l <= m, got l={self.lower_fail} and m={self.lower_success}"
            )
        if not 0 < self.interval_level < 1:
            raise InvalidConfig(f"interval level must lie in (0, 1), got {self.interval_level}")


@dataclass(frozen=True)
class AlwaysValidConfig:
    p_fail: float = 0.95
    p_success: float = 0.05
    mixture_variance: float | None = None  # None means sigma^2 of the stream

    def __post_init__(self):
        if not 0 <= self.p_success < self.p_fail <= 1:
            raise InvalidConfig(
                f"need 0 <= p_success < p_fail <= 1, got {self.p_success} and {self.p_fail}"
            )
        if self.mixture_variance is not None and not (
            math.isfinite(self.mixture_variance) and self.mixture_variance > 0
        ):
            raise InvalidConfig(f"mixture variance must be positive, got {self.mixture_variance}")


RuleSettings = Union[HeuristicConfig, AlwaysValidConfig, None]

_SETTINGS_TYPES = {
    RuleName.HEURISTIC: HeuristicConfig,
    RuleName.ALWAYS_VALID: AlwaysValidConfig,
    RuleName.PPOS: type(None),
}


@dataclass(frozen=True)
class RuleSpec:
    """A rule identifier with its configuration. The PPoS rule is configured by PposConfig."""
    name: RuleName
    settings: RuleSettings = field(default=None)

    def __post_init__(self):
        try:
            name = RuleName(self.name)
        except ValueError:
            raise InvalidConfig(
                f"unknown rule {self.name!r}; available: {', '.join(RuleName.values)}"
            ) from None
        object.__setattr__(self, 'name', name)
        settings = self.settings
        if settings is None and name != RuleName.PPOS:
            settings = _SETTINGS_TYPES[name]()
        if not isinstance(settings, _SETTINGS_TYPES[name]):
            raise InvalidConfig(f"rule {name} cannot take settings {settings!r}")
        object.__setattr__(self, 'settings', settings)

    def to_dict(self) -> dict:
        return {'name': str(self.name), 'settings': asdict(self.settings) if self.settings else None}

    @classmethod
    def from_dict(cls, data: dict) -> RuleSpec:
        name = RuleName(data['name']) if data.get('name') in RuleName.values else data.get('name')
        settings = data.get('settings')
        if settings is not None and name in _SETTINGS_TYPES and name != RuleName.PPOS:
            settings = _SETTINGS_TYPES[name](**settings)
        return cls(name, settings)


def credible_interval(dist: GaussianDist, level: float) -> tuple[float, float]:
    if not 0 < level < 1:
        raise InvalidConfig(f"interval level must lie in (0, 1), got {level}")
    if dist.variance == 0:
        return dist.mean, dist.mean
    half_width = float(norm.ppf((1.0 + level) / 2.0)) * dist.sd
    return dist.mean - half_width, dist.mean + half_width


def _threshold_verdict(statistic: float, fail_below: float, succeed_above: float) -> Verdict:
    if statistic < fail_below:
        return Verdict.STOP_FAILURE
    if statistic > succeed_above:
        return Verdict.STOP_SUCCESS
    return Verdict.CONTINUE


def heuristic_rule(stream: EffectStream, config: ModelConfig, hcfg: HeuristicConfig) -> Decision:
    lower, _ = credible_interval(posterior(stream, config), hcfg.interval_level)
    verdict = _threshold_verdict(lower, hcfg.lower_fail, hcfg.lower_success)
    return Decision(verdict, RuleName.HEURISTIC, lower)


def _log_likelihood_ratio(n, mean, sigma2, tau2):
    """log of the normal-mixture SPRT ratio after n observations with running mean `mean`."""
    spread = sigma2 + n * tau2
    return 0.5 * np.log(sigma2 / spread) + (n * n * tau2 * mean * mean) / (2.0 * sigma2 * spread)


def always_valid_p_sequence(stream: EffectStream, avcfg: AlwaysValidConfig) -> list[float]:
    """p_1 ... p_n with p_0 = 1 and p_k = min(p_{k-1}, 1 / Lambda_k)."""
    if stream.n == 0:
        raise EmptyStream("always-valid p-value needs at least one estimate")
    sigma2 = stream.sigma ** 2
    tau2 = avcfg.mixture_variance if avcfg.mixture_variance is not None else sigma2
    p_value = 1.0
    sequence = []
    # each prefix mean is recomputed from the stream; no running state is carried between calls
    for n in range(1, stream.n + 1):
        mean = math.fsum(stream.estimates[:n]) / n
        log_ratio = float(_log_likelihood_ratio(n, mean, sigma2, tau2))
        p_value = min(p_value, max(math.exp(-log_ratio) if log_ratio > -700 else math.inf, P_FLOOR))
        sequence.append(p_value)
    return sequence


def always_valid_p(stream: EffectStream, avcfg: AlwaysValidConfig) -> float:
    return always_valid_p_sequence(stream, avcfg)[-1]


def always_valid_rule(stream: EffectStream, avcfg: AlwaysValidConfig) -> Decision:
    """
    The p-value is two-sided, so a significant crossing launches only when the
    interim mean is positive; a significant negative effect stops as a failure.
    """
    p_value = always_valid_p(stream, avcfg)
    if p_value > avcfg.p_fail:
        verdict = Verdict.STOP_FAILURE
    elif p_value < avcfg.p_success:
        verdict = Verdict.STOP_SUCCESS if stream.mean > 0 else Verdict.STOP_FAILURE
    else:
        verdict = Verdict.CONTINUE
    return Decision(verdict, RuleName.ALWAYS_VALID, p_value)


def evaluate_rule(rule: RuleSpec, stream: EffectStream, config: ModelConfig, pcfg: PposConfig) -> Decision:
    if not isinstance(rule, RuleSpec):
        rule = RuleSpec(rule)
    if rule.name == RuleName.HEURISTIC:
        return heuristic_rule(stream, config, rule.settings)
    if rule.name == RuleName.ALWAYS_VALID:
        return always_valid_rule(stream, rule.settings)
    if rule.name == RuleName.PPOS:
        return ppos_decision(ppos_estimate(stream, config, pcfg), pcfg)
    raise InvalidConfig(f"unknown rule {rule.name!r}")


# Batch evaluation: verdict codes index into VERDICT_ORDER.
SUCCESS_CODE, FAILURE_CODE, CONTINUE_CODE = (VERDICT_ORDER.index(v) for v in (
    Verdict.STOP_SUCCESS, Verdict.STOP_FAILURE, Verdict.CONTINUE,
))


def _codes(statistics, fail_when, succeed_when):
    codes = np.full(statistics.shape, CONTINUE_CODE, dtype=np.int8)
    codes[fail_when] = FAILURE_CODE
    codes[succeed_when] = SUCCESS_CODE
    return codes


def evaluate_rule_batch(rule: RuleSpec, prefixes, sigmas, config: ModelConfig, pcfg: PposConfig):
    """
    Evaluate `rule` on every row of `prefixes` (shape (m, n)), each with its own
    sigma. Returns (verdict codes, statistics). The PPoS rule uses the closed form.
    """
    if not isinstance(rule, RuleSpec):
        rule = RuleSpec(rule)
    prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), prefixes.shape[:1])
    observed = prefixes.shape[1]
    if observed == 0:
        raise EmptyStream("batch evaluation needs at least one period")

    if rule.name == RuleName.HEURISTIC:
        hcfg = rule.settings
        mean, variance = posterior_from_sum(prefixes.sum(axis=1), observed, sigmas, config.prior)
        lower = mean - float(norm.ppf((1.0 + hcfg.interval_level) / 2.0)) * np.sqrt(variance)
        return _codes(lower, lower < hcfg.lower_fail, lower > hcfg.lower_success), lower

    if rule.name == RuleName.ALWAYS_VALID:
        avcfg = rule.settings
        sigma2 = (sigmas ** 2)[:, np.newaxis]
        tau2 = avcfg.mixture_variance if avcfg.mixture_variance is not None else sigma2
        counts = np.arange(1, observed + 1, dtype=float)
        means = np.cumsum(prefixes, axis=1) / counts
        log_ratio = _log_likelihood_ratio(counts, means, sigma2, tau2)
        with np.errstate(over='ignore'):
            inverse = np.exp(-log_ratio)
        p_values = np.clip(np.minimum(1.0, inverse.min(axis=1)), P_FLOOR, 1.0)
        significant = p_values < avcfg.p_success
        positive = means[:, -1] > 0
        fail_when = (p_values > avcfg.p_fail) | (significant & ~positive)
        return _codes(p_values, fail_when, significant & positive), p_values

    if rule.name == RuleName.PPOS:
        estimates = ppos_closed_form_batch(prefixes.sum(axis=1), observed, sigmas, config)
        return _codes(estimates, estimates < pcfg.gamma_failure, estimates > pcfg.gamma_success), estimates

    raise InvalidConfig(f"unknown rule {rule.name!r}")
