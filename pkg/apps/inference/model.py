"""
Conjugate Gaussian model for per-period effect estimates.

Each estimate is N(theta, sigma^2) with sigma known; theta has either the flat
(tau -> infinity) prior or a proper N(m0, tau) prior. Everything here is a pure
function of its inputs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Union

import numpy as np
from django.db import models
from scipy.stats import norm

from apps.core.domain import EffectStream, GaussianDist
from apps.core.exceptions import EmptyStream, HorizonMismatch, InvalidConfig, NothingToPredict


class PredictiveMode(models.TextChoices):
    ADDITIVE_VARIANCE = 'additive_variance', 'Observation plus posterior variance'
    GENERATIVE_AGGREGATE = 'generative_aggregate', 'End-of-experiment mean under the two-stage process'


@dataclass(frozen=True)
class FlatPrior:
    kind: str = field(default='flat', init=False)


@dataclass(frozen=True)
class ProperPrior:
    m0: float
    tau: float
    kind: str = field(default='proper', init=False)

    def __post_init__(self):
        if not math.isfinite(self.m0):
            raise InvalidConfig(f"prior mean must be finite, got {self.m0}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise InvalidConfig(f"prior variance tau must be positive, got {self.tau}")


Prior = Union[FlatPrior, ProperPrior]


def prior_from_dict(data: dict | None) -> Prior:
    if not data or data.get('kind', 'flat') == 'flat':
        return FlatPrior()
    if data.get('kind') == 'proper':
        return ProperPrior(m0=float(data['m0']), tau=float(data['tau']))
    raise InvalidConfig(f"unknown prior kind {data.get('kind')!r}")


@dataclass(frozen=True)
class ModelConfig:
    alpha: float = 0.05
    horizon: int = 14
    prior: Prior = field(default_factory=FlatPrior)
    predictive_mode: PredictiveMode = PredictiveMode.GENERATIVE_AGGREGATE

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidConfig(f"alpha must lie in (0, 1), got {self.alpha}")
        if isinstance(self.horizon, bool) or int(self.horizon) != self.horizon or self.horizon < 1:
            raise InvalidConfig(f"horizon must be an integer >= 1, got {self.horizon}")
        if not isinstance(self.prior, (FlatPrior, ProperPrior)):
            raise InvalidConfig(f"unsupported prior {self.prior!r}")
        try:
            object.__setattr__(self, 'predictive_mode', PredictiveMode(self.predictive_mode))
        except ValueError:
            raise InvalidConfig(f"unknown predictive mode {self.predictive_mode!r}") from None
        object.__setattr__(self, 'horizon', int(self.horizon))

    @property
    def z_success(self) -> float:
        """z_{1-alpha}: the standard normal quantile the final posterior must clear."""
        return upper_quantile(self.alpha)

    def with_alpha(self, alpha: float | None) -> ModelConfig:
        return self if alpha is None else replace(self, alpha=alpha)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['predictive_mode'] = str(self.predictive_mode)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> ModelConfig:
        return cls(
            alpha=float(data.get('alpha', 0.05)),
            horizon=int(data.get('horizon', 14)),
            prior=prior_from_dict(data.get('prior')),
            predictive_mode=data.get('predictive_mode', PredictiveMode.GENERATIVE_AGGREGATE),
        )


@lru_cache(maxsize=256)
def upper_quantile(tail: float) -> float:
    return float(norm.isf(tail))


def _require_data(stream: EffectStream):
    if stream.n == 0:
        raise EmptyStream("inference needs at least one estimate")


def posterior_from_sum(total, n, sigma, prior: Prior):
    """
    Posterior (mean, variance) from sufficient statistics. Accepts scalars or
    numpy arrays for `total` and `sigma`, so Monte-Carlo and batch paths share
    exactly the arithmetic of the scalar path.
    """
    sigma2 = sigma * sigma
    if isinstance(prior, FlatPrior):
        return total / n, sigma2 / n
    variance = 1.0 / (1.0 / prior.tau + n / sigma2)
    return variance * (prior.m0 / prior.tau + total / sigma2), variance


def posterior(stream: EffectStream, config: ModelConfig) -> GaussianDist:
    _require_data(stream)
    mean, variance = posterior_from_sum(stream.total, stream.n, stream.sigma, config.prior)
    return GaussianDist(mean, variance)


def prob_positive_array(mean, variance):
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        smooth = norm.sf(-mean / np.sqrt(variance))
    return np.where(variance > 0, smooth, (mean > 0).astype(float))


def prob_positive(dist: GaussianDist) -> float:
    # a point mass has indicator semantics
    if dist.variance == 0:
        return 1.0 if dist.mean > 0 else 0.0
    return float(norm.sf(-dist.mean / dist.sd))


def prob_negative(dist: GaussianDist) -> float:
    return prob_positive(GaussianDist(-dist.mean, dist.variance))


def success_from_totals(totals, sigma, config: ModelConfig):
    """Final success indicator for completed streams given their totals over the horizon."""
    mean, variance = posterior_from_sum(totals, config.horizon, sigma, config.prior)
    return prob_positive_array(mean, variance) > 1.0 - config.alpha


def _require_full_horizon(stream: EffectStream, config: ModelConfig):
    if stream.n != config.horizon:
        raise HorizonMismatch(f"stream covers {stream.n} periods, horizon is {config.horizon}")


def final_success(stream: EffectStream, config: ModelConfig) -> bool:
    _require_full_horizon(stream, config)
    return prob_positive(posterior(stream, config)) > 1.0 - config.alpha


def predictive_end_state(stream: EffectStream, config: ModelConfig) -> GaussianDist:
    """
    Predictive distribution of the end-of-experiment state from an interim stream.

    ADDITIVE_VARIANCE uses the variance sigma^2/T + posterior variance.
    GENERATIVE_AGGREGATE is the law of the overall mean over T periods when theta
    comes from the interim posterior and the T - T' remaining estimates are
    i.i.d. N(theta, sigma^2).
    """
    _require_data(stream)
    horizon, observed = config.horizon, stream.n
    if observed >= horizon:
        raise NothingToPredict(f"interim stream already covers {observed} of {horizon} periods")
    interim = posterior(stream, config)
    sigma2 = stream.sigma ** 2
    if config.predictive_mode == PredictiveMode.ADDITIVE_VARIANCE:
        return GaussianDist(interim.mean, sigma2 / horizon + interim.variance)

    remaining = horizon - observed
    if isinstance(config.prior, FlatPrior):
        mean = interim.mean
    else:
        mean = (stream.total + remaining * interim.mean) / horizon
    variance = (remaining / horizon) ** 2 * (interim.variance + sigma2 / remaining)
    return GaussianDist(mean, variance)


def success_boundary(sigma, config: ModelConfig):
    """
    Threshold on the end-of-experiment mean above which the final posterior
    clears P(theta > 0) > 1 - alpha.
    """
    z = config.z_success
    horizon = config.horizon
    if isinstance(config.prior, FlatPrior):
        return z * sigma / math.sqrt(horizon)
    sigma2 = sigma * sigma
    final_variance = 1.0 / (1.0 / config.prior.tau + horizon / sigma2)
    return (z / np.sqrt(final_variance) - config.prior.m0 / config.prior.tau) * sigma2 / horizon
