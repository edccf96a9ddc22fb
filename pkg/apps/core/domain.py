"""
Value types shared by the inference, simulation and experiments apps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from django.db import models
from scipy.stats import norm

from .exceptions import InvalidEstimate, InvalidScale, InvalidConfig


class Verdict(models.TextChoices):
    CONTINUE = 'continue', 'Continue experiment'
    STOP_SUCCESS = 'stop_success', 'Stop as success'
    STOP_FAILURE = 'stop_failure', 'Stop as failure'


# Fixed order used for batch verdict codes and report rows.
VERDICT_ORDER = (Verdict.STOP_SUCCESS, Verdict.STOP_FAILURE, Verdict.CONTINUE)


@dataclass(frozen=True)
class EffectStream:
    """
    Per-period effect estimates with a known sampling standard deviation.
    """
    estimates: tuple[float, ...]
    sigma: float

    def __post_init__(self):
        values = tuple(float(x) for x in self.estimates)
        object.__setattr__(self, 'estimates', values)
        object.__setattr__(self, 'sigma', float(self.sigma))
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidScale(f"sigma must be positive and finite, got {self.sigma}")
        for index, value in enumerate(values, start=1):
            if not math.isfinite(value):
                raise InvalidEstimate(f"estimate for period {index} is not finite: {value}")

    @property
    def n(self) -> int:
        return len(self.estimates)

    @property
    def total(self) -> float:
        # fsum is exact before the final rounding, so the order of estimates never matters
        return math.fsum(self.estimates)

    @property
    def mean(self) -> float:
        return self.total / self.n

    def prefix(self, periods: int) -> EffectStream:
        if periods < 0 or periods > self.n:
            raise InvalidConfig(f"cannot take {periods} periods from a stream of {self.n}")
        return EffectStream(self.estimates[:periods], self.sigma)

    def extended(self, values: Iterable[float]) -> EffectStream:
        return EffectStream(self.estimates + tuple(values), self.sigma)

    def scaled(self, factor: float) -> EffectStream:
        return EffectStream(tuple(x * factor for x in self.estimates), self.sigma * factor)


@dataclass(frozen=True)
class GaussianDist:
    mean: float
    variance: float

    def __post_init__(self):
        object.__setattr__(self, 'mean', float(self.mean))
        object.__setattr__(self, 'variance', float(self.variance))
        if not math.isfinite(self.mean):
            raise InvalidEstimate(f"mean must be finite, got {self.mean}")
        if not (math.isfinite(self.variance) and self.variance >= 0):
            raise InvalidScale(f"variance must be nonnegative and finite, got {self.variance}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def cdf(self, x: float) -> float:
        if self.variance == 0:
            return 1.0 if x >= self.mean else 0.0
        return float(norm.cdf((x - self.mean) / self.sd))


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    rule_name: str
    statistic: float

    def to_dict(self) -> dict:
        return {
            'rule': str(self.rule_name),
            'verdict': str(self.verdict),
            'statistic': self.statistic,
        }
