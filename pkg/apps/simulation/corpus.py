"""
Synthetic experiment corpora and the interim-vs-final comparison of decision rules.

Each experiment draws its true effect from a weighted mixture, simulates a
full-horizon stream, lets every rule decide on the interim prefix, and is
scored against the outcome the full stream would have produced.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from django.db import models

from apps.core import rng
from apps.core.domain import VERDICT_ORDER, Decision, EffectStream, Verdict
from apps.core.exceptions import InvalidConfig
from apps.inference.model import (
    ModelConfig,
    final_success,
    posterior,
    posterior_from_sum,
    prob_negative,
    prob_positive_array,
)
from apps.inference.ppos import PposConfig
from apps.inference.rules import RuleSpec, evaluate_rule

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-9


class Outcome(models.TextChoices):
    SIGNIFICANT_POSITIVE = 'significant_positive', 'Significant positive'
    NEUTRAL = 'neutral', 'Neutral'
    SIGNIFICANT_NEGATIVE = 'significant_negative', 'Significant negative'


OUTCOME_ORDER = (Outcome.SIGNIFICANT_POSITIVE, Outcome.NEUTRAL, Outcome.SIGNIFICANT_NEGATIVE)
POSITIVE_CODE, NEUTRAL_CODE, NEGATIVE_CODE = range(len(OUTCOME_ORDER))


class ComponentKind(models.TextChoices):
    POINT_NULL = 'point_null', 'Point null'
    GAUSSIAN = 'gaussian', 'Gaussian'


@dataclass(frozen=True)
class MixtureComponent:
    kind: ComponentKind
    weight: float
    mean: float = 0.0
    sd: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, 'kind', ComponentKind(self.kind))
        except ValueError:
            raise InvalidConfig(f"unknown mixture component {self.kind!r}") from None
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise InvalidConfig(f"mixture weight must be nonnegative, got {self.weight}")
        if self.kind == ComponentKind.POINT_NULL:
            object.__setattr__(self, 'mean', 0.0)
            object.__setattr__(self, 'sd', 0.0)
        elif not (math.isfinite(self.mean) and math.isfinite(self.sd) and self.sd >= 0):
            raise InvalidConfig(f"gaussian component needs finite mean and sd >= 0, got {self.mean}, {self.sd}")

    @classmethod
    def point_null(cls, weight: float) -> MixtureComponent:
        return cls(ComponentKind.POINT_NULL, weight)

    @classmethod
    def gaussian(cls, mean: float, sd: float, weight: float) -> MixtureComponent:
        return cls(ComponentKind.GAUSSIAN, weight, mean, sd)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['kind'] = str(self.kind)
        return data


def default_mixture(sigma: float, horizon: int) -> tuple[MixtureComponent, ...]:
    """60% point null, 25% N(+s, 0.5s), 15% N(-s, 0.5s) with s = sigma / sqrt(T)."""
    scale = sigma / math.sqrt(horizon)
    return (
        MixtureComponent.point_null(0.60),
        MixtureComponent.gaussian(scale, 0.5 * scale, 0.25),
        MixtureComponent.gaussian(-scale, 0.5 * scale, 0.15),
    )


@dataclass(frozen=True)
class ExperimentScenario:
    scenario_id: str
    true_theta: float
    sigma: float
    horizon: int = 14
    interim_day: int = 7
    component: ComponentKind = ComponentKind.GAUSSIAN

    def __post_init__(self):
        if not math.isfinite(self.true_theta):
            raise InvalidConfig(f"true effect must be finite, got {self.true_theta}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidConfig(f"sigma must be positive, got {self.sigma}")
        if not 1 <= self.interim_day < self.horizon:
            raise InvalidConfig(
                f"need 1 <= interim day < horizon, got day {self.interim_day} and horizon {self.horizon}"
            )


@dataclass(frozen=True)
class CorpusConfig:
    n_experiments: int = 345
    mixture: tuple[MixtureComponent, ...] | None = None  # None: default_mixture(sigma, horizon)
    sigma: float = 1.0
    interim_day: int = 7
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.n_experiments, bool) or int(self.n_experiments) != self.n_experiments \
                or self.n_experiments < 1:
            raise InvalidConfig(f"corpus needs at least one experiment, got {self.n_experiments}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidConfig(f"sigma must be positive, got {self.sigma}")
        if int(self.interim_day) != self.interim_day or self.interim_day < 1:
            raise InvalidConfig(f"interim day must be >= 1, got {self.interim_day}")
        rng.validate_seed(self.seed)
        if self.mixture is not None:
            components = tuple(self.mixture)
            if not components:
                raise InvalidConfig("mixture needs at least one component")
            total = math.fsum(c.weight for c in components)
            if abs(total - 1.0) > WEIGHT_TOLERANCE:
                raise InvalidConfig(f"mixture weights must sum to 1, got {total}")
            object.__setattr__(self, 'mixture', components)
        object.__setattr__(self, 'n_experiments', int(self.n_experiments))
        object.__setattr__(self, 'interim_day', int(self.interim_day))

    def components(self, horizon: int) -> tuple[MixtureComponent, ...]:
        return self.mixture if self.mixture is not None else default_mixture(self.sigma, horizon)

    def to_dict(self, horizon: int = 14) -> dict:
        return {
            'n_experiments': self.n_experiments,
            'mixture': [c.to_dict() for c in self.components(horizon)],
            'sigma': self.sigma,
            'interim_day': self.interim_day,
            'seed': self.seed,
        }


def scenario_id_for(index: int) -> str:
    return f"exp-{index:05d}"


def draw_component(components: Sequence[MixtureComponent], u: float) -> MixtureComponent:
    cumulative = np.cumsum([c.weight for c in components])
    index = int(np.searchsorted(cumulative, u * cumulative[-1], side='right'))
    return components[min(index, len(components) - 1)]


def draw_scenario(corpus: CorpusConfig, index: int, horizon: int) -> ExperimentScenario:
    scenario_id = scenario_id_for(index)
    generator = rng.substream(corpus.seed, rng.MIXTURE, rng.key_for(scenario_id))
    u, z = generator.random(), generator.standard_normal()
    component = draw_component(corpus.components(horizon), u)
    return ExperimentScenario(
        scenario_id=scenario_id,
        true_theta=component.mean + component.sd * z,
        sigma=corpus.sigma,
        horizon=horizon,
        interim_day=corpus.interim_day,
        component=component.kind,
    )


def simulate_stream(scenario: ExperimentScenario, seed: int) -> EffectStream:
    """horizon i.i.d. draws from N(true_theta, sigma^2) on the scenario's own substream."""
    generator = rng.substream(seed, rng.STREAM, rng.key_for(scenario.scenario_id))
    noise = generator.standard_normal(scenario.horizon)
    return EffectStream(tuple(scenario.true_theta + scenario.sigma * noise), scenario.sigma)


def final_outcome(stream: EffectStream, config: ModelConfig) -> Outcome:
    if final_success(stream, config):
        return Outcome.SIGNIFICANT_POSITIVE
    if prob_negative(posterior(stream, config)) > 1.0 - config.alpha:
        return Outcome.SIGNIFICANT_NEGATIVE
    return Outcome.NEUTRAL


def outcome_codes(totals, sigmas, config: ModelConfig):
    """final_outcome for many completed streams given their totals; codes index OUTCOME_ORDER."""
    mean, variance = posterior_from_sum(np.asarray(totals, dtype=float), config.horizon,
                                        np.asarray(sigmas, dtype=float), config.prior)
    threshold = 1.0 - config.alpha
    codes = np.full(np.shape(mean), NEUTRAL_CODE, dtype=np.int8)
    codes[prob_positive_array(-mean, variance) > threshold] = NEGATIVE_CODE
    codes[prob_positive_array(mean, variance) > threshold] = POSITIVE_CODE
    return codes


@dataclass
class ConfusionMatrix:
    """Interim verdict x final outcome counts for one rule."""
    rule_name: str
    counts: Counter = field(default_factory=Counter)

    def add(self, verdict: Verdict, outcome: Outcome, count: int = 1):
        self.counts[(Verdict(verdict), Outcome(outcome))] += count

    def merge(self, other: ConfusionMatrix) -> ConfusionMatrix:
        if other.rule_name != self.rule_name:
            raise InvalidConfig(f"cannot merge matrices of {self.rule_name} and {other.rule_name}")
        return ConfusionMatrix(self.rule_name, self.counts + other.counts)

    def count(self, verdict: Verdict, outcome: Outcome | None = None) -> int:
        if outcome is None:
            return sum(self.counts[(verdict, o)] for o in OUTCOME_ORDER)
        return self.counts[(verdict, outcome)]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def rows(self) -> list[dict]:
        return [
            {'rule': str(self.rule_name), 'interim': str(v), 'final': str(o), 'count': self.counts[(v, o)]}
            for v in VERDICT_ORDER
            for o in OUTCOME_ORDER
        ]


@dataclass(frozen=True)
class ExperimentRecord:
    scenario: ExperimentScenario
    outcome: Outcome
    decisions: dict[str, Decision]


def _rate(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


@dataclass(frozen=True)
class OperatingCharacteristics:
    rule_name: str
    n_experiments: int
    stop_success: int
    stop_failure: int
    continued: int
    type_i_rate: float
    power_proxy: float
    curtailment_rate: float
    false_positive_fraction: float
    correct_abandonments: int
    sign_error_rate: float
    null_experiments: int
    positive_experiments: int
    negative_experiments: int

    @classmethod
    def from_records(cls, rule_name: str, records: Sequence[ExperimentRecord]) -> OperatingCharacteristics:
        verdicts = [(r, r.decisions[rule_name].verdict) for r in records]
        success = [r for r, v in verdicts if v == Verdict.STOP_SUCCESS]
        failure = [r for r, v in verdicts if v == Verdict.STOP_FAILURE]
        nulls = [r for r in records if r.scenario.component == ComponentKind.POINT_NULL]
        positives = [r for r in records if r.scenario.true_theta > 0]
        negatives = [r for r in records if r.scenario.true_theta < 0]
        success_ids = {r.scenario.scenario_id for r in success}
        return cls(
            rule_name=str(rule_name),
            n_experiments=len(records),
            stop_success=len(success),
            stop_failure=len(failure),
            continued=len(records) - len(success) - len(failure),
            type_i_rate=_rate(sum(r.scenario.scenario_id in success_ids for r in nulls), len(nulls)),
            power_proxy=_rate(sum(r.scenario.scenario_id in success_ids for r in positives), len(positives)),
            curtailment_rate=_rate(len(success) + len(failure), len(records)),
            false_positive_fraction=_rate(
                sum(r.outcome != Outcome.SIGNIFICANT_POSITIVE for r in success), len(success)
            ),
            correct_abandonments=sum(r.outcome != Outcome.SIGNIFICANT_POSITIVE for r in failure),
            sign_error_rate=_rate(sum(r.scenario.true_theta < 0 for r in success), len(success)),
            null_experiments=len(nulls),
            positive_experiments=len(positives),
            negative_experiments=len(negatives),
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CorpusResult:
    corpus: CorpusConfig
    model: ModelConfig
    rules: tuple[RuleSpec, ...]
    records: tuple[ExperimentRecord, ...]
    matrices: dict[str, ConfusionMatrix]
    characteristics: dict[str, OperatingCharacteristics]

    def matrix_rows(self) -> list[dict]:
        return [row for rule in self.rules for row in self.matrices[rule.name].rows()]

    def summary(self) -> dict:
        return {
            'corpus': self.corpus.to_dict(self.model.horizon),
            'model': self.model.to_dict(),
            'rules': [rule.to_dict() for rule in self.rules],
            'operating_characteristics': {
                str(rule.name): self.characteristics[rule.name].to_dict() for rule in self.rules
            },
        }


def _normalize_rules(rules: Iterable) -> tuple[RuleSpec, ...]:
    specs = tuple(rule if isinstance(rule, RuleSpec) else RuleSpec(rule) for rule in rules)
    if not specs:
        raise InvalidConfig("at least one rule is required")
    names = [spec.name for spec in specs]
    if len(set(names)) != len(names):
        raise InvalidConfig(f"each rule may appear once, got {', '.join(map(str, names))}")
    return specs


def run_corpus(
    corpus: CorpusConfig,
    rules: Iterable,
    model: ModelConfig,
    pcfg: PposConfig | None = None,
) -> CorpusResult:
    """
    Simulate the corpus and cross-tabulate every rule's interim verdict against
    the full-horizon outcome. All rules see the same streams. The PPoS
    Monte-Carlo seed of an experiment is derived from the corpus seed and the
    experiment id, so pcfg.seed is not used here.
    """
    specs = _normalize_rules(rules)
    pcfg = pcfg or PposConfig()
    if corpus.interim_day >= model.horizon:
        raise InvalidConfig(
            f"interim day {corpus.interim_day} must come before the horizon {model.horizon}"
        )
    logger.info("[CORPUS] %s experiments, %s rules, seed=%s", corpus.n_experiments, len(specs), corpus.seed)

    matrices = {spec.name: ConfusionMatrix(spec.name) for spec in specs}
    records = []
    for index in range(corpus.n_experiments):
        scenario = draw_scenario(corpus, index, model.horizon)
        stream = simulate_stream(scenario, corpus.seed)
        interim = stream.prefix(scenario.interim_day)
        outcome = final_outcome(stream, model)
        experiment_pcfg = replace(
            pcfg, seed=rng.derive_seed(corpus.seed, rng.PPOS_MC, rng.key_for(scenario.scenario_id))
        )
        decisions = {spec.name: evaluate_rule(spec, interim, model, experiment_pcfg) for spec in specs}
        for name, decision in decisions.items():
            matrices[name].add(decision.verdict, outcome)
        records.append(ExperimentRecord(scenario, outcome, decisions))

    characteristics = {
        spec.name: OperatingCharacteristics.from_records(spec.name, records) for spec in specs
    }
    for spec in specs:
        oc = characteristics[spec.name]
        logger.info(
            "[CORPUS] %s: success=%s failure=%s continue=%s fp_fraction=%.4f",
            spec.name, oc.stop_success, oc.stop_failure, oc.continued, oc.false_positive_fraction,
        )
    return CorpusResult(corpus, model, specs, tuple(records), matrices, characteristics)
