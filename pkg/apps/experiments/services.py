"""
Interim analysis service.

Resolves options (settings defaults, then an optional base configuration such
as a logged run, then explicit overrides), runs the analyze / simulate / check
workflows, writes their reports and appends a RunRecord for each run.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from django.conf import settings

from apps.core import rng
from apps.core.domain import EffectStream
from apps.core.exceptions import InvalidConfig
from apps.inference.model import FlatPrior, ModelConfig, ProperPrior, posterior
from apps.inference.ppos import PposConfig
from apps.inference.rules import AlwaysValidConfig, HeuristicConfig, RuleName, RuleSpec, evaluate_rule
from apps.simulation.checks import (
    CheckBundle,
    Direction,
    ObservedCorpus,
    ReferenceDistribution,
    reference_check,
    statistic_name,
)
from apps.simulation.corpus import CorpusConfig, CorpusResult, run_corpus

from . import reports
from .runlog import RunRecord, append_record
from .serializers import CorpusConfigSerializer
from .streamfile import StreamFile, read_stream_file

logger = logging.getLogger(__name__)

DEFAULT_RULES = (RuleName.PPOS, RuleName.HEURISTIC, RuleName.ALWAYS_VALID)

# option name -> key in settings.INTERIM_ANALYSIS
SETTING_KEYS = {
    'alpha': 'ALPHA',
    'horizon': 'HORIZON',
    'day': 'INTERIM_DAY',
    'mc_draws': 'MC_DRAWS',
    'gamma_success': 'GAMMA_SUCCESS',
    'gamma_failure': 'GAMMA_FAILURE',
    'interval_level': 'INTERVAL_LEVEL',
    'l': 'HEURISTIC_L',
    'm': 'HEURISTIC_M',
    'p_success': 'P_SUCCESS',
    'p_fail': 'P_FAIL',
    'predictive_mode': 'PREDICTIVE_MODE',
    'ppos_method': 'PPOS_METHOD',
    'replicates': 'REPLICATES',
    'seed': 'SEED',
}
UNSET_OPTIONS = ('mixture_variance', 'prior_mean', 'prior_variance')


@dataclass(frozen=True)
class AnalysisOptions:
    model: ModelConfig
    ppos: PposConfig
    rules: tuple[RuleSpec, ...]
    day: int
    replicates: int
    values: dict = field(repr=False)

    @property
    def seed(self) -> int:
        return self.ppos.seed

    @property
    def interval_level(self) -> float:
        return self.values['interval_level']

    def to_dict(self) -> dict:
        return dict(self.values)


def _rule_spec(name: str, values: dict) -> RuleSpec:
    rule = RuleSpec(name).name
    if rule == RuleName.HEURISTIC:
        return RuleSpec(rule, HeuristicConfig(values['l'], values['m'], values['interval_level']))
    if rule == RuleName.ALWAYS_VALID:
        return RuleSpec(rule, AlwaysValidConfig(values['p_fail'], values['p_success'], values['mixture_variance']))
    return RuleSpec(rule)


def build_options(values: Mapping) -> AnalysisOptions:
    values = dict(values)
    try:
        for key in ('alpha', 'gamma_success', 'gamma_failure', 'interval_level', 'l', 'm', 'p_success', 'p_fail'):
            values[key] = float(values[key])
        for key in ('horizon', 'day', 'mc_draws', 'replicates', 'seed'):
            values[key] = int(values[key])
        for key in UNSET_OPTIONS:
            values[key] = None if values[key] is None else float(values[key])
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"invalid option value: {exc}") from None

    if values['prior_variance'] is not None:
        prior = ProperPrior(values['prior_mean'] or 0.0, values['prior_variance'])
    elif values['prior_mean'] is not None:
        raise InvalidConfig("a prior mean needs a prior variance")
    else:
        prior = FlatPrior()
    model = ModelConfig(values['alpha'], values['horizon'], prior, values['predictive_mode'])

    if not 1 <= values['day'] < model.horizon:
        raise InvalidConfig(f"interim day must satisfy 1 <= day < horizon, got day {values['day']} "
                            f"and horizon {model.horizon}")
    if values['replicates'] < 1:
        raise InvalidConfig(f"replicate count must be >= 1, got {values['replicates']}")

    names = list(dict.fromkeys(str(name) for name in values['rules']))
    if not names:
        raise InvalidConfig("at least one rule is required")
    rules = tuple(_rule_spec(name, values) for name in names)
    values['rules'] = [str(rule.name) for rule in rules]

    ppos = PposConfig(values['gamma_success'], values['gamma_failure'], values['mc_draws'],
                      values['seed'], values['ppos_method'])
    values['ppos_method'] = str(ppos.method)
    values['predictive_mode'] = str(model.predictive_mode)
    return AnalysisOptions(model, ppos, rules, values['day'], values['replicates'], values)


def resolve_options(overrides: Mapping | None = None, base: Mapping | None = None) -> AnalysisOptions:
    """settings.INTERIM_ANALYSIS, then `base`, then `overrides`; None never overrides."""
    conf = settings.INTERIM_ANALYSIS
    values = {option: conf[key] for option, key in SETTING_KEYS.items()}
    values['rules'] = [str(rule) for rule in DEFAULT_RULES]
    values.update(dict.fromkeys(UNSET_OPTIONS))
    for source in (base or {}, overrides or {}):
        values.update({key: value for key, value in source.items() if key in values and value is not None})
    return build_options(values)


def _experiment_ppos(options: AnalysisOptions, experiment_id: str) -> PposConfig:
    return replace(options.ppos, seed=rng.derive_seed(options.seed, rng.PPOS_MC, rng.key_for(experiment_id)))


@dataclass
class AnalysisReport:
    decisions: list[dict]
    skipped: list[dict]
    config: dict

    def render(self, fmt: str = 'csv') -> str:
        if fmt == 'json':
            return reports.to_json({'decisions': self.decisions, 'skipped': self.skipped})
        return reports.frame_to_csv(reports.decision_frame(self.decisions))


@dataclass
class SimulationReport:
    result: CorpusResult
    files: dict[str, Path]

    def render(self) -> str:
        return reports.frame_to_csv(reports.matrix_frame(self.result.matrix_rows()))


@dataclass
class CheckReport:
    distribution: ReferenceDistribution
    skipped: list[dict]
    files: dict[str, Path]

    def render(self) -> str:
        return reports.to_json(self.distribution.to_report())


class InterimAnalysisService:
    """
    Runs the three workflows. Every run that completes appends one RunRecord
    to the result log.
    """

    def __init__(self, result_log=None):
        self.result_log = Path(result_log or settings.INTERIM_ANALYSIS['RESULT_LOG'])

    def evaluate_streams(self, streams: Mapping[str, EffectStream], options: AnalysisOptions) -> AnalysisReport:
        decisions, skipped = [], []
        for experiment_id, stream in streams.items():
            if stream.n < options.day:
                logger.warning("[STREAM] skipping %s: %s rows < day %s", experiment_id, stream.n, options.day)
                skipped.append({'experiment_id': experiment_id, 'rows': stream.n})
                continue
            interim = stream.prefix(options.day)
            pcfg = _experiment_ppos(options, experiment_id)
            for rule in options.rules:
                decision = evaluate_rule(rule, interim, options.model, pcfg)
                decisions.append({'experiment_id': experiment_id, **decision.to_dict()})
        return AnalysisReport(decisions, skipped, options.to_dict())

    def analyze(self, input_path, options: AnalysisOptions, output_dir=None, fmt: str = 'csv'):
        stream_file = read_stream_file(input_path)
        report = self.evaluate_streams(stream_file.streams, options)
        body = report.render(fmt)
        if output_dir:
            reports.write_atomic(Path(output_dir) / f'analysis.{fmt}', body)
        self._record('analyze', options.to_dict(), {'decisions': report.decisions, 'skipped': report.skipped},
                     stream_file)
        return report, body

    def load_corpus(self, options: AnalysisOptions, corpus_path=None) -> CorpusConfig:
        if corpus_path is None:
            return CorpusConfig(interim_day=options.day, seed=options.seed)
        try:
            document = json.loads(Path(corpus_path).read_text(encoding='utf-8'))
        except OSError as exc:
            raise InvalidConfig(f"cannot read corpus config {corpus_path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"corpus config {corpus_path} is not JSON: {exc}") from exc
        serializer = CorpusConfigSerializer(data=document)
        if not serializer.is_valid():
            raise InvalidConfig(f"invalid corpus config: {json.dumps(serializer.errors, sort_keys=True)}")
        return serializer.to_config(interim_day=options.day, seed=options.seed)

    def simulate(self, options: AnalysisOptions, corpus_path=None, output_dir=None) -> SimulationReport:
        corpus = self.load_corpus(options, corpus_path)
        result = run_corpus(corpus, options.rules, options.model, options.ppos)

        output_dir = Path(output_dir or settings.INTERIM_ANALYSIS['OUTPUT_DIR'])
        statistics = {
            str(rule.name): [record.decisions[rule.name].statistic for record in result.records]
            for rule in result.rules
        }
        files = {
            'matrices': reports.write_atomic(
                output_dir / 'confusion_matrices.csv',
                reports.frame_to_csv(reports.matrix_frame(result.matrix_rows())),
            ),
            'summary': reports.write_atomic(output_dir / 'summary.json', reports.to_json(result.summary())),
            'plot_data': reports.write_atomic(
                output_dir / 'plot_data.csv', reports.frame_to_csv(reports.plot_frame(statistics)),
            ),
        }
        config = {**options.to_dict(), 'corpus': corpus.to_dict(options.model.horizon)}
        self._record('simulate', config, {**result.summary(), 'matrices': result.matrix_rows()})
        return SimulationReport(result, files)

    def _observed_corpus(self, stream_file: StreamFile, horizon: int):
        complete, skipped = {}, []
        for experiment_id, stream in stream_file.streams.items():
            if stream.n < horizon:
                logger.warning("[STREAM] skipping %s: %s rows < horizon %s", experiment_id, stream.n, horizon)
                skipped.append({'experiment_id': experiment_id, 'rows': stream.n})
                continue
            complete[experiment_id] = stream.prefix(horizon)
        if not complete:
            raise InvalidConfig(f"no experiment in {stream_file.source} covers the horizon of {horizon} days")
        return ObservedCorpus.from_streams(complete, horizon), skipped

    def check(
        self,
        input_path,
        options: AnalysisOptions,
        statistic: str,
        direction: str = Direction.TWO_SIDED,
        reference_path=None,
        output_dir=None,
    ) -> CheckReport:
        name = statistic_name(statistic)
        stream_file = read_stream_file(input_path)
        observed, skipped = self._observed_corpus(stream_file, options.model.horizon)

        posteriors, reference_digest = None, None
        if reference_path is not None:
            reference = read_stream_file(reference_path)
            missing = [i for i in observed.experiment_ids if i not in reference.streams]
            if missing:
                raise InvalidConfig(f"reference file has no streams for {', '.join(missing)}")
            posteriors = [posterior(reference.streams[i], options.model) for i in observed.experiment_ids]
            reference_digest = {'path': reference.source, 'sha256': reference.sha256}

        bundle = CheckBundle(options.rules[0], options.ppos, options.day, options.interval_level)
        distribution = reference_check(
            observed, options.model, name, options.replicates, options.seed,
            bundle=bundle, direction=direction, posteriors=posteriors,
        )

        files = {}
        if output_dir:
            output_dir = Path(output_dir)
            files['report'] = reports.write_atomic(output_dir / 'check_report.json',
                                                   reports.to_json(distribution.to_report()))
            files['samples'] = reports.write_atomic(output_dir / 'check_samples.csv',
                                                    reports.frame_to_csv(reports.samples_frame(distribution.samples)))
        config = {
            **options.to_dict(),
            'statistic': str(name),
            'direction': str(distribution.direction),
            'bundle': bundle.to_dict(),
            'reference': reference_digest,
        }
        self._record('check', config, {**distribution.to_report(), 'skipped': skipped}, stream_file)
        return CheckReport(distribution, skipped, files)

    def _record(self, command: str, config: dict, results: dict, stream_file: StreamFile | None = None):
        source = {'path': stream_file.source, 'sha256': stream_file.sha256} if stream_file else None
        append_record(self.result_log, RunRecord(command, config, results, source))
