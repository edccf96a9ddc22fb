import json

import pytest

from apps.core.domain import EffectStream, Verdict
from apps.core.exceptions import InvalidConfig
from apps.core.tests.factories import write_stream_csv
from apps.experiments.runlog import RunRecord, append_record, latest_record, read_records
from apps.experiments.services import InterimAnalysisService, resolve_options
from apps.inference.model import FlatPrior, ProperPrior
from apps.inference.ppos import PposMethod
from apps.inference.rules import RuleName


class TestResolveOptions:
    def test_settings_defaults(self):
        options = resolve_options()
        assert [rule.name for rule in options.rules] == [RuleName.PPOS, RuleName.HEURISTIC, RuleName.ALWAYS_VALID]
        assert options.day == 7
        assert options.model.horizon == 14
        assert options.model.prior == FlatPrior()
        assert options.ppos.method == PposMethod.MONTE_CARLO
        assert options.replicates == 500

    def test_settings_are_read_at_call_time(self, settings):
        settings.INTERIM_ANALYSIS = {**settings.INTERIM_ANALYSIS, 'INTERIM_DAY': 3, 'SEED': 99}
        options = resolve_options()
        assert (options.day, options.seed) == (3, 99)

    def test_overrides_beat_base(self):
        options = resolve_options({'day': 5, 'alpha': None}, base={'day': 4, 'alpha': 0.1})
        assert options.day == 5
        assert options.model.alpha == 0.1

    def test_rule_settings(self):
        options = resolve_options({'rules': ['heuristic', 'always-valid', 'heuristic'], 'l': -0.5, 'm': 0.5,
                                   'mixture_variance': 2.0})
        heuristic, always_valid = options.rules
        assert heuristic.settings.lower_fail == -0.5
        assert heuristic.settings.lower_success == 0.5
        assert always_valid.settings.mixture_variance == 2.0
        assert options.to_dict()['rules'] == ['heuristic', 'always-valid']

    def test_proper_prior(self):
        options = resolve_options({'prior_mean': 0.2, 'prior_variance': 0.5})
        assert options.model.prior == ProperPrior(0.2, 0.5)

    @pytest.mark.parametrize('overrides', [
        {'prior_mean': 0.2},
        {'day': 14},
        {'day': 0},
        {'replicates': 0},
        {'rules': ['bandit']},
        {'l': 1.0, 'm': 0.0, 'rules': ['heuristic']},
        {'ppos_method': 'exact'},
        {'alpha': 'high'},
    ])
    def test_rejects(self, overrides):
        with pytest.raises(InvalidConfig):
            resolve_options(overrides)


class TestService:
    def test_evaluate_streams_skips_short_experiments(self):
        streams = {'long': EffectStream((0.0,) * 7, 1.0), 'short': EffectStream((0.0,) * 3, 1.0)}
        report = InterimAnalysisService().evaluate_streams(streams, resolve_options({'ppos_method': 'closed_form'}))
        assert report.skipped == [{'experiment_id': 'short', 'rows': 3}]
        assert [d['experiment_id'] for d in report.decisions] == ['long'] * 3
        assert {d['verdict'] for d in report.decisions} == {Verdict.STOP_FAILURE}

    def test_analyze_appends_run_record(self, tmp_path):
        path = write_stream_csv(tmp_path / 's.csv', {'a': EffectStream((0.0,) * 7, 1.0)})
        log = tmp_path / 'log.jsonl'
        service = InterimAnalysisService(log)
        options = resolve_options({'rules': ['heuristic']})
        report, body = service.analyze(path, options, output_dir=tmp_path / 'out')
        assert (tmp_path / 'out' / 'analysis.csv').read_text() == body

        record = latest_record(log, 'analyze')
        assert record.config['rules'] == ['heuristic']
        assert record.results['decisions'] == report.decisions
        assert record.input['path'] == str(path)

    def test_load_corpus_document(self, tmp_path):
        document = {
            'n_experiments': 12,
            'mixture': [{'kind': 'point_null', 'weight': 0.5}, {'kind': 'gaussian', 'weight': 0.5, 'mean': 1.0}],
        }
        path = tmp_path / 'corpus.json'
        path.write_text(json.dumps(document), encoding='utf-8')
        corpus = InterimAnalysisService().load_corpus(resolve_options({'seed': 3}), path)
        assert corpus.n_experiments == 12
        assert corpus.seed == 3
        assert len(corpus.mixture) == 2

    def test_load_corpus_rejects_bad_weights(self, tmp_path):
        path = tmp_path / 'corpus.json'
        path.write_text(json.dumps({'mixture': [{'kind': 'point_null', 'weight': 0.5}]}), encoding='utf-8')
        with pytest.raises(InvalidConfig, match='sum to 1'):
            InterimAnalysisService().load_corpus(resolve_options(), path)


class TestRunLog:
    def test_latest_of_command(self, tmp_path):
        log = tmp_path / 'runs.jsonl'
        append_record(log, RunRecord('analyze', {'seed': 1}, {}))
        append_record(log, RunRecord('simulate', {'seed': 2}, {}))
        append_record(log, RunRecord('analyze', {'seed': 3}, {}))
        assert len(read_records(log)) == 3
        assert latest_record(log, 'analyze').config == {'seed': 3}

    def test_missing_command(self, tmp_path):
        log = tmp_path / 'runs.jsonl'
        append_record(log, RunRecord('simulate', {}, {}))
        with pytest.raises(InvalidConfig):
            latest_record(log, 'analyze')

    def test_corrupt_line(self, tmp_path):
        log = tmp_path / 'runs.jsonl'
        log.write_text('{"command": "analyze"\n', encoding='utf-8')
        with pytest.raises(InvalidConfig):
            read_records(log)

    def test_missing_log(self, tmp_path):
        with pytest.raises(InvalidConfig):
            read_records(tmp_path / 'absent.jsonl')
