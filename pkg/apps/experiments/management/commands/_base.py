"""
Shared flags and error handling for the analysis commands.
"""
import logging
from contextlib import contextmanager

from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import CONFIGURATION_ERRORS, InterimAnalysisError

from ...services import resolve_options

CONFIG_ERROR_CODE = 2
RUNTIME_ERROR_CODE = 3

logger = logging.getLogger(__name__)

# flag dest -> option name understood by resolve_options
OPTION_FLAGS = (
    'day', 'horizon', 'alpha', 'seed', 'mc_draws', 'gamma_success', 'gamma_failure', 'l', 'm',
    'p_success', 'p_fail', 'interval_level', 'mixture_variance', 'ppos_method', 'predictive_mode',
    'prior_mean', 'prior_variance', 'replicates',
)


class AnalysisCommand(BaseCommand):
    """Base for analyze / simulate / check: model, rule and output flags."""

    def add_arguments(self, parser):
        model = parser.add_argument_group('model')
        model.add_argument('--day', type=int, help='Interim day T\' (default 7)')
        model.add_argument('--horizon', type=int, help='Planned horizon T in days (default 14)')
        model.add_argument('--alpha', type=float, help='Final success level (default 0.05)')
        model.add_argument('--predictive-mode', dest='predictive_mode',
                           help='generative_aggregate (default) or additive_variance')
        model.add_argument('--prior-mean', dest='prior_mean', type=float, help='Proper prior mean m0')
        model.add_argument('--prior-variance', dest='prior_variance', type=float,
                           help='Proper prior variance tau; omit for the flat prior')

        rules = parser.add_argument_group('rules')
        rules.add_argument('--rule', dest='rules', action='append',
                           help='heuristic, always-valid or ppos; repeatable (default: all three)')
        rules.add_argument('--seed', type=int, help='Root seed for every random draw (default 0)')
        rules.add_argument('--mc-draws', dest='mc_draws', type=int, help='Monte-Carlo replicates K')
        rules.add_argument('--ppos-method', dest='ppos_method', help='monte_carlo (default) or closed_form')
        rules.add_argument('--gamma-success', dest='gamma_success', type=float)
        rules.add_argument('--gamma-failure', dest='gamma_failure', type=float)
        rules.add_argument('--l', dest='l', type=float, help='Heuristic failure threshold')
        rules.add_argument('--m', dest='m', type=float, help='Heuristic success threshold')
        rules.add_argument('--interval-level', dest='interval_level', type=float)
        rules.add_argument('--p-success', dest='p_success', type=float)
        rules.add_argument('--p-fail', dest='p_fail', type=float)
        rules.add_argument('--mixture-variance', dest='mixture_variance', type=float,
                           help='Always-valid mixture variance (default sigma^2)')
        rules.add_argument('--replicates', type=int, help='Predictive-check replicates R (default 500)')

        output = parser.add_argument_group('output')
        output.add_argument('--output-dir', dest='output_dir')
        output.add_argument('--format', dest='fmt', choices=['csv', 'json'], default='csv')
        output.add_argument('--result-log', dest='result_log', help='JSON-lines run log to append to')

    def overrides(self, options) -> dict:
        values = {name: options.get(name) for name in OPTION_FLAGS}
        values['rules'] = options.get('rules')
        return values

    def resolve(self, options, base=None):
        with self.translate_errors():
            return resolve_options(self.overrides(options), base=base)

    @contextmanager
    def translate_errors(self):
        try:
            yield
        except CONFIGURATION_ERRORS as exc:
            raise CommandError(str(exc), returncode=CONFIG_ERROR_CODE) from exc
        except InterimAnalysisError as exc:
            raise CommandError(str(exc), returncode=RUNTIME_ERROR_CODE) from exc
        except OSError as exc:
            raise CommandError(f"cannot write output: {exc}", returncode=RUNTIME_ERROR_CODE) from exc
        except CommandError:
            raise
        except Exception as exc:
            logger.exception("[COMMAND] unexpected failure")
            raise CommandError(f"internal error: {exc}", returncode=RUNTIME_ERROR_CODE) from exc

    def warn_skipped(self, skipped, limit_name):
        for entry in skipped:
            self.stderr.write(self.style.WARNING(
                f"skipped {entry['experiment_id']}: {entry['rows']} rows < {limit_name}"
            ))
