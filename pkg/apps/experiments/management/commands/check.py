from apps.simulation.checks import CheckStatisticName, Direction

from ._base import AnalysisCommand
from ...runlog import latest_record
from ...services import InterimAnalysisService


class Command(AnalysisCommand):
    help = 'Predictive check of the model and decision rule against observed streams'

    def add_arguments(self, parser):
        parser.add_argument('--input', required=True, help='Observed full-horizon stream file (CSV or JSON)')
        parser.add_argument('--decisions', help='Run log whose latest analyze run supplies the configuration')
        parser.add_argument('--statistic', default=CheckStatisticName.AGREEMENT,
                            help=f"One of: {', '.join(CheckStatisticName.values)}")
        parser.add_argument('--direction', default=Direction.TWO_SIDED,
                            help=f"One of: {', '.join(Direction.values)}")
        parser.add_argument('--reference', help='Stream file the replicating posteriors are fitted on')
        super().add_arguments(parser)

    def handle(self, *args, **options):
        base = None
        if options.get('decisions'):
            with self.translate_errors():
                base = latest_record(options['decisions'], 'analyze').config
        analysis = self.resolve(options, base=base)
        service = InterimAnalysisService(options.get('result_log'))
        with self.translate_errors():
            report = service.check(
                options['input'],
                analysis,
                options['statistic'],
                direction=options['direction'],
                reference_path=options.get('reference'),
                output_dir=options.get('output_dir'),
            )
        self.warn_skipped(report.skipped, f"horizon {analysis.model.horizon}")
        self.stdout.write(report.render(), ending='')
