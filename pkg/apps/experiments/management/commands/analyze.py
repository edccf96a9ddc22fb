from ._base import AnalysisCommand
from ...services import InterimAnalysisService


class Command(AnalysisCommand):
    help = 'Evaluate the selected decision rules at the interim day for every experiment in a stream file'

    def add_arguments(self, parser):
        parser.add_argument('--input', required=True, help='Stream file (CSV or JSON)')
        super().add_arguments(parser)

    def handle(self, *args, **options):
        analysis = self.resolve(options)
        service = InterimAnalysisService(options.get('result_log'))
        with self.translate_errors():
            report, body = service.analyze(options['input'], analysis, options.get('output_dir'), options['fmt'])
        self.warn_skipped(report.skipped, f"day {analysis.day}")
        self.stdout.write(body, ending='')
