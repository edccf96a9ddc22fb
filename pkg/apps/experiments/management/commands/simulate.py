from ._base import AnalysisCommand
from ...services import InterimAnalysisService


class Command(AnalysisCommand):
    help = 'Simulate an experiment corpus and compare the rules\' interim verdicts with the final outcomes'

    def add_arguments(self, parser):
        parser.add_argument('--corpus', help='Corpus configuration (JSON); default corpus when omitted')
        super().add_arguments(parser)

    def handle(self, *args, **options):
        analysis = self.resolve(options)
        service = InterimAnalysisService(options.get('result_log'))
        with self.translate_errors():
            report = service.simulate(analysis, options.get('corpus'), options.get('output_dir'))
        self.stdout.write(report.render(), ending='')
        for path in report.files.values():
            self.stderr.write(self.style.SUCCESS(f'Wrote {path}'))
