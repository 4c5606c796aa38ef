"""
Django command to render the run report
"""
from core.management.base import PipelineCommand
from core.pipeline import run_report


class Command(PipelineCommand):
    """Rebuild the report and print the regression table"""
    help = 'Render the regression table of a run directory'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--compare', metavar='RUN_DIR',
            help='Second run directory to print beside this one')

    def run(self, config, **options):
        _, table = run_report(config, compare=options.get('compare'))
        self.stdout.write(table)
        return f'Report written to {config.output_dir}'
