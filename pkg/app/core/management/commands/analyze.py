"""
Django command to analyze simulated traces
"""
from core.management.base import PipelineCommand
from core.pipeline import run_analyze
from foraging.report import render_table


class Command(PipelineCommand):
    """Fluency metrics, deviation regression and the run report"""
    help = 'Analyze traces-<sampler>.jsonl and write the run report'

    def run(self, config, **options):
        report, path = run_analyze(config)
        self.stdout.write(render_table(report))
        return f'Report written to {path}'
