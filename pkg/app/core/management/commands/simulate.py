"""
Django command to simulate retrieval walks
"""
from core.management.base import PipelineCommand
from core.pipeline import run_simulate


class Command(PipelineCommand):
    """Run the configured sampler over the similarity space"""
    help = 'Simulate walks and write traces-<sampler>.jsonl'

    def run(self, config, **options):
        self.stdout.write(
            f'Simulating {config["walks"]} {config["sampler"]} walks of '
            f'{config["steps"]} steps at T={config["temperature"]}')
        path = run_simulate(config)
        return f'Traces written to {path}'
