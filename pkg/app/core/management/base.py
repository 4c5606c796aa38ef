"""
Shared base for the pipeline management commands
"""
from django.core.management.base import BaseCommand, CommandError

from core.config import load_run_config
from core.exceptions import EXIT_IO, ForagingError


class PipelineCommand(BaseCommand):
    """Loads the run config and maps toolkit errors to exit codes"""

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Run config file (key = value)')
        parser.add_argument('--temperature', type=float)
        parser.add_argument('--steps', type=int)
        parser.add_argument('--walks', type=int)
        parser.add_argument('--seed', type=int)
        parser.add_argument(
            '--sampler', choices=['random_walk', 'metropolis_hastings'])
        parser.add_argument('--proposal', choices=['uniform', 'softmax'])
        parser.add_argument('--lambda', dest='lambda', type=float)
        parser.add_argument('--window', type=int)

    def overrides(self, options):
        keys = [
            'temperature', 'steps', 'walks', 'seed', 'sampler', 'proposal',
            'lambda', 'window',
        ]
        return {key: options.get(key) for key in keys}

    def run(self, config, **options):
        raise NotImplementedError

    def handle(self, *args, **options):
        """Entrypoint for command"""
        try:
            options = dict(options)
            config = load_run_config(options.pop('config', None),
                                     self.overrides(options))
            message = self.run(config, **options)
        except ForagingError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        except OSError as exc:
            raise CommandError(str(exc), returncode=EXIT_IO) from exc
        self.stdout.write(self.style.SUCCESS(message))
