"""
Django command to embed the vocabulary
"""
from core.management.base import PipelineCommand
from core.pipeline import run_embed


class Command(PipelineCommand):
    """Write embeddings for the configured text mode"""
    help = 'Embed every vocabulary item into embeddings.jsonl'

    def run(self, config, **options):
        path = run_embed(config)
        return f'Embeddings written to {path}'
