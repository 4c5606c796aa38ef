"""
Django command to project the embeddings with t-SNE
"""
from core.management.base import PipelineCommand
from core.pipeline import run_project


class Command(PipelineCommand):
    """2-D projection and similarity heatmap data"""
    help = 'Write projection.csv, similarity.csv and additive.csv'

    def run(self, config, **options):
        path = run_project(config)
        return f'Projection written to {path}'
