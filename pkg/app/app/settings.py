"""
Django settings for the semantic foraging toolkit.

The project has no web surface and no database; Django provides the
management command runner, settings, logging config and the test runner.
Pipeline defaults live in FORAGING and are overridden per run by the
config file and command-line flags.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('SECRET_KEY', 'changethis')

DEBUG = bool(int(os.environ.get('DEBUG', 0)))

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'core',
    'semantics',
    'foraging',
]

# Nothing is persisted outside the run directory
DATABASES = {}

TIME_ZONE = 'UTC'

USE_TZ = True


# Logging
# https://docs.djangoproject.com/en/4.1/topics/logging/

LOG_LEVEL = os.environ.get('FORAGING_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'core': {'handlers': ['console'], 'level': LOG_LEVEL},
        'semantics': {'handlers': ['console'], 'level': LOG_LEVEL},
        'foraging': {'handlers': ['console'], 'level': LOG_LEVEL},
    },
}


# Pipeline defaults. Keys match the run config file keys and the
# command-line flag names.

FORAGING = {
    'text_mode': 'name_only',
    'embed_endpoint': os.environ.get(
        'EMBED_ENDPOINT', 'https://api.openai.com/v1/embeddings'),
    'embed_model': os.environ.get('EMBED_MODEL', 'text-embedding-3-large'),
    'embed_batch_size': 64,
    'embed_timeout': 30.0,
    'embed_concurrency': 1,
    'embed_model_field': 'model',
    'embed_input_field': 'input',
    'embed_data_field': 'data',
    'embed_vector_field': 'embedding',
    'cache_dir': os.environ.get('FORAGING_CACHE_DIR', '.embedding-cache'),
    'temperature': 0.027,
    'steps': 300,
    'walks': 141,
    'seed': 0,
    'sampler': 'random_walk',
    'proposal': 'uniform',
    'lambda': 0.8,
    'epsilon': 1e-6,
    'workers': 1,
    'power_tol': 1e-10,
    'power_max_iters': 10000,
    'window': 5,
    'perplexity': 30.0,
    'tsne_iterations': 1000,
    'learning_rate': 200.0,
    'momentum_initial': 0.5,
    'momentum_final': 0.8,
    'momentum_switch': 250,
    'exaggeration': 12.0,
    'exaggeration_iterations': 250,
    'tsne_metric': 'euclidean',
    'additive_categories': '',
    'output_dir': 'runs/default',
    'report_format': 'json',
}

# Read at call time by the embedding client, never written to artifacts
EMBED_API_KEY = os.environ.get('EMBED_API_KEY', '')
