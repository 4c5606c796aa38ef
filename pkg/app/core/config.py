"""
Run configuration: settings defaults, a key = value file and flag overrides,
validated into a RunConfig.
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from django.conf import settings

from core.exceptions import ArtifactIOError, ConfigurationError
from core.serializers import RunConfigSerializer
from foraging.samplers import SamplerConfig
from semantics.embeddings import EmbeddingServiceConfig
from semantics.projection import TsneConfig
from semantics.vocabulary import TextMode

logger = logging.getLogger(__name__)

# Keys that cannot change any result and so stay out of the hash
UNHASHED_KEYS = frozenset({
    'output_dir', 'report_format', 'workers', 'cache_dir',
    'embed_concurrency', 'sampler',
})


def parse_config_file(path):
    """Read flat `key = value` lines; `#` starts a comment"""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ArtifactIOError(f'Cannot read config {path}: {exc}') from exc

    known = set(settings.FORAGING) | {'vocabulary', 'embeddings'}
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigurationError(
                f'{path}:{number}: expected `key = value`, '
                f'got {raw.strip()!r}')
        if key not in known:
            raise ConfigurationError(f'{path}:{number}: unknown key {key!r}')
        if key in values:
            raise ConfigurationError(f'{path}:{number}: duplicate key {key!r}')
        values[key] = value.strip()
    return values


def _format_errors(errors):
    if isinstance(errors, dict):
        return '; '.join(
            f'{field}: {" ".join(str(m) for m in messages)}'
            for field, messages in errors.items()
        )
    return ' '.join(str(m) for m in errors)


def config_hash(values):
    """SHA-256 over the canonical JSON of the result-relevant keys"""
    relevant = {
        key: value for key, value in values.items()
        if key not in UNHASHED_KEYS
    }
    canonical = json.dumps(relevant, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with typed views per stage"""
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def hash(self):
        return config_hash(self.values)

    @property
    def output_dir(self):
        return Path(self.values['output_dir'])

    @property
    def vocabulary_path(self):
        return Path(self.values['vocabulary'])

    @property
    def embeddings_path(self):
        """Configured embeddings file, else the run directory's own"""
        if self.values['embeddings']:
            return Path(self.values['embeddings'])
        return self.output_dir / 'embeddings.jsonl'

    @property
    def text_mode(self):
        return TextMode(self.values['text_mode'])

    @property
    def additive_categories(self):
        return [
            label.strip()
            for label in self.values['additive_categories'].split('|')
            if label.strip()
        ]

    def sampler_config(self, sampler=None):
        v = self.values
        return SamplerConfig(
            temperature=v['temperature'],
            steps=v['steps'],
            walks=v['walks'],
            seed=v['seed'],
            sampler=sampler or v['sampler'],
            proposal=v['proposal'],
            decay=v['lambda'],
            floor=v['epsilon'],
        )

    def service_config(self):
        v = self.values
        return EmbeddingServiceConfig(
            endpoint=v['embed_endpoint'],
            model=v['embed_model'],
            batch_size=v['embed_batch_size'],
            timeout=v['embed_timeout'],
            concurrency=v['embed_concurrency'],
            model_field=v['embed_model_field'],
            input_field=v['embed_input_field'],
            data_field=v['embed_data_field'],
            vector_field=v['embed_vector_field'],
        )

    def tsne_config(self):
        v = self.values
        return TsneConfig(
            perplexity=v['perplexity'],
            iterations=v['tsne_iterations'],
            learning_rate=v['learning_rate'],
            momentum_initial=v['momentum_initial'],
            momentum_final=v['momentum_final'],
            momentum_switch=v['momentum_switch'],
            exaggeration=v['exaggeration'],
            exaggeration_iterations=v['exaggeration_iterations'],
            seed=v['seed'],
            metric=v['tsne_metric'],
        )


def load_run_config(path=None, overrides=None):
    """Merge settings < file < overrides and validate the result"""
    data = dict(settings.FORAGING)
    if path is not None:
        data.update(parse_config_file(path))
    data.update({
        key: value for key, value in (overrides or {}).items()
        if value is not None
    })

    serializer = RunConfigSerializer(data=data)
    if not serializer.is_valid():
        raise ConfigurationError(
            f'Invalid run config: {_format_errors(serializer.errors)}')
    values = dict(serializer.validated_data)
    config = RunConfig(values=values)
    logger.info('Loaded run config %s (hash %s)', path or '<defaults>',
                config.hash[:12])
    return config
