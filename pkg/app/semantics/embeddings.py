"""
Embedding vectors per vocabulary item, from a JSONL file or a remote
embedding service with an on-disk cache.
"""
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests
from django.conf import settings

from core.artifacts import atomic_write_text
from core.exceptions import (
    ArtifactIOError,
    DataValidationError,
    EmbeddingServiceError,
)
from semantics.serializers import EmbeddingRecordSerializer

logger = logging.getLogger(__name__)

ZERO_NORM = 1e-12
MAX_ATTEMPTS = 3
BACKOFF_SECONDS = 1.0
KEY_SEPARATOR = '\x1f'


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """N x D embedding vectors, row i belonging to item i"""
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[0] == 0 or \
                vectors.shape[1] == 0:
            raise DataValidationError(
                f'Embeddings must be a non-empty N x D matrix, '
                f'got shape {vectors.shape}'
            )
        if not np.all(np.isfinite(vectors)):
            bad = int(np.argwhere(~np.isfinite(vectors))[0][0])
            raise DataValidationError(f'Row {bad} has a non-finite entry')
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms <= ZERO_NORM):
            bad = int(np.flatnonzero(norms <= ZERO_NORM)[0])
            raise DataValidationError(f'Row {bad} is a zero vector')
        vectors.setflags(write=False)
        object.__setattr__(self, 'vectors', vectors)

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dimension(self):
        return self.vectors.shape[1]


@dataclass(frozen=True)
class EmbeddingServiceConfig:
    """Plain HTTP+JSON embedding service settings"""
    endpoint: str
    model: str
    batch_size: int = 64
    timeout: float = 30.0
    concurrency: int = 1
    model_field: str = 'model'
    input_field: str = 'input'
    data_field: str = 'data'
    vector_field: str = 'embedding'

    def __post_init__(self):
        if self.batch_size < 1:
            raise DataValidationError('Batch size must be at least 1')
        if self.timeout <= 0:
            raise DataValidationError('Timeout must be positive')
        if self.concurrency < 1:
            raise DataValidationError('Concurrency must be at least 1')


def load_embeddings(path, vocab):
    """Read an embeddings JSONL file and order rows by item id"""
    path = Path(path)
    rows = {}
    dimension = None
    try:
        with path.open(encoding='utf-8') as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except ValueError as exc:
                    raise DataValidationError(
                        f'{path}:{line_number}: invalid JSON: {exc}') from exc
                serializer = EmbeddingRecordSerializer(data=record)
                if not serializer.is_valid():
                    raise DataValidationError(
                        f'{path}:{line_number}: {serializer.errors}')
                item_id = serializer.validated_data['id']
                try:
                    vector = np.asarray(
                        serializer.validated_data['vector'], dtype=float)
                except (TypeError, ValueError) as exc:
                    raise DataValidationError(
                        f'{path}:{line_number}: id {item_id} has a '
                        f'non-numeric entry'
                    ) from exc
                if not np.all(np.isfinite(vector)):
                    raise DataValidationError(
                        f'{path}:{line_number}: id {item_id} has a '
                        f'non-finite entry'
                    )
                if dimension is None:
                    dimension = vector.shape[0]
                elif vector.shape[0] != dimension:
                    raise DataValidationError(
                        f'{path}:{line_number}: id {item_id} has dimension '
                        f'{vector.shape[0]}, expected {dimension}'
                    )
                if item_id in rows:
                    raise DataValidationError(
                        f'{path}:{line_number}: duplicate id {item_id}')
                if item_id >= len(vocab):
                    raise DataValidationError(
                        f'{path}:{line_number}: id {item_id} is outside the '
                        f'vocabulary of {len(vocab)} items'
                    )
                rows[item_id] = vector
    except OSError as exc:
        raise ArtifactIOError(f'Cannot read embeddings {path}: {exc}') \
            from exc

    missing = [item.id for item in vocab if item.id not in rows]
    if missing:
        raise DataValidationError(
            f'{path}: missing vectors for ids {missing[:10]}'
            + (' ...' if len(missing) > 10 else '')
        )
    matrix = EmbeddingMatrix(np.vstack([rows[i] for i in range(len(vocab))]))
    logger.info(
        'Loaded %d x %d embeddings from %s', len(matrix), matrix.dimension,
        path,
    )
    return matrix


def dump_embeddings(matrix, path):
    """Write embeddings as JSONL with shortest round-trip floats"""
    path = Path(path)
    lines = [
        json.dumps({'id': item_id, 'vector': row.tolist()})
        for item_id, row in enumerate(matrix.vectors)
    ]
    atomic_write_text(path, '\n'.join(lines) + '\n')


class EmbeddingCache:
    """One JSON vector per (model, text) key under a cache directory"""

    def __init__(self, directory):
        self.directory = Path(directory)

    @staticmethod
    def key(model, text):
        payload = f'{model}{KEY_SEPARATOR}{text}'.encode('utf-8')
        return hashlib.sha256(payload).hexdigest()

    def path_for(self, model, text):
        return self.directory / f'{self.key(model, text)}.json'

    def get(self, model, text):
        path = self.path_for(model, text)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding='utf-8'))
        except (OSError, ValueError) as exc:
            logger.warning('Ignoring unreadable cache entry %s: %s', path, exc)
            return None

    def put(self, model, text, vector):
        atomic_write_text(self.path_for(model, text), json.dumps(vector))


class EmbeddingClient:
    """Client for a provider-neutral JSON embedding endpoint"""

    def __init__(self, config, api_key=None):
        self.config = config
        self.api_key = settings.EMBED_API_KEY if api_key is None else api_key

    def _headers(self):
        headers = {'Content-Type': 'application/json'}
        if self.api_key:
            headers['Authorization'] = f'Bearer {self.api_key}'
        return headers

    def _parse(self, payload, expected):
        cfg = self.config
        try:
            data = payload[cfg.data_field]
            vectors = [entry[cfg.vector_field] for entry in data]
        except (KeyError, TypeError) as exc:
            raise EmbeddingServiceError(
                f'Response is missing {cfg.data_field}[k].'
                f'{cfg.vector_field}'
            ) from exc
        if len(vectors) != expected:
            raise EmbeddingServiceError(
                f'Expected {expected} vectors, response holds {len(vectors)}')
        return [[float(value) for value in vector] for vector in vectors]

    def embed_batch(self, texts):
        """Embed one batch, retrying failed requests with backoff"""
        cfg = self.config
        body = {cfg.model_field: cfg.model, cfg.input_field: list(texts)}
        last_error = None
        for attempt in range(MAX_ATTEMPTS):
            try:
                response = requests.post(
                    cfg.endpoint,
                    json=body,
                    headers=self._headers(),
                    timeout=cfg.timeout,
                )
                if response.status_code == 200:
                    return self._parse(response.json(), len(texts))
                last_error = f'HTTP {response.status_code}'
            except (requests.RequestException, ValueError) as exc:
                last_error = str(exc)

            if attempt + 1 < MAX_ATTEMPTS:
                delay = BACKOFF_SECONDS * 2 ** attempt
                logger.warning(
                    'Embedding request failed (%s), retrying in %.1fs',
                    last_error, delay,
                )
                time.sleep(delay)

        raise EmbeddingServiceError(
            f'Embedding request failed after {MAX_ATTEMPTS} attempts: '
            f'{last_error}'
        )


def fetch_embeddings(cfg, texts, cache, client=None):
    """Return one vector per text, serving repeats from the cache"""
    cache = cache if isinstance(cache, EmbeddingCache) \
        else EmbeddingCache(cache)
    client = client or EmbeddingClient(cfg)

    vectors = [cache.get(cfg.model, text) for text in texts]
    misses = [idx for idx, vector in enumerate(vectors) if vector is None]
    logger.info(
        '%d of %d texts served from cache', len(texts) - len(misses),
        len(texts),
    )

    batches = [
        misses[start:start + cfg.batch_size]
        for start in range(0, len(misses), cfg.batch_size)
    ]

    def run(batch):
        fetched = client.embed_batch([texts[idx] for idx in batch])
        for idx, vector in zip(batch, fetched):
            cache.put(cfg.model, texts[idx], vector)
        return batch, fetched

    if batches:
        with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
            for batch, fetched in pool.map(run, batches):
                for idx, vector in zip(batch, fetched):
                    vectors[idx] = vector

    dimensions = {len(vector) for vector in vectors}
    if len(dimensions) > 1:
        raise EmbeddingServiceError(
            f'Inconsistent vector dimensions {sorted(dimensions)}')
    return EmbeddingMatrix(np.array(vectors, dtype=float))
