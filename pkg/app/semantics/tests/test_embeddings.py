"""
Tests for embedding files, the cache and the service client
"""
import json
import os
import tempfile
from unittest.mock import MagicMock, patch

import numpy as np
import requests
from django.test import SimpleTestCase, override_settings

from core.exceptions import DataValidationError, EmbeddingServiceError
from semantics.embeddings import (
    EmbeddingCache,
    EmbeddingClient,
    EmbeddingMatrix,
    EmbeddingServiceConfig,
    dump_embeddings,
    fetch_embeddings,
    load_embeddings,
)
from semantics.vocabulary import parse_vocabulary


def make_vocab(n=3):
    """Create and return a vocabulary of n uncategorized items"""
    return parse_vocabulary([
        {'name': f'item{i}', 'description': '', 'categories': ''}
        for i in range(n)
    ])


def write_jsonl(directory, records):
    """Write JSONL records and return the file path"""
    path = os.path.join(directory, 'embeddings.jsonl')
    with open(path, 'w', encoding='utf-8') as handle:
        for record in records:
            handle.write(json.dumps(record) + '\n')
    return path


def service_response(vectors, status_code=200):
    """Create a mock HTTP response holding vectors"""
    response = MagicMock()
    response.status_code = status_code
    response.json.return_value = {
        'data': [{'embedding': vector} for vector in vectors]}
    return response


class LoadEmbeddingsTests(SimpleTestCase):
    """Test reading embedding JSONL files"""

    def test_rows_ordered_by_id(self):
        """Test records in any order load into id order"""
        with tempfile.TemporaryDirectory() as tmp:
            path = write_jsonl(tmp, [
                {'id': 2, 'vector': [0.0, 1.0]},
                {'id': 0, 'vector': [1.0, 0.0]},
                {'id': 1, 'vector': [1.0, 1.0]},
            ])
            matrix = load_embeddings(path, make_vocab())

        self.assertEqual(matrix.vectors.tolist(),
                         [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        self.assertEqual(matrix.dimension, 2)

    def test_dimension_mismatch(self):
        """Test records of different lengths are rejected"""
        with tempfile.TemporaryDirectory() as tmp:
            path = write_jsonl(tmp, [
                {'id': 0, 'vector': [1.0, 0.0]},
                {'id': 1, 'vector': [1.0, 0.0, 0.0]},
                {'id': 2, 'vector': [1.0, 0.0]},
            ])
            with self.assertRaisesMessage(DataValidationError, 'dimension'):
                load_embeddings(path, make_vocab())

    def test_missing_id(self):
        """Test every vocabulary item needs a vector"""
        with tempfile.TemporaryDirectory() as tmp:
            path = write_jsonl(tmp, [
                {'id': 0, 'vector': [1.0, 0.0]},
                {'id': 1, 'vector': [0.0, 1.0]},
            ])
            with self.assertRaisesMessage(DataValidationError, 'missing'):
                load_embeddings(path, make_vocab())

    def test_duplicate_id(self):
        """Test a repeated id is rejected"""
        with tempfile.TemporaryDirectory() as tmp:
            path = write_jsonl(tmp, [
                {'id': 0, 'vector': [1.0, 0.0]},
                {'id': 0, 'vector': [0.0, 1.0]},
            ])
            with self.assertRaisesMessage(DataValidationError, 'duplicate'):
                load_embeddings(path, make_vocab(2))

    def test_zero_vector_rejected(self):
        """Test an all-zero vector fails validation"""
        with tempfile.TemporaryDirectory() as tmp:
            path = write_jsonl(tmp, [
                {'id': 0, 'vector': [1.0, 0.0]},
                {'id': 1, 'vector': [0.0, 0.0]},
            ])
            with self.assertRaisesMessage(DataValidationError, 'zero'):
                load_embeddings(path, make_vocab(2))

    def test_dump_then_load_is_exact(self):
        """Test written floats read back bit for bit"""
        rng = np.random.default_rng(3)
        matrix = EmbeddingMatrix(rng.normal(size=(3, 5)))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'embeddings.jsonl')
            dump_embeddings(matrix, path)
            again = load_embeddings(path, make_vocab())

        np.testing.assert_array_equal(again.vectors, matrix.vectors)


class EmbeddingCacheTests(SimpleTestCase):
    """Test the on-disk embedding cache"""

    def test_miss_then_hit(self):
        """Test a stored vector is returned for the same model and text"""
        with tempfile.TemporaryDirectory() as tmp:
            cache = EmbeddingCache(tmp)
            self.assertIsNone(cache.get('m', 'Dog'))

            cache.put('m', 'Dog', [0.5, 0.25])

            self.assertEqual(cache.get('m', 'Dog'), [0.5, 0.25])
            self.assertIsNone(cache.get('other', 'Dog'))

    def test_key_separates_model_and_text(self):
        """Test the key is not a plain concatenation"""
        self.assertNotEqual(EmbeddingCache.key('ab', 'c'),
                            EmbeddingCache.key('a', 'bc'))


class EmbeddingClientTests(SimpleTestCase):
    """Test the embedding service client"""

    def setUp(self):
        self.config = EmbeddingServiceConfig(
            endpoint='https://embeddings.example.com/v1', model='m',
            batch_size=2)

    @patch('semantics.embeddings.requests.post')
    def test_request_body_and_auth(self, patched_post):
        """Test the request carries the model, inputs and bearer key"""
        patched_post.return_value = service_response([[1.0, 0.0]])
        client = EmbeddingClient(self.config, api_key='secret')

        vectors = client.embed_batch(['Dog'])

        self.assertEqual(vectors, [[1.0, 0.0]])
        _, kwargs = patched_post.call_args
        self.assertEqual(kwargs['json'], {'model': 'm', 'input': ['Dog']})
        self.assertEqual(kwargs['headers']['Authorization'], 'Bearer secret')
        self.assertEqual(kwargs['timeout'], 30.0)

    @override_settings(EMBED_API_KEY='from-settings')
    @patch('semantics.embeddings.requests.post')
    def test_api_key_from_settings(self, patched_post):
        """Test the key defaults to the EMBED_API_KEY setting"""
        patched_post.return_value = service_response([[1.0]])

        EmbeddingClient(self.config).embed_batch(['Dog'])

        _, kwargs = patched_post.call_args
        self.assertEqual(kwargs['headers']['Authorization'],
                         'Bearer from-settings')

    @patch('semantics.embeddings.time.sleep')
    @patch('semantics.embeddings.requests.post')
    def test_retries_with_backoff(self, patched_post, patched_sleep):
        """Test failed requests are retried with 1s then 2s waits"""
        patched_post.side_effect = [
            requests.ConnectionError('down'),
            service_response([], status_code=503),
            service_response([[1.0, 2.0]]),
        ]

        vectors = EmbeddingClient(self.config, api_key='').embed_batch(['a'])

        self.assertEqual(vectors, [[1.0, 2.0]])
        self.assertEqual(patched_post.call_count, 3)
        self.assertEqual(
            [c.args[0] for c in patched_sleep.call_args_list], [1.0, 2.0])

    @patch('semantics.embeddings.time.sleep')
    @patch('semantics.embeddings.requests.post')
    def test_gives_up_after_three_attempts(self, patched_post, patched_sleep):
        """Test a persistently failing service raises a service error"""
        patched_post.return_value = service_response([], status_code=500)

        with self.assertRaises(EmbeddingServiceError):
            EmbeddingClient(self.config, api_key='').embed_batch(['a'])

        self.assertEqual(patched_post.call_count, 3)
        self.assertEqual(patched_sleep.call_count, 2)

    @patch('semantics.embeddings.requests.post')
    def test_vector_count_mismatch(self, patched_post):
        """Test a response with the wrong number of vectors fails"""
        patched_post.return_value = service_response([[1.0]])

        with self.assertRaises(EmbeddingServiceError):
            EmbeddingClient(self.config, api_key='').embed_batch(['a', 'b'])


class FetchEmbeddingsTests(SimpleTestCase):
    """Test batching and caching around the client"""

    def setUp(self):
        self.config = EmbeddingServiceConfig(
            endpoint='https://embeddings.example.com/v1', model='m',
            batch_size=2)

    def test_batches_misses_and_warms_cache(self):
        """Test misses go out in batches and a rerun hits the cache"""
        client = MagicMock()
        client.embed_batch.side_effect = \
            lambda texts: [[float(len(t)), 1.0] for t in texts]
        texts = ['a', 'bb', 'ccc']

        with tempfile.TemporaryDirectory() as tmp:
            first = fetch_embeddings(self.config, texts, tmp, client=client)
            self.assertEqual(client.embed_batch.call_count, 2)

            client.embed_batch.reset_mock()
            second = fetch_embeddings(self.config, texts, tmp, client=client)

        client.embed_batch.assert_not_called()
        np.testing.assert_array_equal(first.vectors, second.vectors)
        self.assertEqual(first.vectors[:, 0].tolist(), [1.0, 2.0, 3.0])

    def test_inconsistent_dimensions(self):
        """Test vectors of different dimension from the service fail"""
        client = MagicMock()
        client.embed_batch.side_effect = [[[1.0], [1.0, 2.0]]]

        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(EmbeddingServiceError):
                fetch_embeddings(self.config, ['a', 'b'], tmp, client=client)
