"""
Cosine similarity structure over the embedding matrix
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from core.exceptions import (
    ArtifactIOError,
    DataValidationError,
    NumericalError,
)
from semantics.embeddings import ZERO_NORM

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """N x N cosine similarities aligned to item ids"""
    entries: np.ndarray
    item_ids: Tuple[int, ...]

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DataValidationError(
                f'Similarity matrix must be square, got {entries.shape}')
        if len(self.item_ids) != entries.shape[0]:
            raise DataValidationError('Item ids do not match matrix size')
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)
        object.__setattr__(self, 'item_ids', tuple(self.item_ids))

    def __len__(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class CategoryContrast:
    within: float
    between: float

    @property
    def difference(self):
        return self.within - self.between


def cosine_similarity_matrix(embeddings):
    """Return sim(i, j) = v_i . v_j / (|v_i| |v_j|) for all pairs"""
    vectors = embeddings.vectors
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms <= ZERO_NORM):
        bad = int(np.flatnonzero(norms <= ZERO_NORM)[0])
        raise NumericalError(f'Row {bad} has zero norm')

    unit = vectors / norms[:, np.newaxis]
    entries = unit @ unit.T
    entries = (entries + entries.T) / 2.0
    np.fill_diagonal(entries, 1.0)
    return SimilarityMatrix(entries, tuple(range(len(vectors))))


def additive_category_matrix(similarity, scheme, subset):
    """Sum S[i][j] once for every subset category shared by i and j"""
    subset = sorted(set(subset))
    if not subset:
        raise DataValidationError('Category subset must not be empty')
    unknown = set(subset) - set(scheme.ids)
    if unknown:
        raise DataValidationError(f'Unknown category ids {sorted(unknown)}')
    membership = scheme.membership_matrix(subset)
    shared = membership @ membership.T
    return similarity.entries * shared


def category_contrast(similarity, scheme):
    """Mean similarity of pairs sharing a category versus pairs that don't"""
    n = len(similarity)
    membership = scheme.membership_matrix()
    shared = (membership @ membership.T) > 0
    off_diagonal = ~np.eye(n, dtype=bool)
    within = shared & off_diagonal
    between = ~shared & off_diagonal
    entries = similarity.entries
    return CategoryContrast(
        within=float(entries[within].mean()) if within.any() else float('nan'),
        between=float(entries[between].mean()) if between.any()
        else float('nan'),
    )


def export_matrix_csv(matrix, vocab, path):
    """Write an N x N matrix with item-name header and row labels"""
    matrix = np.asarray(matrix, dtype=float)
    n = len(vocab)
    if matrix.shape != (n, n):
        raise DataValidationError(
            f'Matrix shape {matrix.shape} does not match the vocabulary '
            f'of {n} items'
        )
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(['name'] + vocab.names)
            for item, row in zip(vocab, matrix):
                writer.writerow([item.name] + [repr(float(v)) for v in row])
    except OSError as exc:
        raise ArtifactIOError(f'Cannot write matrix {path}: {exc}') from exc
    logger.info('Wrote %d x %d matrix to %s', n, n, path)


def load_matrix_csv(path):
    """Read a matrix written by export_matrix_csv"""
    path = Path(path)
    try:
        with path.open(newline='', encoding='utf-8') as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise ArtifactIOError(f'Cannot read matrix {path}: {exc}') from exc
    if not rows:
        raise DataValidationError(f'{path} is empty')
    names = rows[0][1:]
    try:
        values = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    except ValueError as exc:
        raise DataValidationError(f'{path}: {exc}') from exc
    if values.shape != (len(names), len(names)):
        raise DataValidationError(f'{path}: matrix is not square')
    return names, values
