"""
Vocabulary of retrievable concepts and their category scheme
"""
import csv
import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import ArtifactIOError, DataValidationError
from semantics.serializers import VocabularyRowSerializer

logger = logging.getLogger(__name__)

CSV_HEADER = ['name', 'description', 'categories']
CATEGORY_SEPARATOR = '|'


class TextMode(str, enum.Enum):
    NAME_ONLY = 'name_only'
    NAME_PLUS_DESCRIPTION = 'name_plus_description'


@dataclass(frozen=True)
class Category:
    id: int
    label: str


@dataclass(frozen=True)
class VocabularyItem:
    """One retrievable concept"""
    id: int
    name: str
    description: Optional[str]
    categories: FrozenSet[int]


@dataclass(frozen=True)
class CategoryScheme:
    """Ordered categories plus the nonexclusive per-item memberships"""
    categories: Tuple[Category, ...]
    memberships: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        ids = [category.id for category in self.categories]
        if len(set(ids)) != len(ids):
            raise DataValidationError('Category ids must be unique')
        folded = [category.label.casefold() for category in self.categories]
        if len(set(folded)) != len(folded):
            raise DataValidationError('Category labels must be unique')
        known = set(ids)
        for item_id, members in enumerate(self.memberships):
            unknown = members - known
            if unknown:
                raise DataValidationError(
                    f'Item {item_id} references unknown categories '
                    f'{sorted(unknown)}'
                )

    def __len__(self):
        return len(self.categories)

    @property
    def ids(self):
        return [category.id for category in self.categories]

    def label(self, category_id):
        for category in self.categories:
            if category.id == category_id:
                return category.label
        raise DataValidationError(f'Unknown category id {category_id}')

    def id_for(self, label):
        """Return the category id for a label, matched case-insensitively"""
        folded = label.strip().casefold()
        for category in self.categories:
            if category.label.casefold() == folded:
                return category.id
        raise DataValidationError(f'Unknown category label {label!r}')

    def members(self, category_id):
        return [
            item for item, cats in enumerate(self.memberships)
            if category_id in cats
        ]

    def shares_category(self, i, j):
        return bool(self.memberships[i] & self.memberships[j])

    def membership_matrix(self, subset=None):
        """Return the N x C 0/1 membership indicator matrix.

        Columns follow `subset` order when given, else scheme order.
        """
        columns = self.ids if subset is None else list(subset)
        unknown = set(columns) - set(self.ids)
        if unknown:
            raise DataValidationError(
                f'Unknown category ids {sorted(unknown)}')
        matrix = np.zeros((len(self.memberships), len(columns)))
        for item, cats in enumerate(self.memberships):
            for col, category_id in enumerate(columns):
                if category_id in cats:
                    matrix[item, col] = 1.0
        return matrix


@dataclass(frozen=True)
class Vocabulary:
    """Validated, immutable vocabulary"""
    items: Tuple[VocabularyItem, ...]
    scheme: CategoryScheme

    def __post_init__(self):
        for position, item in enumerate(self.items):
            if item.id != position:
                raise DataValidationError(
                    f'Item ids must be 0..N-1 in order, got {item.id} '
                    f'at position {position}'
                )
            if not item.name.strip():
                raise DataValidationError(f'Item {item.id} has a blank name')
        if len(self.scheme.memberships) != len(self.items):
            raise DataValidationError(
                'Category memberships do not cover the vocabulary')

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, item_id):
        return self.items[item_id]

    @property
    def names(self):
        return [item.name for item in self.items]

    def index_of(self, name):
        folded = name.strip().casefold()
        for item in self.items:
            if item.name.casefold() == folded:
                return item.id
        raise DataValidationError(f'Unknown item {name!r}')


def _format_errors(errors):
    return '; '.join(
        f'{field}: {" ".join(str(m) for m in messages)}'
        for field, messages in errors.items()
    )


def parse_vocabulary(rows: Iterable[dict],
                     categories: Optional[Sequence[str]] = None):
    """Build a Vocabulary from CSV dict rows.

    With `categories` given the scheme is fixed to those labels and any
    other token is an error; otherwise ids follow first appearance.
    """
    scheme_labels = []
    label_ids = {}
    fixed = categories is not None
    for label in categories or []:
        folded = label.strip().casefold()
        if folded in label_ids:
            raise DataValidationError(f'Duplicate category label {label!r}')
        label_ids[folded] = len(scheme_labels)
        scheme_labels.append(label.strip())

    items = []
    seen_names = {}
    # Row 1 is the header
    for row_number, row in enumerate(rows, start=2):
        if None in row:
            raise DataValidationError(
                f'Row {row_number}: more fields than the header')
        serializer = VocabularyRowSerializer(data=row)
        if not serializer.is_valid():
            raise DataValidationError(
                f'Row {row_number}: {_format_errors(serializer.errors)}')
        data = serializer.validated_data

        name = data['name']
        folded_name = name.casefold()
        if folded_name in seen_names:
            raise DataValidationError(
                f'Row {row_number}: duplicate name {name!r} '
                f'(first seen in row {seen_names[folded_name]})'
            )
        seen_names[folded_name] = row_number

        member_ids = set()
        for token in data['categories']:
            folded = token.casefold()
            if folded not in label_ids:
                if fixed:
                    raise DataValidationError(
                        f'Row {row_number}: unknown category token {token!r}')
                label_ids[folded] = len(scheme_labels)
                scheme_labels.append(token)
            member_ids.add(label_ids[folded])

        items.append(VocabularyItem(
            id=len(items),
            name=name,
            description=data['description'] or None,
            categories=frozenset(member_ids),
        ))

    scheme = CategoryScheme(
        categories=tuple(
            Category(id=idx, label=label)
            for idx, label in enumerate(scheme_labels)
        ),
        memberships=tuple(item.categories for item in items),
    )
    return Vocabulary(items=tuple(items), scheme=scheme)


def load_vocabulary(path, categories=None):
    """Load and validate a vocabulary CSV file"""
    path = Path(path)
    try:
        with path.open(newline='', encoding='utf-8') as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames != CSV_HEADER:
                raise DataValidationError(
                    f'{path}: expected header {",".join(CSV_HEADER)}, '
                    f'got {reader.fieldnames}'
                )
            vocab = parse_vocabulary(reader, categories=categories)
    except OSError as exc:
        raise ArtifactIOError(f'Cannot read vocabulary {path}: {exc}') \
            from exc
    except csv.Error as exc:
        raise DataValidationError(f'{path}: malformed CSV: {exc}') from exc

    logger.info(
        'Loaded %d items in %d categories from %s',
        len(vocab), len(vocab.scheme), path,
    )
    return vocab


def dump_vocabulary(vocab, path):
    """Write a vocabulary back in the format load_vocabulary reads"""
    path = Path(path)
    try:
        with path.open('w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_HEADER)
            for item in vocab:
                labels = [
                    vocab.scheme.label(category_id)
                    for category_id in sorted(item.categories)
                ]
                writer.writerow([
                    item.name,
                    item.description or '',
                    CATEGORY_SEPARATOR.join(labels),
                ])
    except OSError as exc:
        raise ArtifactIOError(f'Cannot write vocabulary {path}: {exc}') \
            from exc


def compose_text(item, mode):
    """Return the text embedded for an item"""
    mode = TextMode(mode)
    name = ' '.join(item.name.split())
    if mode is TextMode.NAME_ONLY:
        return name

    if not item.description or not item.description.strip():
        raise DataValidationError(
            f'Item {item.name!r} has no description for '
            f'{TextMode.NAME_PLUS_DESCRIPTION.value} mode'
        )
    description = ' '.join(item.description.split())
    return f'{name}. {description}'
