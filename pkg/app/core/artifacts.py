"""
Run directory artifacts: file names, JSON/JSONL/CSV IO and config-hash
bookkeeping.
"""
import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path

from core.exceptions import (
    ArtifactIOError,
    ArtifactMismatchError,
    DataValidationError,
)
from core.serializers import TraceRecordSerializer

logger = logging.getLogger(__name__)

EMBEDDINGS = 'embeddings.jsonl'
EMBEDDINGS_META = 'embeddings.meta.json'
TIMINGS = 'timings.json'
PROJECTION = 'projection.csv'
PROJECTION_META = 'projection.json'
SIMILARITY = 'similarity.csv'
ADDITIVE = 'additive.csv'
TABLE = 'table.txt'


def atomic_write_text(path, text):
    """Write through a temp file in the same directory, then rename"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(
            dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except OSError as exc:
        raise ArtifactIOError(f'Cannot write {path}: {exc}') from exc


def dumps_json(payload):
    return json.dumps(payload, indent=2, sort_keys=True) + '\n'


class RunDirectory:
    """One run's output directory"""

    def __init__(self, root):
        self.root = Path(root)

    def __str__(self):
        return str(self.root)

    def path(self, name):
        return self.root / name

    @staticmethod
    def traces_name(sampler):
        return f'traces-{sampler}.jsonl'

    @staticmethod
    def stationary_name(sampler):
        return f'stationary-{sampler}.json'

    @staticmethod
    def profile_name(sampler):
        return f'profile-{sampler}.csv'

    @staticmethod
    def deviation_name(sampler):
        return f'deviation-{sampler}.csv'

    @staticmethod
    def patch_leaving_name(sampler):
        return f'patch-leaving-{sampler}.json'

    @staticmethod
    def summary_name(sampler):
        return f'summary-{sampler}.json'

    @staticmethod
    def report_name(fmt):
        return f'report.{fmt}'

    def exists(self, name):
        return self.path(name).is_file()

    def write_json(self, name, payload, config_hash):
        data = dict(payload, config_hash=config_hash)
        atomic_write_text(self.path(name), dumps_json(data))
        return self.path(name)

    def read_json(self, name, expected_hash=None):
        path = self.path(name)
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except OSError as exc:
            raise ArtifactIOError(f'Cannot read {path}: {exc}') from exc
        except ValueError as exc:
            raise DataValidationError(f'{path}: invalid JSON: {exc}') from exc
        if not isinstance(data, dict) or 'config_hash' not in data:
            raise DataValidationError(f'{path} carries no config_hash')
        check_hash(path, data['config_hash'], expected_hash)
        return data

    def write_csv(self, name, header, rows):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)
        atomic_write_text(self.path(name), buffer.getvalue())
        return self.path(name)

    def read_csv(self, name, header):
        path = self.path(name)
        try:
            with path.open(newline='', encoding='utf-8') as handle:
                reader = csv.reader(handle)
                rows = list(reader)
        except OSError as exc:
            raise ArtifactIOError(f'Cannot read {path}: {exc}') from exc
        if not rows or rows[0] != list(header):
            raise DataValidationError(
                f'{path}: expected header {list(header)}')
        return rows[1:]

    def write_traces(self, sampler, traces, config_hash):
        lines = [
            json.dumps({
                'walk': trace.walk,
                'seed': trace.seed,
                'steps': list(trace.steps),
                'rejected': list(trace.rejected),
                'sampler': trace.sampler.value,
                'config_hash': config_hash,
            }, separators=(',', ':'))
            for trace in traces
        ]
        name = self.traces_name(sampler)
        atomic_write_text(self.path(name), '\n'.join(lines) + '\n')
        logger.info('Wrote %d traces to %s', len(traces), self.path(name))
        return self.path(name)

    def read_traces(self, sampler, expected_hash=None):
        """Validated trace records, in file order"""
        path = self.path(self.traces_name(sampler))
        records = []
        try:
            with path.open(encoding='utf-8') as handle:
                for line_number, line in enumerate(handle, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                    except ValueError as exc:
                        raise DataValidationError(
                            f'{path}:{line_number}: invalid JSON: {exc}'
                        ) from exc
                    serializer = TraceRecordSerializer(data=record)
                    if not serializer.is_valid():
                        raise DataValidationError(
                            f'{path}:{line_number}: {serializer.errors}')
                    data = serializer.validated_data
                    check_hash(f'{path}:{line_number}',
                               data['config_hash'], expected_hash)
                    if expected_hash is None:
                        expected_hash = data['config_hash']
                    records.append(data)
        except OSError as exc:
            raise ArtifactIOError(f'Cannot read traces {path}: {exc}') \
                from exc
        if not records:
            raise DataValidationError(f'{path} holds no traces')
        return records

    def analyzed_samplers(self):
        """Samplers with a deviation dataset, sorted by name"""
        prefix, suffix = 'deviation-', '.csv'
        return sorted(
            path.name[len(prefix):-len(suffix)]
            for path in self.root.glob(f'{prefix}*{suffix}')
        )

    def config_hashes(self):
        """Every config hash named by a JSON artifact or trace line"""
        hashes = set()
        for path in sorted(self.root.glob('*.json')):
            if path.name == TIMINGS:
                continue
            try:
                data = json.loads(path.read_text(encoding='utf-8'))
            except (OSError, ValueError):
                continue
            if isinstance(data, dict) and 'config_hash' in data:
                hashes.add(data['config_hash'])
        for path in sorted(self.root.glob('traces-*.jsonl')):
            try:
                with path.open(encoding='utf-8') as handle:
                    for line in handle:
                        if line.strip():
                            hashes.add(json.loads(line).get('config_hash'))
            except (OSError, ValueError) as exc:
                raise DataValidationError(
                    f'Cannot scan {path}: {exc}') from exc
        return hashes

    def record_timing(self, stage, seconds):
        """Merge one stage's wall-clock time into timings.json"""
        path = self.path(TIMINGS)
        timings = {}
        if path.is_file():
            try:
                timings = json.loads(path.read_text(encoding='utf-8'))
            except (OSError, ValueError):
                logger.warning('Replacing unreadable %s', path)
        timings[stage] = seconds
        atomic_write_text(path, dumps_json(timings))


def check_hash(where, found, expected):
    if expected is not None and found != expected:
        raise ArtifactMismatchError(
            f'{where} was produced by config {found[:12]}, '
            f'expected {expected[:12]}'
        )
