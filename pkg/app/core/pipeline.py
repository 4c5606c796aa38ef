"""
Pipeline stages behind the management commands. Each stage reads its
inputs from the run directory, writes its artifacts there and records its
wall-clock time in timings.json.
"""
import contextlib
import logging
import math
import time

import numpy as np

from core import artifacts
from core.artifacts import RunDirectory
from core.exceptions import (
    ArtifactIOError,
    ConvergenceError,
    DataValidationError,
    EmptyProfileError,
)
from core.config import UNHASHED_KEYS
from foraging.metrics import (
    DEVIATION_AGGREGATION,
    corpus_summary,
    detect_switches,
    deviation_points,
    fluency_trace,
    patch_leaving_stat,
    switch_profile,
)
from foraging.report import (
    DEVIATION_HEADER,
    PROFILE_HEADER,
    build_run_report,
    render_table,
    write_report,
)
from foraging.samplers import (
    ProfitabilityModel,
    ProposalKind,
    SamplerKind,
    WalkTrace,
    mh_transition_matrix,
    simulate,
    softmax_transition_matrix,
    stationary_distribution,
    uniform_proposal_matrix,
)
from semantics.embeddings import (
    EmbeddingCache,
    dump_embeddings,
    fetch_embeddings,
    load_embeddings,
)
from semantics.projection import tsne
from semantics.similarity import (
    additive_category_matrix,
    category_contrast,
    cosine_similarity_matrix,
    export_matrix_csv,
)
from semantics.vocabulary import compose_text, load_vocabulary

logger = logging.getLogger(__name__)


@contextlib.contextmanager
def timed(run_dir, stage):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    run_dir.record_timing(stage, elapsed)
    logger.info('Stage %s finished in %.2fs', stage, elapsed)


def _finite_or_none(value):
    return value if value is not None and math.isfinite(value) else None


def config_echo(config):
    """Config values recorded in reports, without run-local keys"""
    return {
        key: value for key, value in sorted(config.values.items())
        if key not in UNHASHED_KEYS
    }


def _load_space(config):
    vocab = load_vocabulary(config.vocabulary_path)
    matrix = load_embeddings(config.embeddings_path, vocab)
    return vocab, matrix


def run_embed(config):
    """Write embeddings for the configured text mode"""
    run_dir = RunDirectory(config.output_dir)
    with timed(run_dir, 'embed'):
        vocab = load_vocabulary(config.vocabulary_path)
        texts = [compose_text(item, config.text_mode) for item in vocab]
        target = config.embeddings_path

        if config['embed_endpoint']:
            service = config.service_config()
            matrix = fetch_embeddings(
                service, texts, EmbeddingCache(config['cache_dir']))
            dump_embeddings(matrix, target)
            source = service.model
        elif target.is_file():
            matrix = load_embeddings(target, vocab)
            source = str(target)
        else:
            raise ArtifactIOError(
                f'No embedding endpoint configured and {target} does not '
                f'exist')

        run_dir.write_json(artifacts.EMBEDDINGS_META, {
            'items': len(matrix),
            'dimension': matrix.dimension,
            'text_mode': config.text_mode.value,
            'source': source,
        }, config.hash)
    logger.info('Embedded %d items into %s', len(matrix), target)
    return target


def _stationary_record(similarity, scheme, sampler_cfg, config):
    """Stationary distribution of the kernel the sampler draws from"""
    if sampler_cfg.sampler is SamplerKind.RANDOM_WALK:
        matrix = softmax_transition_matrix(similarity, sampler_cfg.temperature)
        source = 'softmax'
    elif sampler_cfg.decay == 1.0:
        model = ProfitabilityModel.build(
            similarity, scheme, sampler_cfg.decay, sampler_cfg.floor)
        pi = np.maximum(model.base, model.floor)
        n = len(similarity)
        proposal = uniform_proposal_matrix(n) \
            if sampler_cfg.proposal is ProposalKind.UNIFORM \
            else softmax_transition_matrix(similarity,
                                           sampler_cfg.temperature)
        matrix = mh_transition_matrix(pi, proposal)
        source = 'mh_static_target'
    else:
        return {
            'source': 'mh_depleting_target',
            'converged': False,
            'applicable': False,
        }

    try:
        result = stationary_distribution(
            matrix, tol=config['power_tol'],
            max_iters=config['power_max_iters'], source=source)
    except ConvergenceError as exc:
        logger.warning('Stationary analysis skipped: %s', exc)
        return {
            'source': source,
            'converged': False,
            'applicable': True,
            'iterations': exc.iterations,
            'residual': _finite_or_none(exc.residual),
        }
    return {
        'source': result.source,
        'converged': True,
        'applicable': True,
        'iterations': result.iterations,
        'residual': result.residual,
        'probabilities': result.probabilities.tolist(),
    }


def run_simulate(config):
    """Simulate the configured sampler's walks into a trace file"""
    run_dir = RunDirectory(config.output_dir)
    sampler_cfg = config.sampler_config()
    sampler = sampler_cfg.sampler.value
    with timed(run_dir, f'simulate-{sampler}'):
        vocab, matrix = _load_space(config)
        similarity = cosine_similarity_matrix(matrix)
        traces = simulate(similarity, vocab.scheme, sampler_cfg,
                          workers=config['workers'])
        path = run_dir.write_traces(sampler, traces, config.hash)
        run_dir.write_json(
            run_dir.stationary_name(sampler),
            _stationary_record(similarity, vocab.scheme, sampler_cfg, config),
            config.hash,
        )
    return path


def _traces_from_records(records):
    return [
        WalkTrace(
            walk=record['walk'],
            seed=record['seed'],
            steps=tuple(record['steps']),
            rejected=tuple(record['rejected']),
            sampler=SamplerKind(record['sampler']),
        )
        for record in records
    ]


def run_analyze(config):
    """Fluency metrics and regression dataset for the configured sampler"""
    run_dir = RunDirectory(config.output_dir)
    sampler = config['sampler']
    with timed(run_dir, f'analyze-{sampler}'):
        vocab, matrix = _load_space(config)
        traces = _traces_from_records(
            run_dir.read_traces(sampler, expected_hash=config.hash))
        n = len(vocab)
        for trace in traces:
            if any(item >= n for item in trace.steps):
                raise DataValidationError(
                    f'Walk {trace.walk} visits an item outside the '
                    f'vocabulary of {n}')

        pairs = []
        for trace in traces:
            ft = fluency_trace(trace)
            pairs.append((ft, detect_switches(ft, vocab.scheme)))

        try:
            profile = switch_profile(pairs, window=config['window'])
        except EmptyProfileError as exc:
            raise EmptyProfileError(
                f'{exc}. Raise the temperature or the step budget, or '
                f'check that the vocabulary has more than one category'
            ) from exc
        patch = patch_leaving_stat(pairs)
        points = deviation_points(pairs)
        contrast = category_contrast(
            cosine_similarity_matrix(matrix), vocab.scheme)

        run_dir.write_csv(
            run_dir.profile_name(sampler), PROFILE_HEADER,
            [
                (position, '' if ratio is None else repr(ratio), count)
                for position, ratio, count in profile.rows()
            ],
        )
        run_dir.write_csv(
            run_dir.deviation_name(sampler), DEVIATION_HEADER,
            [(point.walk, point.x, repr(point.y)) for point in points],
        )
        run_dir.write_json(
            run_dir.patch_leaving_name(sampler),
            {
                key: _finite_or_none(value) if isinstance(value, float)
                else value
                for key, value in patch.as_dict().items()
            },
            config.hash,
        )
        summary = corpus_summary(pairs).as_dict()
        summary['deviation_aggregation'] = DEVIATION_AGGREGATION
        summary['category_contrast'] = {
            'within': _finite_or_none(contrast.within),
            'between': _finite_or_none(contrast.between),
            'difference': _finite_or_none(contrast.difference),
        }
        run_dir.write_json(run_dir.summary_name(sampler), summary,
                           config.hash)

        report = build_run_report(run_dir, config_echo(config), config.hash)
        path = write_report(report, run_dir, config['report_format'])
    return report, path


def run_project(config):
    """t-SNE coordinates plus the similarity heatmap data"""
    run_dir = RunDirectory(config.output_dir)
    with timed(run_dir, 'project'):
        vocab, matrix = _load_space(config)
        tsne_cfg = config.tsne_config()
        projected = tsne(matrix, tsne_cfg)

        rows = [
            (item.id, item.name, repr(float(x)), repr(float(y)))
            for item, (x, y) in zip(vocab, projected.coordinates)
        ]
        path = run_dir.write_csv(
            artifacts.PROJECTION, ['id', 'name', 'x', 'y'], rows)
        run_dir.write_json(artifacts.PROJECTION_META, {
            'tsne': tsne_cfg.as_dict(),
            'kl_divergence': projected.kl_divergence,
            'kl_trace': list(projected.kl_trace),
            'categories': [
                [vocab.scheme.label(c) for c in sorted(item.categories)]
                for item in vocab
            ],
        }, config.hash)

        similarity = cosine_similarity_matrix(matrix)
        export_matrix_csv(similarity.entries, vocab,
                          run_dir.path(artifacts.SIMILARITY))
        labels = config.additive_categories
        if labels:
            subset = [vocab.scheme.id_for(label) for label in labels]
            export_matrix_csv(
                additive_category_matrix(similarity, vocab.scheme, subset),
                vocab, run_dir.path(artifacts.ADDITIVE))
    return path


def run_report(config, compare=None):
    """Rebuild the report from the run directory and render the table"""
    run_dir = RunDirectory(config.output_dir)
    with timed(run_dir, 'report'):
        report = build_run_report(run_dir, config_echo(config), config.hash)
        write_report(report, run_dir, config['report_format'])
        table = render_table(report, title=f'Run {run_dir}')
        if compare is not None:
            other_dir = RunDirectory(compare)
            other = build_run_report(other_dir, {})
            table += '\n' + render_table(other, title=f'Run {other_dir}')
        artifacts.atomic_write_text(run_dir.path(artifacts.TABLE), table)
    return report, table
