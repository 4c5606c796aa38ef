"""
Run report: per-sampler regression, switch profile and patch-leaving
record assembled from the analysis artifacts of a run directory.
"""
import csv
import io
import logging
from dataclasses import dataclass, field

from core import __version__
from core.artifacts import atomic_write_text, dumps_json
from core.exceptions import ArtifactMismatchError, DataValidationError
from foraging.stats import ols_regression

logger = logging.getLogger(__name__)

PROFILE_HEADER = ['relative_position', 'mean_irt_ratio', 'n']
DEVIATION_HEADER = ['walk', 'x_unique', 'y_abs_dev']
CSV_HEADER = [
    'sampler', 'slope', 'intercept', 'stderr', 't_statistic', 'p_value',
    'r_squared', 'n', 'patch_leaving_ratio', 'n_patches', 'profile_peak',
    'config_hash',
]


@dataclass
class SamplerReport:
    sampler: str
    regression: dict
    switch_profile: list
    patch_leaving: dict
    summary: dict
    stationary: dict
    artifacts: dict

    @property
    def profile_peak(self):
        observed = [
            (row['mean_irt_ratio'], row['relative_position'])
            for row in self.switch_profile if row['n'] > 0
        ]
        return max(observed)[1] if observed else None


@dataclass
class RunReport:
    config_hash: str
    config: dict
    samplers: list = field(default_factory=list)
    version: str = __version__

    def as_dict(self):
        return {
            'config_hash': self.config_hash,
            'version': self.version,
            'config': self.config,
            'samplers': {
                entry.sampler: {
                    'regression': entry.regression,
                    'switch_profile': entry.switch_profile,
                    'patch_leaving': entry.patch_leaving,
                    'summary': entry.summary,
                    'stationary': entry.stationary,
                    'artifacts': entry.artifacts,
                    'profile_peak': entry.profile_peak,
                }
                for entry in self.samplers
            },
        }


def _read_profile(run_dir, sampler):
    rows = run_dir.read_csv(run_dir.profile_name(sampler), PROFILE_HEADER)
    return [
        {
            'relative_position': int(position),
            'mean_irt_ratio': float(ratio) if ratio else None,
            'n': int(count),
        }
        for position, ratio, count in rows
    ]


def _read_deviation(run_dir, sampler):
    rows = run_dir.read_csv(run_dir.deviation_name(sampler),
                            DEVIATION_HEADER)
    return [(int(x), float(y)) for _, x, y in rows]


def _sampler_report(run_dir, sampler, config_hash):
    points = _read_deviation(run_dir, sampler)
    regression = ols_regression(points).as_dict()
    stationary_name = run_dir.stationary_name(sampler)
    artifacts = {
        'traces': run_dir.traces_name(sampler),
        'deviation': run_dir.deviation_name(sampler),
        'profile': run_dir.profile_name(sampler),
        'patch_leaving': run_dir.patch_leaving_name(sampler),
        'summary': run_dir.summary_name(sampler),
    }
    stationary = {}
    if run_dir.exists(stationary_name):
        stationary = run_dir.read_json(stationary_name, config_hash)
        stationary.pop('config_hash')
        stationary.pop('probabilities', None)
        artifacts['stationary'] = stationary_name

    patch_leaving = run_dir.read_json(
        run_dir.patch_leaving_name(sampler), config_hash)
    summary = run_dir.read_json(run_dir.summary_name(sampler), config_hash)
    for record in (patch_leaving, summary):
        record.pop('config_hash')
    return SamplerReport(
        sampler=sampler,
        regression=regression,
        switch_profile=_read_profile(run_dir, sampler),
        patch_leaving=patch_leaving,
        summary=summary,
        stationary=stationary,
        artifacts=artifacts,
    )


def build_run_report(run_dir, config_echo, expected_hash=None):
    """Assemble the report of every analyzed sampler in `run_dir`.

    All artifacts must name one config hash; with `expected_hash` it
    must also match that hash.
    """
    hashes = run_dir.config_hashes()
    if len(hashes) > 1:
        raise ArtifactMismatchError(
            f'{run_dir} mixes artifacts from configs '
            f'{sorted(h[:12] for h in hashes)}'
        )
    if not hashes:
        raise DataValidationError(f'{run_dir} holds no run artifacts')
    config_hash = hashes.pop()
    if expected_hash is not None and config_hash != expected_hash:
        raise ArtifactMismatchError(
            f'{run_dir} was produced by config {config_hash[:12]}, the '
            f'current config is {expected_hash[:12]}'
        )

    samplers = run_dir.analyzed_samplers()
    if not samplers:
        raise DataValidationError(
            f'{run_dir} has no analyzed traces; run `analyze` first')
    report = RunReport(config_hash=config_hash, config=config_echo)
    for sampler in samplers:
        report.samplers.append(_sampler_report(run_dir, sampler, config_hash))
    return report


def render_csv(report):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for entry in report.samplers:
        regression = entry.regression
        writer.writerow([
            entry.sampler,
            repr(regression['slope']),
            repr(regression['intercept']),
            repr(regression['stderr']),
            repr(regression['t_statistic']),
            repr(regression['p_value']),
            repr(regression['r_squared']),
            regression['n'],
            repr(entry.patch_leaving['ratio']),
            entry.patch_leaving['n_patches'],
            entry.profile_peak,
            report.config_hash,
        ])
    return buffer.getvalue()


def write_report(report, run_dir, fmt):
    """Write report.json or report.csv into the run directory"""
    if fmt == 'json':
        text = dumps_json(report.as_dict())
    elif fmt == 'csv':
        text = render_csv(report)
    else:
        raise DataValidationError(f'Unknown report format {fmt!r}')
    path = run_dir.path(run_dir.report_name(fmt))
    atomic_write_text(path, text)
    logger.info('Wrote %s', path)
    return path


def format_p_value(value):
    return f'{value:.4e}'


def format_coefficient(value):
    return f'{value:.4f}'


def render_table(report, title=None):
    """Sampler rows with p-value, slope and intercept, 4-decimal rounding"""
    lines = []
    if title:
        lines.append(title)
    lines.append(f'{"Sampler":<22}{"p-value":>12}{"Slope":>12}'
                 f'{"Intercept":>12}')
    for entry in report.samplers:
        regression = entry.regression
        lines.append(
            f'{entry.sampler:<22}'
            f'{format_p_value(regression["p_value"]):>12}'
            f'{format_coefficient(regression["slope"]):>12}'
            f'{format_coefficient(regression["intercept"]):>12}'
        )
    lines.append(f'config {report.config_hash[:12]}')
    return '\n'.join(lines) + '\n'
