"""
Fluency statistics over retrieval traces: IRTs, cluster switches,
switch-relative IRT profiles, patch-leaving (MVT) statistics and the
deviation regression dataset.

IRTs are measured in walk steps. Unique positions are 0-based in code;
the IRT at position k is tau[k] - tau[k-1] and exists for k >= 1.
"""
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from core.exceptions import DataValidationError, EmptyProfileError
from foraging.stats import student_t_two_sided_p

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 5

# How deviation_points combines the patches of one walk
DEVIATION_AGGREGATION = 'mean_over_patches'


@dataclass(frozen=True)
class FluencyTrace:
    raw: Tuple
    unique: Tuple
    tau: Tuple[int, ...]
    walk: int = 0

    @property
    def irts(self):
        """IRT(k) for k = 2..K in 1-based terms"""
        return tuple(b - a for a, b in zip(self.tau, self.tau[1:]))

    def irt_at(self, position):
        return self.tau[position] - self.tau[position - 1]

    @property
    def mean_irt(self):
        irts = self.irts
        return sum(irts) / len(irts) if irts else None


@dataclass(frozen=True)
class SwitchAnnotation:
    """Switch flags per unique position and the patches between them.

    Patches are (start, stop) half-open ranges of unique positions.
    """
    switches: Tuple[bool, ...]
    patches: Tuple[Tuple[int, int], ...]

    @property
    def switch_positions(self):
        return [k for k, flag in enumerate(self.switches) if flag]


@dataclass(frozen=True)
class SwitchProfile:
    positions: Tuple[int, ...]
    ratios: Tuple[Optional[float], ...]
    counts: Tuple[int, ...]

    def ratio_at(self, position):
        return self.ratios[self.positions.index(position)]

    def peak_position(self):
        """Relative position with the largest mean IRT ratio"""
        observed = [
            (ratio, position)
            for position, ratio, count in zip(
                self.positions, self.ratios, self.counts)
            if count > 0
        ]
        return max(observed)[1]

    def rows(self):
        return list(zip(self.positions, self.ratios, self.counts))


@dataclass(frozen=True)
class PatchLeavingStat:
    mean_last_irt: float
    mean_global_irt: float
    ratio: float
    paired_mean_difference: float
    n_patches: int
    paired_t_statistic: Optional[float] = None
    paired_p_value: Optional[float] = None

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DeviationPoint:
    walk: int
    x: int
    y: float


@dataclass(frozen=True)
class CorpusSummary:
    walks: int
    mean_unique: float
    mean_irt: float
    switch_rate: float
    mean_patch_length: float
    perseveration_rate: float

    def as_dict(self):
        return asdict(self)


def fluency_trace(trace, walk=None):
    """Unique first occurrences with their 1-based raw indices tau"""
    steps = tuple(getattr(trace, 'steps', trace))
    if not steps:
        raise DataValidationError('Trace is empty')
    seen = set()
    unique, tau = [], []
    for index, item in enumerate(steps, start=1):
        if item not in seen:
            seen.add(item)
            unique.append(item)
            tau.append(index)
    if walk is None:
        walk = getattr(trace, 'walk', 0)
    return FluencyTrace(raw=steps, unique=tuple(unique), tau=tuple(tau),
                        walk=walk)


def detect_switches(ft, scheme):
    """Flag a switch wherever consecutive unique items share no category"""
    memberships = scheme.memberships
    switches = [False]
    for previous, item in zip(ft.unique, ft.unique[1:]):
        switches.append(not (memberships[previous] & memberships[item]))

    patches = []
    start = 0
    for position in range(1, len(switches)):
        if switches[position]:
            patches.append((start, position))
            start = position
    patches.append((start, len(switches)))
    return SwitchAnnotation(switches=tuple(switches), patches=tuple(patches))


def _relative_position(position, switch_positions):
    """Relative place of IRT(position) to its nearest switch.

    The IRT at a switch is +1 of that switch; otherwise the nearer event
    wins and ties go to the later event.
    """
    before = [s for s in switch_positions if s <= position]
    after = [s for s in switch_positions if s > position]
    best = None
    if before:
        s = before[-1]
        best = (position - s, 0, position - s + 1)
    if after:
        s = after[0]
        candidate = (s - position, -1, position - s)
        if best is None or candidate[:2] < best[:2]:
            best = candidate
    return best[2]


def switch_profile(pairs, window=DEFAULT_WINDOW):
    """Mean IRT / walk-mean IRT by position relative to cluster switches"""
    if window < 1:
        raise DataValidationError('Window radius must be at least 1')
    samples = defaultdict(list)
    any_switch = False
    for ft, annotation in pairs:
        switch_positions = annotation.switch_positions
        mean_irt = ft.mean_irt
        if not switch_positions or not mean_irt:
            continue
        any_switch = True
        for position in range(1, len(ft.unique)):
            relative = _relative_position(position, switch_positions)
            if abs(relative) <= window:
                samples[relative].append(ft.irt_at(position) / mean_irt)

    if not any_switch:
        raise EmptyProfileError(
            'No cluster switches in any walk; the switch profile is empty')

    positions = tuple(
        list(range(-window, 0)) + list(range(1, window + 1)))
    ratios = tuple(
        float(np.mean(samples[r])) if samples[r] else None
        for r in positions
    )
    counts = tuple(len(samples[r]) for r in positions)
    return SwitchProfile(positions=positions, ratios=ratios, counts=counts)


def _last_irts(ft, annotation):
    """IRT entering the final item of each patch of two or more items.

    A single-item patch has no IRT inside it: the IRT entering its item
    is the switch IRT, which the profile counts at +1.
    """
    return [
        ft.irt_at(stop - 1)
        for start, stop in annotation.patches
        if stop - start >= 2
    ]


def patch_leaving_stat(pairs):
    """Compare the last IRT in each patch with the mean global IRT"""
    last, differences, everything = [], [], []
    for ft, annotation in pairs:
        irts = ft.irts
        everything.extend(irts)
        walk_last = _last_irts(ft, annotation)
        last.extend(walk_last)
        if walk_last:
            mean_irt = ft.mean_irt
            differences.extend(value - mean_irt for value in walk_last)

    if not last:
        raise DataValidationError('No patch has a final IRT')

    mean_last = float(np.mean(last))
    mean_global = float(np.mean(everything))
    t_statistic = p_value = None
    if len(differences) >= 2:
        spread = float(np.std(differences, ddof=1))
        if spread > 0:
            t_statistic = float(
                np.mean(differences) / (spread / np.sqrt(len(differences))))
            p_value = student_t_two_sided_p(t_statistic, len(differences) - 1)
    return PatchLeavingStat(
        mean_last_irt=mean_last,
        mean_global_irt=mean_global,
        ratio=mean_last / mean_global,
        paired_mean_difference=float(np.mean(differences)),
        n_patches=len(last),
        paired_t_statistic=t_statistic,
        paired_p_value=p_value,
    )


def deviation_points(pairs):
    """Per walk: unique count against mean |last IRT - walk mean IRT|"""
    points = []
    skipped = 0
    for ft, annotation in pairs:
        walk_last = _last_irts(ft, annotation)
        if len(ft.unique) < 2 or not walk_last:
            skipped += 1
            continue
        mean_irt = ft.mean_irt
        deviation = float(np.mean([abs(v - mean_irt) for v in walk_last]))
        points.append(
            DeviationPoint(walk=ft.walk, x=len(ft.unique), y=deviation))
    if skipped:
        logger.warning(
            'Skipped %d walks without a qualifying patch', skipped)
    return points


def corpus_summary(pairs: Sequence):
    """Corpus-level retrieval statistics"""
    uniques, irts, patch_lengths = [], [], []
    switches = transitions = repeats = raw_steps = 0
    for ft, annotation in pairs:
        uniques.append(len(ft.unique))
        irts.extend(ft.irts)
        switches += sum(annotation.switches)
        transitions += len(ft.unique) - 1
        patch_lengths.extend(stop - start for start, stop in
                             annotation.patches)
        raw_steps += len(ft.raw)
        repeats += len(ft.raw) - len(ft.unique)
    if not uniques:
        raise DataValidationError('Corpus is empty')
    return CorpusSummary(
        walks=len(uniques),
        mean_unique=float(np.mean(uniques)),
        mean_irt=float(np.mean(irts)) if irts else 0.0,
        switch_rate=switches / transitions if transitions else 0.0,
        mean_patch_length=float(np.mean(patch_lengths)),
        perseveration_rate=repeats / raw_steps,
    )
