"""
Retrieval processes over the similarity space: softmax random walks,
Metropolis-Hastings with a patch-depletion target, and power-method
stationary distributions.
"""
import bisect
import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import reduce
from typing import Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from core.exceptions import ConvergenceError, DataValidationError

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
DRAW_CHUNK = 1 << 16


class SamplerKind(str, enum.Enum):
    RANDOM_WALK = 'random_walk'
    METROPOLIS_HASTINGS = 'metropolis_hastings'


class ProposalKind(str, enum.Enum):
    UNIFORM = 'uniform'
    SOFTMAX = 'softmax'


@dataclass(frozen=True)
class SamplerConfig:
    temperature: float = 0.027
    steps: int = 300
    walks: int = 141
    seed: int = 0
    sampler: SamplerKind = SamplerKind.RANDOM_WALK
    proposal: ProposalKind = ProposalKind.UNIFORM
    decay: float = 0.8
    floor: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, 'sampler', SamplerKind(self.sampler))
        object.__setattr__(self, 'proposal', ProposalKind(self.proposal))
        if self.temperature <= 0:
            raise DataValidationError('Temperature must be positive')
        if not 0 < self.decay <= 1:
            raise DataValidationError('Decay lambda must be in (0, 1]')
        if self.floor <= 0:
            raise DataValidationError('Profitability floor must be positive')
        if self.steps < 2:
            raise DataValidationError('A walk needs at least 2 steps')
        if self.walks < 1:
            raise DataValidationError('At least one walk is required')

    def as_dict(self):
        data = asdict(self)
        data['sampler'] = self.sampler.value
        data['proposal'] = self.proposal.value
        return data


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic P(j|i); self-transitions excluded unless allowed"""
    rows: np.ndarray
    include_self: bool = False

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise DataValidationError(
                f'Transition matrix must be square, got {rows.shape}')
        if np.any(rows < 0):
            raise DataValidationError('Transition probabilities must be >= 0')
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise DataValidationError(
                f'Row {bad} sums to {sums[bad]!r}, not 1')
        if not self.include_self and np.any(np.diag(rows) != 0):
            raise DataValidationError('Self-transitions must be zero')
        rows.setflags(write=False)
        object.__setattr__(self, 'rows', rows)

    def __len__(self):
        return self.rows.shape[0]

    def sampling_table(self):
        """Cumulative rows as lists plus the fallback for u >= last cdf"""
        cumulative = np.cumsum(self.rows, axis=1)
        fallback = [int(np.flatnonzero(row > 0)[-1]) for row in self.rows]
        return cumulative.tolist(), fallback


@dataclass(frozen=True)
class WalkTrace:
    """Raw retrieval sequence of one simulated participant"""
    walk: int
    seed: int
    steps: Tuple[int, ...]
    rejected: Tuple[int, ...] = ()
    sampler: SamplerKind = SamplerKind.RANDOM_WALK

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class StationaryDistribution:
    probabilities: np.ndarray
    iterations: int
    residual: float
    source: str = 'transition'


@dataclass(frozen=True, eq=False)
class ProfitabilityModel:
    """Patch value pi(i) = max(eps, base(i) * lambda^n_c(i))"""
    base: np.ndarray
    shares: Tuple[Tuple[int, ...], ...]
    decay: float
    floor: float
    share_sets: Tuple[frozenset, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, 'share_sets', tuple(frozenset(s) for s in self.shares))

    @classmethod
    def build(cls, similarity, scheme, decay, floor):
        entries = getattr(similarity, 'entries', similarity)
        n = entries.shape[0]
        membership = scheme.membership_matrix()
        shared = (membership @ membership.T) > 0
        base = np.full(n, floor)
        for i in range(n):
            peers = np.flatnonzero(shared[i])
            peers = peers[peers != i]
            if peers.size:
                base[i] = entries[i, peers].mean()
        # An item shares its own categories, so its own retrieval counts
        shares = tuple(
            tuple(int(j) for j in np.flatnonzero(shared[i]))
            for i in range(n)
        )
        return cls(base=base, shares=shares, decay=decay, floor=floor)

    def retrieved_count(self, item, history):
        return len(self.share_sets[item] & set(history))


def profitability(item, history, model):
    """Current patch value of `item` given the unique retrievals so far"""
    n_c = model.retrieved_count(item, history)
    return max(model.floor, float(model.base[item]) * model.decay ** n_c)


def acceptance_probability(pi_i, pi_j, q_ij, q_ji):
    """A(i -> j) = min{1, pi(j) q(i|j) / (pi(i) q(j|i))}"""
    return min(1.0, (pi_j * q_ji) / (pi_i * q_ij))


def softmax_transition_matrix(similarity, temperature, include_self=False):
    """P(j|i) proportional to exp(sim(i, j) / T), max-subtracted per row"""
    if temperature <= 0:
        raise DataValidationError('Temperature must be positive')
    entries = np.asarray(getattr(similarity, 'entries', similarity),
                         dtype=float)
    n = entries.shape[0]
    if n < 2 and not include_self:
        raise DataValidationError('Need at least two items to walk between')

    logits = entries / temperature
    if not include_self:
        logits = logits.copy()
        np.fill_diagonal(logits, -np.inf)
    logits = logits - logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    rows = weights / weights.sum(axis=1, keepdims=True)
    return TransitionMatrix(rows, include_self=include_self)


def uniform_proposal_matrix(n):
    rows = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(rows, 0.0)
    return TransitionMatrix(rows)


def mh_transition_matrix(pi, proposal):
    """Analytic MH kernel; rejected mass stays on the diagonal"""
    pi = np.asarray(pi, dtype=float)
    q = getattr(proposal, 'rows', proposal)
    n = pi.shape[0]
    kernel = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and q[i, j] > 0:
                kernel[i, j] = q[i, j] * acceptance_probability(
                    pi[i], pi[j], q[i, j], q[j, i])
        kernel[i, i] = max(0.0, 1.0 - kernel[i].sum())
    return TransitionMatrix(kernel, include_self=True)


def random_walk(transitions, start, cfg, rng, walk=0, seed=0):
    """Walk `cfg.steps` items by inverse-CDF draws from the current row"""
    n = len(transitions)
    if not 0 <= start < n:
        raise DataValidationError(f'Start item {start} out of range')
    table, fallback = transitions.sampling_table()

    steps = [int(start)]
    current = int(start)
    for u in rng.random(cfg.steps - 1).tolist():
        nxt = bisect.bisect_right(table[current], u)
        if nxt >= n:
            nxt = fallback[current]
        steps.append(nxt)
        current = nxt
    return WalkTrace(walk=walk, seed=seed, steps=tuple(steps),
                     sampler=SamplerKind.RANDOM_WALK)


def mh_walk(similarity, scheme, cfg, rng, proposal=None, model=None,
            walk=0, seed=0, start=None):
    """Metropolis-Hastings walk whose target depletes as patches are used.

    Rejections append the current item again and record its step index.
    """
    entries = getattr(similarity, 'entries', similarity)
    n = entries.shape[0]
    if model is None:
        model = ProfitabilityModel.build(
            similarity, scheme, cfg.decay, cfg.floor)
    if proposal is None:
        proposal = uniform_proposal_matrix(n) \
            if cfg.proposal is ProposalKind.UNIFORM \
            else softmax_transition_matrix(similarity, cfg.temperature)

    uniform = cfg.proposal is ProposalKind.UNIFORM
    if not uniform:
        table, fallback = proposal.sampling_table()
        q = proposal.rows.tolist()
    base = model.base.tolist()
    shares = model.shares
    decay, floor = model.decay, model.floor
    static = decay == 1.0

    counts = [0] * n
    retrieved = bytearray(n)

    def retrieve(item):
        if not retrieved[item]:
            retrieved[item] = 1
            if not static:
                for peer in shares[item]:
                    counts[peer] += 1

    def target(item):
        if static:
            return max(floor, base[item])
        return max(floor, base[item] * decay ** counts[item])

    current = int(rng.integers(n)) if start is None else int(start)
    retrieve(current)
    steps = [current]
    rejected = []

    remaining = cfg.steps - 1
    while remaining > 0:
        size = min(remaining, DRAW_CHUNK)
        draws = rng.random((size, 2)).tolist()
        for u, v in draws:
            if uniform:
                k = int(u * (n - 1))
                candidate = k + (k >= current)
                ratio = target(candidate) / target(current)
            else:
                candidate = bisect.bisect_right(table[current], u)
                if candidate >= n:
                    candidate = fallback[current]
                ratio = (target(candidate) * q[candidate][current]) / \
                    (target(current) * q[current][candidate])

            if v < ratio:
                current = candidate
                retrieve(current)
            else:
                rejected.append(len(steps))
            steps.append(current)
        remaining -= size

    return WalkTrace(walk=walk, seed=seed, steps=tuple(steps),
                     rejected=tuple(rejected),
                     sampler=SamplerKind.METROPOLIS_HASTINGS)


def walk_seed(master_seed, walk):
    """Per-walk 64-bit seed derived from (master seed, walk index)"""
    sequence = np.random.SeedSequence([int(master_seed), int(walk)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def simulate(similarity, scheme, cfg, workers=1):
    """Run cfg.walks independent walks and return them by walk index"""
    entries = getattr(similarity, 'entries', similarity)
    n = entries.shape[0]
    if cfg.sampler is SamplerKind.RANDOM_WALK:
        transitions = softmax_transition_matrix(similarity, cfg.temperature)
    else:
        model = ProfitabilityModel.build(
            similarity, scheme, cfg.decay, cfg.floor)
        proposal = uniform_proposal_matrix(n) \
            if cfg.proposal is ProposalKind.UNIFORM \
            else softmax_transition_matrix(similarity, cfg.temperature)

    def run(walk):
        seed = walk_seed(cfg.seed, walk)
        rng = np.random.default_rng(seed)
        if cfg.sampler is SamplerKind.RANDOM_WALK:
            start = int(rng.integers(n))
            return random_walk(transitions, start, cfg, rng,
                               walk=walk, seed=seed)
        return mh_walk(similarity, scheme, cfg, rng, proposal=proposal,
                       model=model, walk=walk, seed=seed)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        traces = list(pool.map(run, range(cfg.walks)))
    logger.info('Simulated %d %s walks of %d steps', len(traces),
                cfg.sampler.value, cfg.steps)
    return sorted(traces, key=lambda trace: trace.walk)


def chain_period(rows):
    """Period of the chain over the states reachable from state 0"""
    rows = np.asarray(rows)
    graph = csr_matrix((rows > 0).astype(float))
    order, predecessors = breadth_first_order(
        graph, 0, directed=True, return_predecessors=True)
    level = np.full(rows.shape[0], -1)
    level[0] = 0
    for node in order[1:]:
        level[node] = level[predecessors[node]] + 1

    sources, targets = np.nonzero(rows > 0)
    reached = (level[sources] >= 0) & (level[targets] >= 0)
    gaps = np.abs(level[sources[reached]] + 1 - level[targets[reached]])
    return reduce(math.gcd, (int(g) for g in gaps), 0) or 1


def stationary_distribution(matrix, tol=1e-10, max_iters=10000,
                            source='transition'):
    """Power iteration p_{k+1} = p_k P from the uniform vector.

    Rows are normalised first, so a raw similarity matrix can be passed.
    """
    rows = np.array(getattr(matrix, 'rows', matrix), dtype=float)
    if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
        raise DataValidationError('Matrix must be square')
    if np.any(rows < 0):
        raise DataValidationError(
            'Power iteration needs a non-negative matrix')
    sums = rows.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise DataValidationError('Every row needs positive mass')
    rows = rows / sums
    n = rows.shape[0]

    period = chain_period(rows)
    if period > 1:
        start = np.zeros(n)
        start[0] = 1.0
        residual = float(np.abs(start @ rows - start).sum())
        raise ConvergenceError(
            f'Chain has period {period}; power iteration oscillates',
            residual=residual, iterations=0,
        )

    p = np.full(n, 1.0 / n)
    residual = float('inf')
    for iteration in range(1, max_iters + 1):
        nxt = p @ rows
        nxt = nxt / nxt.sum()
        residual = float(np.abs(nxt - p).sum())
        p = nxt
        if residual <= tol:
            return StationaryDistribution(
                probabilities=p, iterations=iteration, residual=residual,
                source=source,
            )
    raise ConvergenceError(
        f'Power iteration did not converge in {max_iters} iterations '
        f'(residual {residual:.3e})',
        residual=residual, iterations=max_iters,
    )
