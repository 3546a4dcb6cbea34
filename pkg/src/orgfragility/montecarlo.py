"""Monte Carlo estimate of task-completion probability on random trees.

Trees are never materialised.  A task draws its number of input types, then
for each type draws its provider count and probes providers one by one: each
probe realises one collaboration link (operational with probability ``pi``)
and, if the link works, recursively evaluates the provider's own task.  A
type is sourced at the first working provider and a task fails at the first
unsourced type.  Since every draw is independent, skipping the draws that
would follow a decided outcome does not change the success probability.

Randomness: trial ``i`` under seed ``s`` runs a splitmix64 stream whose
state starts at ``mix64(s + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)``, where
``mix64`` is the splitmix64 output function.  Trials therefore do not share
state, and any split of the trial range across threads gives the same counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .branching import BranchingSpec, Pmf
from .errors import DomainError, InvalidSpec, ZeroTrials

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    spec: BranchingSpec
    pi: float
    trials: int
    seed: int = 0

    def __post_init__(self):
        if self.spec.is_infinite:
            raise InvalidSpec("simulation needs a finite tree depth")
        if not 0.0 <= self.pi <= 1.0:
            raise DomainError(f"culture strength {self.pi!r} outside [0, 1]")
        if not 0 <= self.seed <= _MASK64:
            raise DomainError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SimResult:
    successes: int
    trials: int
    estimate: float
    std_error: float
    seed: int


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _uniform(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    return (_mix64(state[0]) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _draw(state, support, cdf):
    if support.shape[0] == 1:
        return support[0]
    u = _uniform(state)
    for j in range(support.shape[0]):
        if u < cdf[j]:
            return support[j]
    return support[support.shape[0] - 1]


@njit(cache=True)
def _task_succeeds(level, depth, pi, state, p_sup, p_cdf, q_sup, q_cdf):
    """Depth-first evaluation of one task with an explicit stack.

    ``types_left[d]`` counts input types still to source at stack level d and
    ``provs_left[d]`` the providers not yet probed for the current type.
    Draws happen in the same order as a plain recursive evaluation.
    """
    if level >= depth:
        return True
    top = depth - level  # internal stack levels 1..top; children at top+1 are leaves
    types_left = np.empty(top + 1, dtype=np.int64)
    provs_left = np.empty(top + 1, dtype=np.int64)
    d = 1
    types_left[d] = _draw(state, p_sup, p_cdf) - 1
    provs_left[d] = _draw(state, q_sup, q_cdf)
    while True:
        sourced = False
        if provs_left[d] == 0:
            # current type failed, so the task at d failed
            if d == 1:
                return False
            d -= 1
            continue
        provs_left[d] -= 1
        if _uniform(state) < pi:
            if d == top:
                sourced = True
            else:
                d += 1
                types_left[d] = _draw(state, p_sup, p_cdf) - 1
                provs_left[d] = _draw(state, q_sup, q_cdf)
                continue
        if not sourced:
            continue
        # a type at d is sourced; finished tasks pass success up the stack
        while True:
            if types_left[d] > 0:
                types_left[d] -= 1
                provs_left[d] = _draw(state, q_sup, q_cdf)
                break
            if d == 1:
                return True
            d -= 1


@njit(cache=True)
def _trial_state(seed, index):
    state = np.empty(1, dtype=np.uint64)
    state[0] = _mix64(np.uint64(seed) + (np.uint64(index) + np.uint64(1)) * np.uint64(0x9E3779B97F4A7C15))
    return state


@njit(cache=True, nogil=True)
def _count_successes(seed, start, stop, depth, pi, p_sup, p_cdf, q_sup, q_cdf):
    hits = 0
    for i in range(start, stop):
        state = _trial_state(seed, i)
        if _task_succeeds(1, depth, pi, state, p_sup, p_cdf, q_sup, q_cdf):
            hits += 1
    return hits


def _arrays(pmf: Pmf):
    cdf = np.cumsum(np.asarray(pmf.probs, dtype=np.float64))
    cdf[-1] = 1.0
    return np.asarray(pmf.support, dtype=np.int64), cdf


def trial_stream(seed: int, index: int) -> np.ndarray:
    """Generator state for one trial; pass it to :func:`sample_task_outcome`."""
    return _trial_state(np.uint64(seed), np.uint64(index))


def sample_task_outcome(spec: BranchingSpec, pi: float, L: int, stream: np.ndarray) -> bool:
    """Simulate one root task of depth ``L``; advances ``stream`` in place."""
    if int(L) != L or L < 1:
        raise DomainError(f"depth must be a positive integer, got {L!r}")
    if not 0.0 <= pi <= 1.0:
        raise DomainError(f"culture strength {pi!r} outside [0, 1]")
    p_sup, p_cdf = _arrays(spec.p)
    q_sup, q_cdf = _arrays(spec.q)
    return bool(_task_succeeds(1, int(L), float(pi), stream, p_sup, p_cdf, q_sup, q_cdf))


def estimate_reliability(config: SimConfig, workers: int = 1) -> SimResult:
    if config.trials < 1:
        raise ZeroTrials("at least one trial is required")
    p_sup, p_cdf = _arrays(config.spec.p)
    q_sup, q_cdf = _arrays(config.spec.q)
    args = (int(config.spec.depth), float(config.pi), p_sup, p_cdf, q_sup, q_cdf)
    seed = np.uint64(config.seed)
    bounds = np.linspace(0, config.trials, max(1, workers) + 1).astype(np.int64)
    chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(chunks) == 1:
        hits = _count_successes(seed, chunks[0][0], chunks[0][1], *args)
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            hits = sum(pool.map(lambda c: _count_successes(seed, c[0], c[1], *args), chunks))
    est = hits / config.trials
    return SimResult(
        successes=int(hits),
        trials=config.trials,
        estimate=est,
        std_error=math.sqrt(est * (1.0 - est) / config.trials),
        seed=config.seed,
    )
