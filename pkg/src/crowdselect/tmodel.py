"""Task-driven crowd selection.

Each candidate carries a probability of holding a positive opinion on the
task; the goal is a size-k subset maximizing the chance that at least theta1
positive and theta0 negative opinions show up. Solvers: exact enumeration,
two knapsack reductions driven by the Poisson and Binomial approximation
peaks, simulated annealing over the Normal-approximate or exact objective,
and a random baseline.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from . import pbd
from .errors import EnumerationLimitError, TimeBudgetError
from .pbd import DemandWindow, WindowKernel
from .smodel import ENUMERATION_LIMIT, _index_combo_blocks

# Annealing defaults: initial/terminal temperature, sweeps per level, cooling ratio.
SA_T_INI = 1.0
SA_T_END = 1e-4
SA_REPEATS = 1000
SA_COOLING = 0.9


@dataclass(frozen=True, eq=False)
class CandidatePool:
    """Candidate workers: parallel tuples of ids and positive-opinion probabilities."""

    ids: tuple[Hashable, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = pbd.as_prob_array(self.probs)
        object.__setattr__(self, "probs", probs)
        if len(self.ids) != probs.size:
            raise ValueError("ids and probabilities must have equal length")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("worker ids must be unique")

    @classmethod
    def from_probs(cls, probs: Sequence[float]) -> "CandidatePool":
        arr = pbd.as_prob_array(probs)
        return cls(ids=tuple(range(arr.size)), probs=arr)

    def __len__(self) -> int:
        return self.probs.size

    def subset_ids(self, indices: Sequence[int]) -> tuple[Hashable, ...]:
        return tuple(self.ids[i] for i in indices)


@dataclass(frozen=True)
class SaParams:
    """Annealing schedule: geometric cooling from t_ini to t_end, r sweeps per level."""

    t_ini: float = SA_T_INI
    t_end: float = SA_T_END
    r: int = SA_REPEATS
    c: float = SA_COOLING
    seed: int = 0

    def __post_init__(self):
        if not self.t_ini > self.t_end > 0.0:
            raise ValueError("need t_ini > t_end > 0")
        if self.r < 0:
            raise ValueError("sweep count r must be non-negative")
        if not 0.0 < self.c < 1.0:
            raise ValueError("cooling ratio c must lie in (0, 1)")


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one solver run.

    tau is always the exact window probability of the returned subset
    (recomputed from the PMF), so results of different solvers compare on the
    same scale; objective is whatever internal score the solver maximized.
    """

    subset: tuple[Hashable, ...]
    tau: float
    objective: float
    method: str
    wall_time: float
    indices: tuple[int, ...] = field(default=(), repr=False)


def _result(
    pool: CandidatePool,
    window: DemandWindow,
    indices: Sequence[int],
    objective: float | None,
    method: str,
    started: float,
) -> SelectionResult:
    idx = tuple(sorted(int(i) for i in indices))
    tau = pbd.window_prob(pool.probs[list(idx)], window)
    return SelectionResult(
        subset=pool.subset_ids(idx),
        tau=tau,
        objective=tau if objective is None else float(objective),
        method=method,
        wall_time=time.perf_counter() - started,
        indices=idx,
    )


def _check_feasible(pool: CandidatePool, window: DemandWindow) -> None:
    if window.k > len(pool):
        raise ValueError(f"cannot select k = {window.k} from {len(pool)} candidates")


def exact_select(
    pool: CandidatePool,
    window: DemandWindow,
    time_budget_s: float | None = None,
) -> SelectionResult:
    """Optimal subset by enumerating every size-k candidate set.

    Ties resolve to the first subset in lexicographic index order. Guarded by
    the enumeration limit and an optional wall-clock budget.
    """
    started = time.perf_counter()
    _check_feasible(pool, window)
    n, k = len(pool), window.k
    total = math.comb(n, k)
    if total > ENUMERATION_LIMIT:
        raise EnumerationLimitError(
            f"C({n}, {k}) = {total} subsets exceeds the enumeration limit {ENUMERATION_LIMIT}"
        )
    kernel = WindowKernel(window)
    best_tau = -math.inf
    best: tuple[int, ...] | None = None
    for block in _index_combo_blocks(n, k):
        taus = kernel.tau_many(pool.probs[block])
        top = int(np.argmax(taus))
        if taus[top] > best_tau:
            best_tau = float(taus[top])
            best = tuple(int(i) for i in block[top])
        if time_budget_s is not None:
            elapsed = time.perf_counter() - started
            if elapsed > time_budget_s:
                raise TimeBudgetError(time_budget_s, elapsed)
    assert best is not None
    return _result(pool, window, best, best_tau, "exact", started)


# Exact knapsack enumerates 2**ceil(n/2) half-pool subsets; beyond this the
# tables no longer fit comfortably in memory.
KNAPSACK_LIMIT = 44


def _subset_sum_tables(
    weights: np.ndarray,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per-size subset sums of one half-pool: size -> (sorted sums, matching bitmasks)."""
    m = weights.size
    tables: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    total = 1 << m
    chunk = 1 << 18
    shifts = np.arange(m, dtype=np.uint32)
    sums = np.empty(total)
    sizes = np.empty(total, dtype=np.int8)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.uint32)
        bits = ((codes[:, None] >> shifts) & 1).astype(bool)
        sums[start : start + codes.size] = bits @ weights
        sizes[start : start + codes.size] = bits.sum(axis=1)
    all_codes = np.arange(total, dtype=np.uint32)
    for size in range(m + 1):
        mask = sizes == size
        bucket_sums = sums[mask]
        bucket_codes = all_codes[mask]
        order = np.argsort(bucket_sums, kind="stable")
        tables[size] = (bucket_sums[order], bucket_codes[order])
    return tables


def _code_to_indices(code: int, offset: int) -> list[int]:
    out = []
    position = 0
    while code:
        if code & 1:
            out.append(offset + position)
        code >>= 1
        position += 1
    return out


def exact_knapsack(
    k: int, capacity: float, pool: CandidatePool
) -> tuple[int, ...] | None:
    """Size-k subset maximizing total opinion mass without exceeding capacity.

    Candidates are sorted ascending by probability so infeasibility is checked
    against the minimal attainable load (the k lightest workers); returns None
    when even they overflow. Recursive include/exclude search is correct here
    but degenerates to full enumeration whenever the capacity falls in the
    bulk of the subset-sum distribution (no useful value bound exists), so the
    search instead splits the pool and combines per-size subset-sum tables of
    the two halves, which is exact in O(2^(n/2)) time and space.
    """
    n = len(pool)
    if k < 0 or k > n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    if k == 0:
        return () if capacity >= 0.0 else None
    if n > KNAPSACK_LIMIT:
        raise EnumerationLimitError(
            f"exact k-item knapsack limited to {KNAPSACK_LIMIT} candidates, got {n}"
        )
    order = np.argsort(pool.probs, kind="stable")
    weights = pool.probs[order]
    prefix = np.concatenate(([0.0], np.cumsum(weights)))
    if prefix[k] > capacity:  # even the lightest selection overflows
        return None
    if float(prefix[n] - prefix[n - k]) <= capacity:  # the heaviest selection fits
        return tuple(sorted(int(order[i]) for i in range(n - k, n)))

    half = n // 2
    light = _subset_sum_tables(weights[:half])
    heavy = _subset_sum_tables(weights[half:])
    best_value = -math.inf
    best_light = best_heavy = 0
    for heavy_size, (heavy_sums, heavy_codes) in heavy.items():
        light_size = k - heavy_size
        if light_size < 0 or light_size > half:
            continue
        light_sums, light_codes = light[light_size]
        budgets = capacity - heavy_sums
        pos = np.searchsorted(light_sums, budgets, side="right") - 1
        valid = pos >= 0
        if not valid.any():
            continue
        values = np.where(valid, light_sums[np.maximum(pos, 0)] + heavy_sums, -np.inf)
        top = int(np.argmax(values))
        if values[top] > best_value:
            best_value = float(values[top])
            best_light = int(light_codes[pos[top]])
            best_heavy = int(heavy_codes[top])
    assert best_value > -math.inf, "minimal-load check guarantees a feasible pairing"
    chosen = _code_to_indices(best_light, 0) + _code_to_indices(best_heavy, half)
    return tuple(sorted(int(order[i]) for i in chosen))


def _two_sided_knapsack(
    pool: CandidatePool,
    window: DemandWindow,
    capacity: float,
    score_of_mass,
    method: str,
) -> SelectionResult:
    """Shared pipeline of the Poisson/Binomial solvers.

    Finds the feasible subset whose opinion mass lands just below the peak
    capacity, and (through the complement construction) the one just above,
    then keeps whichever scores higher under the approximation.
    """
    started = time.perf_counter()
    _check_feasible(pool, window)
    n, k = len(pool), window.k
    below = exact_knapsack(k, capacity, pool)
    complement = exact_knapsack(n - k, float(pool.probs.sum()) - capacity, pool)
    above = (
        None
        if complement is None
        else tuple(sorted(set(range(n)) - set(complement)))
    )
    sides = [s for s in (below, above) if s is not None]
    assert sides, "a feasible k-subset always exists on at least one side of the peak"
    if below is not None and above is not None:
        score_below = score_of_mass(float(pool.probs[list(below)].sum()))
        score_above = score_of_mass(float(pool.probs[list(above)].sum()))
        chosen, objective = (
            (below, score_below) if score_below > score_above else (above, score_above)
        )
    else:
        chosen = sides[0]
        objective = score_of_mass(float(pool.probs[list(chosen)].sum()))
    return _result(pool, window, chosen, objective, method, started)


def _poisson_pmf_at(i: int, rate: float) -> float:
    if rate == 0.0:
        return 1.0 if i == 0 else 0.0
    return math.exp(i * math.log(rate) - math.lgamma(i + 1) - rate)


def select_poisson(pool: CandidatePool, window: DemandWindow) -> SelectionResult:
    """Knapsack selection against the Poisson approximation peak.

    A zero-width window makes the peak formula (and the window score)
    degenerate; in that case the target becomes theta1, the mode of the
    approximating Poisson, scored by its mass at theta1.
    """
    if window.width > 0:
        capacity = pbd.poisson_window_peak(window)
        score = lambda mass: pbd.poisson_window_prob(mass, window)
    else:
        capacity = float(window.theta1)
        score = lambda mass: _poisson_pmf_at(window.theta1, mass)
    return _two_sided_knapsack(pool, window, capacity, score, "poisson")


def select_binomial(pool: CandidatePool, window: DemandWindow) -> SelectionResult:
    """Knapsack selection against the Binomial approximation peak.

    Same pipeline as the Poisson variant with the Binomial peak capacity and
    score; the zero-width special case targets theta1 and scores by the
    Binomial mass there.
    """
    k = window.k
    if window.width > 0:
        _, capacity = pbd.binomial_window_peak(k, window)
        score = lambda mass: pbd.binomial_window_prob(mass / k, k, window)
    else:
        capacity = float(window.theta1)
        score = lambda mass: pbd.binomial_pmf(window.theta1, k, mass / k)
    return _two_sided_knapsack(pool, window, capacity, score, "binomial")


def sa_select(
    pool: CandidatePool,
    window: DemandWindow,
    objective: str = "dftcf",
    params: SaParams | None = None,
) -> SelectionResult:
    """Simulated annealing over size-k subsets.

    Each step swaps a random handful of members for outsiders; improvements
    (including ties) are always kept, degradations survive with probability
    exp(delta / T) under geometric cooling. objective selects the score:
    'normal' uses the continuity-corrected Normal approximation, 'dftcf' the
    exact window probability. Fully deterministic for a fixed params.seed.
    """
    started = time.perf_counter()
    _check_feasible(pool, window)
    if params is None:
        params = SaParams()
    n, k = len(pool), window.k
    # plain floats: the annealing loop evaluates the objective tens of
    # thousands of times, and numpy scalar arithmetic is an order of
    # magnitude slower there
    probs = [float(p) for p in pool.probs]

    if objective == "dftcf":
        kernel = WindowKernel(window)

        def score(subset: list[int]) -> float:
            return kernel.tau([probs[i] for i in subset])

    elif objective == "normal":

        def score(subset: list[int]) -> float:
            mean = 0.0
            var = 0.0
            for i in subset:
                p = probs[i]
                mean += p
                var += p * (1.0 - p)
            return pbd.normal_window_raw(mean, math.sqrt(var), window)

    else:
        raise ValueError(f"unknown objective {objective!r}; use 'normal' or 'dftcf'")

    method = f"{objective}-sa"
    if n == k:
        full = list(range(n))
        return _result(pool, window, full, score(full), method, started)

    rng = random.Random(params.seed)
    current = sorted(rng.sample(range(n), k))
    outside = sorted(set(range(n)) - set(current))
    current_score = score(current)
    swap_cap = max(1, min(k, n - k) // 2)

    temp = params.t_ini
    while temp > params.t_end:
        for _ in range(params.r):
            swaps = rng.randint(1, swap_cap)
            incoming = rng.sample(outside, swaps)
            keep = rng.sample(current, k - swaps)
            candidate = keep + incoming
            candidate_score = score(candidate)
            delta = candidate_score - current_score
            if delta >= 0.0 or rng.random() < math.exp(delta / temp):
                kept = set(keep)
                removed = [w for w in current if w not in kept]
                came_in = set(incoming)
                outside = [w for w in outside if w not in came_in]
                outside.extend(removed)
                current = candidate
                current_score = candidate_score
        temp *= params.c
    return _result(pool, window, current, current_score, method, started)


def random_select(pool: CandidatePool, window: DemandWindow, seed: int) -> SelectionResult:
    """Uniform random size-k subset; the baseline.

    There is no internal objective to report, so the objective field mirrors
    the exact tau. Identity of the draw is fixed entirely by the seed.
    """
    started = time.perf_counter()
    _check_feasible(pool, window)
    rng = random.Random(seed)
    subset = sorted(rng.sample(range(len(pool)), window.k))
    return _result(pool, window, subset, None, "random", started)
