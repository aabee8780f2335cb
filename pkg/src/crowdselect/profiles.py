"""Worker-profile similarity measures feeding the similarity-driven model.

Covers profile Jaccard similarity, task-worker relevance by inverse Jaccard
distance, a multinomial-mixture topic model over each worker's bag-of-words
task history (fitted with EM), and KL-based experience distance, symmetrized
into a similarity matrix consumable by the S-Model solvers.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

SMOOTHING = 1e-10
RELEVANCE_SENTINEL = 1e12

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Default tokenizer: lowercase runs of letters/digits. Swap in a stemmer if needed."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class WorkerProfile:
    """A worker's identifier and feature tokens (demographics, expertise, ...)."""

    worker_id: str
    features: frozenset[str]

    def __post_init__(self):
        if any(not f for f in self.features):
            raise ValueError("profile features must be non-empty tokens")


@dataclass(frozen=True)
class TaskRecord:
    """One worker's record on one task; (task_id, worker_id) pairs are unique."""

    task_id: str
    worker_id: str
    features: frozenset[str]

    @classmethod
    def from_text(
        cls,
        task_id: str,
        worker_id: str,
        text: str,
        tokenizer: Callable[[str], list[str]] = tokenize,
    ) -> "TaskRecord":
        return cls(task_id=task_id, worker_id=worker_id, features=frozenset(tokenizer(text)))


@dataclass(frozen=True, eq=False)
class Experience:
    """A worker's task history as a bag of words."""

    counts: Mapping[str, int]

    def __post_init__(self):
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("word counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Experience":
        return cls(counts=dict(Counter(tokens)))


@dataclass(frozen=True, eq=False)
class TopicModel:
    """Multinomial mixture over a fixed vocabulary.

    pi holds the topic priors, mu the per-topic word distributions (rows sum
    to one), and log_likelihood_trace the objective after each EM iteration.
    """

    pi: np.ndarray
    mu: np.ndarray
    vocab: tuple[str, ...]
    log_likelihood_trace: tuple[float, ...] = field(default=())

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "mu", mu)
        if pi.ndim != 1 or mu.ndim != 2:
            raise ValueError("pi must be a vector and mu a matrix")
        if mu.shape != (pi.size, len(self.vocab)):
            raise ValueError("mu must be (topics, vocabulary) shaped")
        if np.any(pi < 0) or np.any(mu < 0):
            raise ValueError("mixture parameters must be non-negative")
        if abs(pi.sum() - 1.0) > 1e-9:
            raise ValueError("topic priors must sum to 1")
        if np.abs(mu.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("each topic's word distribution must sum to 1")

    @property
    def n_topics(self) -> int:
        return self.pi.size


def jaccard_similarity(a: Iterable[str], b: Iterable[str]) -> float:
    """|A & B| / |A | B|; two empty sets count as similarity 0."""
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)


def relevance(
    worker_features: Iterable[str],
    task_features: Iterable[str],
    sentinel: float = RELEVANCE_SENTINEL,
) -> float:
    """Inverse Jaccard distance between a worker and a task.

    Identical feature sets have distance zero, where the inverse blows up;
    a finite sentinel is returned instead.
    """
    distance = 1.0 - jaccard_similarity(worker_features, task_features)
    if distance == 0.0:
        return sentinel
    return 1.0 / distance


def relevant_workers(
    task_features: Iterable[str],
    pool: Sequence[WorkerProfile],
    radius: float,
) -> list[WorkerProfile]:
    """Workers whose Jaccard distance to the task is within radius, input order kept."""
    if radius < 0.0:
        raise ValueError("relevance radius must be non-negative")
    task = set(task_features)
    return [
        w
        for w in pool
        if 1.0 - jaccard_similarity(w.features, task) <= radius
    ]


def _counts_matrix(
    experiences: Sequence[Experience], vocab: Sequence[str]
) -> np.ndarray:
    index = {w: j for j, w in enumerate(vocab)}
    mat = np.zeros((len(experiences), len(vocab)))
    for i, exp in enumerate(experiences):
        for word, count in exp.counts.items():
            j = index.get(word)
            if j is not None:
                mat[i, j] = count
    return mat


def _smooth_rows(mat: np.ndarray) -> np.ndarray:
    """Normalize rows into distributions, then smooth additively and renormalize.

    A row with no mass at all (a dead mixture component) falls back to
    uniform rather than dividing by zero.
    """
    totals = mat.sum(axis=1, keepdims=True)
    safe = np.where(totals > 0.0, totals, 1.0)
    rows = np.where(totals > 0.0, mat / safe, 1.0 / mat.shape[1])
    rows = rows + SMOOTHING
    return rows / rows.sum(axis=1, keepdims=True)


def em_fit(
    experiences: Sequence[Experience],
    n_topics: int,
    tol: float = 1e-7,
    max_iter: int = 200,
    seed: int = 0,
) -> TopicModel:
    """Fit the multinomial mixture by expectation-maximization.

    E-step computes per-collection topic posteriors in log space; M-step
    re-estimates priors as posterior averages and word distributions as
    posterior-weighted relative frequencies, smoothed so no word probability
    can collapse to zero. Stops when the log-likelihood gain drops below tol.
    Deterministic for a fixed seed: priors start uniform, word rows start at
    seeded Dirichlet draws.
    """
    if n_topics < 1:
        raise ValueError("need at least one topic")
    if not experiences:
        raise ValueError("need at least one experience collection")
    if any(e.total == 0 for e in experiences):
        raise ValueError("experience collections must be non-empty")
    vocab = tuple(sorted({w for e in experiences for w in e.counts}))
    counts = _counts_matrix(experiences, vocab)

    rng = np.random.default_rng(seed)
    pi = np.full(n_topics, 1.0 / n_topics)
    mu = _smooth_rows(rng.dirichlet(np.ones(len(vocab)), size=n_topics))

    trace: list[float] = []
    previous = -math.inf
    for _ in range(max_iter):
        log_joint = counts @ np.log(mu).T + np.log(pi)  # (collections, topics)
        log_evidence = logsumexp(log_joint, axis=1)
        posteriors = np.exp(log_joint - log_evidence[:, None])

        pi = posteriors.mean(axis=0)
        pi = (pi + SMOOTHING) / (pi + SMOOTHING).sum()
        mu = _smooth_rows(posteriors.T @ counts)

        log_likelihood = float(log_evidence.sum())
        trace.append(log_likelihood)
        if abs(log_likelihood - previous) < tol:
            break
        previous = log_likelihood

    # objective at the final parameters, so the trace covers the last M-step
    final = float(
        logsumexp(counts @ np.log(mu).T + np.log(pi), axis=1).sum()
    )
    trace.append(final)
    return TopicModel(pi=pi, mu=mu, vocab=vocab, log_likelihood_trace=tuple(trace))


def topic_posterior(experience: Experience, model: TopicModel) -> np.ndarray:
    """Posterior topic distribution of one worker's experience; unknown words dropped."""
    counts = _counts_matrix([experience], model.vocab)[0]
    log_joint = counts @ np.log(model.mu).T + np.log(model.pi)
    return np.exp(log_joint - logsumexp(log_joint))


def kl_divergence(
    p: Sequence[float], q: Sequence[float], eps: float = SMOOTHING
) -> float:
    """KL divergence (nats) between two distributions, smoothed against zeros."""
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    if pa.shape != qa.shape or pa.ndim != 1:
        raise ValueError("distributions must be 1-d with equal length")
    for arr in (pa, qa):
        if np.any(arr < 0.0):
            raise ValueError("distributions must be non-negative")
        if abs(float(arr.sum()) - 1.0) > 1e-6:
            raise ValueError("distributions must sum to 1 within 1e-6")
    pa = (pa + eps) / (pa + eps).sum()
    qa = (qa + eps) / (qa + eps).sum()
    return float((pa * np.log(pa / qa)).sum())


def experience_similarity_matrix(
    experiences: Sequence[Experience], model: TopicModel
) -> np.ndarray:
    """Pairwise worker similarity as negated symmetrized topic KL distance.

    The raw KL distance is asymmetric; averaging both directions yields the
    symmetric matrix the S-Model requires. Diagonal is zero.
    """
    if len(experiences) < 2:
        raise ValueError("need at least two workers")
    posteriors = [topic_posterior(e, model) for e in experiences]
    n = len(posteriors)
    div = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                div[i, j] = kl_divergence(posteriors[i], posteriors[j])
    return -(div + div.T) / 2.0


def build_experiences(
    records: Sequence[tuple[str, str, str]],
    tokenizer: Callable[[str], list[str]] = tokenize,
) -> tuple[list[str], list[Experience]]:
    """Group (worker_id, task_id, text) records into per-worker bags of words.

    Workers come back in order of first appearance; each worker's texts are
    tokenized and pooled into a single experience collection.
    """
    bags: dict[str, Counter] = {}
    order: list[str] = []
    for worker_id, _task_id, text in records:
        if worker_id not in bags:
            bags[worker_id] = Counter()
            order.append(worker_id)
        bags[worker_id].update(tokenizer(text))
    return order, [Experience(counts=dict(bags[w])) for w in order]
