"""Synthetic benchmark harness.

Generates seeded worker pools and similarity matrices under uniform or normal
distributions, runs the configured solvers over a (trial, k, demand) grid, and
writes machine-readable reports: a row-per-run CSV plus a JSON summary of
per-method means. Everything except measured wall time is reproducible
bit-for-bit from (config, seed).
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import smodel, tmodel
from .errors import EnumerationLimitError, TimeBudgetError
from .pbd import DemandWindow

CSV_HEADER = [
    "trial",
    "method",
    "k",
    "theta1",
    "theta0",
    "objective",
    "tau_or_div",
    "wall_time_s",
    "status",
]

SMODEL_METHODS = ("exact", "greedy", "random")
TMODEL_METHODS = ("exact", "poisson", "binomial", "normal-sa", "dftcf-sa", "random")

# Wall-clock cap per exact cell; cells beyond it are reported as timed out.
DEFAULT_EXACT_BUDGET_S = 500.0

_FRACTION_RE = re.compile(r"^(\d*)k/(\d+)$")


def derive_seed(*parts) -> int:
    """Stable 64-bit stream seed from a base seed and any labels."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class DistSpec:
    """Sampling distribution: uniform over the target range, or clamped normal."""

    kind: str
    mean: float | None = None
    stddev: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "normal"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "normal" and (self.stddev is not None and self.stddev <= 0):
            raise ValueError("normal stddev must be positive")

    @classmethod
    def parse(cls, text) -> "DistSpec":
        """Accept 'uniform', 'normal', 'normal(mean,stddev)', or a mapping."""
        if isinstance(text, DistSpec):
            return text
        if isinstance(text, dict):
            return cls(
                kind=text["kind"],
                mean=text.get("mean"),
                stddev=text.get("stddev"),
            )
        text = text.strip()
        if text == "uniform":
            return cls(kind="uniform")
        if text == "normal":
            return cls(kind="normal")
        match = re.match(r"^normal\(([^,]+),([^)]+)\)$", text)
        if match:
            return cls(
                kind="normal",
                mean=float(match.group(1)),
                stddev=float(match.group(2)),
            )
        raise ValueError(f"cannot parse distribution spec {text!r}")

    def sample(
        self,
        rng: np.random.Generator,
        size,
        low: float,
        high: float,
        default_mean: float,
        default_stddev: float,
    ) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(low, high, size=size)
        mean = default_mean if self.mean is None else self.mean
        stddev = default_stddev if self.stddev is None else self.stddev
        return np.clip(rng.normal(mean, stddev, size=size), low, high)


def gen_similarity_matrix(n: int, dist: DistSpec, seed: int) -> np.ndarray:
    """Seeded symmetric similarity matrix with entries in [-1, 0] and zero diagonal."""
    if n < 2:
        raise ValueError("need at least two workers")
    rng = np.random.default_rng(seed)
    draws = dist.sample(
        rng, size=(n, n), low=-1.0, high=0.0, default_mean=-0.5, default_stddev=0.15
    )
    sim = np.triu(draws, 1)
    sim = sim + sim.T
    return sim


def gen_opinions(n: int, dist: DistSpec, seed: int) -> tmodel.CandidatePool:
    """Seeded candidate pool with opinion probabilities in [0, 1]."""
    if n < 1:
        raise ValueError("need at least one worker")
    rng = np.random.default_rng(seed)
    probs = dist.sample(
        rng, size=n, low=0.0, high=1.0, default_mean=0.5, default_stddev=0.1
    )
    return tmodel.CandidatePool(ids=tuple(range(n)), probs=probs)


def resolve_demand(spec, k: int) -> int:
    """Resolve a demand threshold: an integer, or a fraction of k like '2k/5' (floored)."""
    if isinstance(spec, int):
        value = spec
    else:
        text = str(spec).strip()
        match = _FRACTION_RE.match(text)
        if match:
            numerator = int(match.group(1)) if match.group(1) else 1
            value = (numerator * k) // int(match.group(2))
        else:
            value = int(text)
    return max(0, value)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment grid: model, pool size, trials, distribution, ks, demands, methods."""

    model: str
    n: int
    trials: int
    distribution: DistSpec
    ks: tuple[int, ...]
    demands: tuple[tuple[object, object], ...] = ()
    methods: tuple[str, ...] = ()
    seed: int = 0
    exact_budget_s: float = DEFAULT_EXACT_BUDGET_S
    sa_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in ("smodel", "tmodel"):
            raise ValueError("model must be 'smodel' or 'tmodel'")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        known = SMODEL_METHODS if self.model == "smodel" else TMODEL_METHODS
        unknown = [m for m in self.methods if m not in known]
        if unknown:
            raise ValueError(f"unknown methods for {self.model}: {unknown}")
        if self.model == "tmodel" and self.methods and not self.demands:
            raise ValueError("tmodel experiments need a demand grid")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return cls(
            model=raw["model"],
            n=int(raw["n"]),
            trials=int(raw["trials"]),
            distribution=DistSpec.parse(raw.get("distribution", "uniform")),
            ks=tuple(int(k) for k in raw["k"]),
            demands=tuple(
                (d[0], d[1]) for d in raw.get("demands", [])
            ),
            methods=tuple(raw.get("methods", [])),
            seed=int(raw.get("seed", 0)),
            exact_budget_s=float(raw.get("exact_budget_s", DEFAULT_EXACT_BUDGET_S)),
            sa_params=dict(raw.get("sa", {})),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TrialRow:
    trial: int
    method: str
    k: int
    theta1: int | None
    theta0: int | None
    objective: float | None
    tau_or_div: float | None
    wall_time_s: float | None
    status: str

    def as_csv(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        return [
            fmt(self.trial),
            self.method,
            fmt(self.k),
            fmt(self.theta1),
            fmt(self.theta0),
            fmt(self.objective),
            fmt(self.tau_or_div),
            fmt(self.wall_time_s),
            self.status,
        ]


@dataclass
class TrialReport:
    """All rows of one experiment plus per-method aggregates."""

    config: ExperimentConfig
    rows: list[TrialRow]

    def summary(self) -> dict:
        per_method: dict[str, dict] = {}
        for method in sorted({r.method for r in self.rows}):
            scores = [
                r.tau_or_div for r in self.rows if r.method == method and r.status == "ok"
            ]
            times = [
                r.wall_time_s for r in self.rows if r.method == method and r.status == "ok"
            ]
            per_method[method] = {
                "runs": len(scores),
                "mean_score": float(np.mean(scores)) if scores else None,
                "std_score": float(np.std(scores)) if scores else None,
                "mean_wall_time_s": float(np.mean(times)) if times else None,
            }
        statuses = sorted({r.status for r in self.rows})
        return {
            "model": self.config.model,
            "n": self.config.n,
            "trials": self.config.trials,
            "seed": self.config.seed,
            "rows": len(self.rows),
            "statuses": {
                s: sum(1 for r in self.rows if r.status == s) for s in statuses
            },
            "methods": per_method,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_HEADER)
            for row in self.rows:
                writer.writerow(row.as_csv())

    def write_summary_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def _run_smodel_method(method, matrix, k, seed, exact_budget):
    started = time.perf_counter()
    if method == "exact":
        crowd = smodel.exact_select(matrix, k, time_budget_s=exact_budget)
    elif method == "greedy":
        crowd = smodel.greedy_select(matrix, k)
    elif method == "random":
        rng = np.random.default_rng(seed)
        crowd = tuple(sorted(int(i) for i in rng.choice(matrix.shape[0], size=k, replace=False)))
    else:
        raise ValueError(f"unknown smodel method {method!r}")
    elapsed = time.perf_counter() - started
    div = smodel.diversity(crowd, matrix)
    return div, div, elapsed


def _run_tmodel_method(method, pool, window, seed, sa_kwargs, exact_budget):
    if method == "exact":
        res = tmodel.exact_select(pool, window, time_budget_s=exact_budget)
    elif method == "poisson":
        res = tmodel.select_poisson(pool, window)
    elif method == "binomial":
        res = tmodel.select_binomial(pool, window)
    elif method in ("normal-sa", "dftcf-sa"):
        params = tmodel.SaParams(seed=seed, **sa_kwargs)
        res = tmodel.sa_select(pool, window, objective=method.split("-")[0], params=params)
    elif method == "random":
        res = tmodel.random_select(pool, window, seed=seed)
    else:
        raise ValueError(f"unknown tmodel method {method!r}")
    return res.objective, res.tau, res.wall_time


def run_experiment(cfg: ExperimentConfig) -> TrialReport:
    """Run every configured method over the full (trial, k, demand) grid.

    Infeasible cells and guard/timeout hits become status rows instead of
    aborting the run. Each trial draws its data from a seed derived from the
    base seed, and each stochastic method run gets its own derived stream.
    """
    rows: list[TrialRow] = []
    for trial in range(cfg.trials):
        data_seed = derive_seed(cfg.seed, "data", trial)
        if cfg.model == "smodel":
            matrix = gen_similarity_matrix(cfg.n, cfg.distribution, data_seed)
            pool = None
        else:
            matrix = None
            pool = gen_opinions(cfg.n, cfg.distribution, data_seed)
        for k in cfg.ks:
            cells = [(None, None)] if cfg.model == "smodel" else list(cfg.demands)
            for demand in cells:
                theta1 = theta0 = None
                window = None
                if cfg.model == "tmodel":
                    theta1 = resolve_demand(demand[0], k)
                    theta0 = resolve_demand(demand[1], k)
                    if theta1 + theta0 > k or k > cfg.n:
                        rows.append(
                            TrialRow(trial, "-", k, theta1, theta0, None, None, None,
                                     "skipped-infeasible")
                        )
                        continue
                    window = DemandWindow(theta1=theta1, theta0=theta0, k=k)
                elif k > cfg.n:
                    rows.append(
                        TrialRow(trial, "-", k, None, None, None, None, None,
                                 "skipped-infeasible")
                    )
                    continue
                for method in cfg.methods:
                    method_seed = derive_seed(cfg.seed, trial, k, theta1, theta0, method)
                    try:
                        if cfg.model == "smodel":
                            objective, score, elapsed = _run_smodel_method(
                                method, matrix, k, method_seed, cfg.exact_budget_s
                            )
                        else:
                            objective, score, elapsed = _run_tmodel_method(
                                method, pool, window, method_seed,
                                cfg.sa_params, cfg.exact_budget_s,
                            )
                        rows.append(
                            TrialRow(trial, method, k, theta1, theta0,
                                     objective, score, elapsed, "ok")
                        )
                    except EnumerationLimitError:
                        rows.append(
                            TrialRow(trial, method, k, theta1, theta0,
                                     None, None, None, "skipped-guard")
                        )
                    except TimeBudgetError as err:
                        rows.append(
                            TrialRow(trial, method, k, theta1, theta0,
                                     None, None, err.elapsed_s, "timeout")
                        )
    return TrialReport(config=cfg, rows=rows)
