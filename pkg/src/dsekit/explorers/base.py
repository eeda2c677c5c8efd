"""Shared explorer machinery: budgets, the counting evaluator, and dispatch.

Every explorer spends its budget through one BudgetedEvaluator, which owns the
memo table (repeat proposals are free), the archive of evaluated points, and an
incrementally maintained archive front. Wall-clock time is modeled, not
measured: each explorer has a nominal per-evaluation cost, so reported times
are deterministic and identical across worker counts and machines.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Callable, Optional

import numpy as np

from ..benchmarks import BenchmarkInstance, KnobSchema
from ..hashing import mix64
from ..pareto import (
    DesignPoint,
    ParetoFront,
    adrs,
    dominates,
    pareto_filter,
    reference_front,
)
from ..surrogate import SurrogateModel, exhaustive_front


class ExplorerId(IntEnum):
    """Stable integer codes; these are the dataset's label space."""

    NSGA2 = 0
    SA = 1
    ACO = 2
    PSO = 3
    LATTICE = 4
    SBO = 5
    EDA = 6
    AC = 7
    PG = 8
    QLMOEA = 9


# Nominal per-evaluation cost in seconds. Reported wall_seconds is
# evaluations_used times this rate: a deterministic model of runtime, chosen
# so that heavier machinery (surrogate refits, population bookkeeping) reads
# as slower without making results depend on the host machine.
NOMINAL_EVAL_SECONDS = {
    ExplorerId.NSGA2: 0.0021,
    ExplorerId.SA: 0.0008,
    ExplorerId.ACO: 0.0017,
    ExplorerId.PSO: 0.0013,
    ExplorerId.LATTICE: 0.0009,
    ExplorerId.SBO: 0.0046,
    ExplorerId.EDA: 0.0015,
    ExplorerId.AC: 0.0012,
    ExplorerId.PG: 0.0011,
    ExplorerId.QLMOEA: 0.0024,
}

_EXPLORE_TAG = 0xE59A
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Budget:
    """Evaluation allowance for one explorer run."""

    max_evaluations: int
    max_wall_seconds: Optional[float] = None

    def __post_init__(self) -> None:
        if not isinstance(self.max_evaluations, int) or self.max_evaluations < 1:
            raise ValueError(f"max_evaluations must be a positive integer, got {self.max_evaluations!r}")
        if self.max_wall_seconds is not None and not self.max_wall_seconds > 0:
            raise ValueError(f"max_wall_seconds must be positive, got {self.max_wall_seconds!r}")


@dataclass(frozen=True)
class ExplorationResult:
    """Outcome of one explorer run on one benchmark."""

    explorer: ExplorerId
    benchmark_id: str
    evaluated: tuple[DesignPoint, ...]
    front: ParetoFront
    evaluations_used: int
    wall_seconds: float
    adrs: Optional[float] = None


@dataclass(frozen=True)
class PortfolioResult:
    """All ten explorers on one benchmark, scored against one reference."""

    results: tuple[ExplorationResult, ...]
    reference: ParetoFront
    argmin: ExplorerId

    @property
    def adrs_values(self) -> tuple[float, ...]:
        return tuple(r.adrs for r in self.results)


class BudgetSaturated(Exception):
    """Internal control flow: the evaluator will accept no more new points."""


class BudgetedEvaluator:
    """Counting, memoizing gate between an explorer and the cost model.

    Raises BudgetSaturated instead of evaluating once the budget (or the
    modeled wall clock, or the whole design space) is spent; explorers treat
    that as their stop signal. The first evaluation is always admitted so a
    run can never end empty-handed.
    """

    def __init__(
        self,
        model: SurrogateModel,
        schema: KnobSchema,
        budget: Budget,
        seconds_per_eval: float,
    ) -> None:
        self._model = model
        self._schema = schema
        self._budget = budget
        self._rate = seconds_per_eval
        self._space = schema.space_size()
        self._memo: dict[tuple[int, ...], DesignPoint] = {}
        self._proposals = 0
        self._proposal_cap = max(2000, 250 * budget.max_evaluations)
        self.evaluated: list[DesignPoint] = []
        self._front: list[DesignPoint] = []

    @property
    def evaluations_used(self) -> int:
        return len(self.evaluated)

    @property
    def max_evaluations(self) -> int:
        return self._budget.max_evaluations

    @property
    def wall_seconds(self) -> float:
        return self.evaluations_used * self._rate

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return self._schema.cardinalities

    def seen(self, knobs: tuple[int, ...]) -> bool:
        return knobs in self._memo

    def saturated(self) -> bool:
        used = self.evaluations_used
        if used == 0:
            return False
        if used >= self._budget.max_evaluations:
            return True
        if len(self._memo) >= self._space:
            return True
        wall = self._budget.max_wall_seconds
        if wall is not None and (used + 1) * self._rate > wall:
            return True
        return self._proposals >= self._proposal_cap

    def evaluate(self, knobs: tuple[int, ...]) -> DesignPoint:
        self._proposals += 1
        hit = self._memo.get(knobs)
        if hit is not None:
            if self._proposals >= self._proposal_cap:
                raise BudgetSaturated
            return hit
        if self.saturated():
            raise BudgetSaturated
        point = DesignPoint(knobs, self._model.evaluate_knobs(knobs))
        self._memo[knobs] = point
        self.evaluated.append(point)
        self._admit_to_front(point)
        return point

    def front_points(self) -> tuple[DesignPoint, ...]:
        """Current archive front, sorted by ascending area."""
        return tuple(self._front)

    def _admit_to_front(self, point: DesignPoint) -> None:
        obj = point.objectives
        for old in self._front:
            o = old.objectives
            if dominates(o, obj):
                return
            if o.area == obj.area and o.latency == obj.latency:
                if old.knobs <= point.knobs:
                    return
                self._front.remove(old)
                break
        self._front = [old for old in self._front if not dominates(obj, old.objectives)]
        self._front.append(point)
        self._front.sort(key=lambda p: (p.objectives.area, p.objectives.latency))


Runner = Callable[[BudgetedEvaluator, KnobSchema, np.random.Generator], None]
_RUNNERS: dict[ExplorerId, Runner] = {}


def register(explorer: ExplorerId) -> Callable[[Runner], Runner]:
    def wrap(fn: Runner) -> Runner:
        _RUNNERS[explorer] = fn
        return fn

    return wrap


def _ensure_runners() -> None:
    if not _RUNNERS:
        importlib.import_module(".algorithms", __package__)


def explore(
    explorer: ExplorerId,
    instance: BenchmarkInstance,
    model: SurrogateModel,
    budget: Budget,
    seed: int,
    exhaustive_fallback: bool = True,
) -> ExplorationResult:
    """Run one explorer on one benchmark under a budget, deterministically.

    When the whole design space fits inside the evaluation budget and
    exhaustive_fallback is on, the space is simply enumerated; any search
    would be wasted motion there.
    """
    _ensure_runners()
    explorer = ExplorerId(explorer)
    if model.cardinalities != instance.schema.cardinalities:
        raise ValueError("model does not match the instance's design space")
    evaluator = BudgetedEvaluator(
        model, instance.schema, budget, NOMINAL_EVAL_SECONDS[explorer]
    )
    try:
        if exhaustive_fallback and instance.schema.space_size() <= budget.max_evaluations:
            for knobs in instance.schema.iter_points():
                evaluator.evaluate(knobs)
        else:
            rng = np.random.default_rng(
                np.random.SeedSequence([_EXPLORE_TAG, explorer.value, seed & _SEED_MASK])
            )
            _RUNNERS[explorer](evaluator, instance.schema, rng)
    except BudgetSaturated:
        pass
    evaluated = tuple(evaluator.evaluated)
    return ExplorationResult(
        explorer=explorer,
        benchmark_id=instance.id,
        evaluated=evaluated,
        front=pareto_filter(evaluated),
        evaluations_used=evaluator.evaluations_used,
        wall_seconds=evaluator.wall_seconds,
    )


def portfolio_seed(master_seed: int, explorer: ExplorerId) -> int:
    """The per-explorer seed every portfolio run derives from its master seed."""
    return mix64(master_seed, explorer.value)


def score_results(
    instance: BenchmarkInstance,
    model: SurrogateModel,
    results: tuple[ExplorationResult, ...],
    exhaustive_reference_limit: int = 4096,
) -> PortfolioResult:
    """Score ten collected runs against one shared reference front.

    The reference is the exhaustively enumerated true front when the space is
    small enough, otherwise the non-dominated union of everything the ten
    runs evaluated.
    """
    if instance.schema.space_size() <= exhaustive_reference_limit:
        reference = exhaustive_front(model, instance.schema, exhaustive_reference_limit)
    else:
        reference = reference_front(results)
    scored = tuple(replace(r, adrs=adrs(reference, r.front)) for r in results)
    best = min(scored, key=lambda r: (r.adrs, r.explorer.value))
    return PortfolioResult(results=scored, reference=reference, argmin=best.explorer)


def run_portfolio(
    instance: BenchmarkInstance,
    model: SurrogateModel,
    budget: Budget,
    master_seed: int,
    exhaustive_reference_limit: int = 4096,
) -> PortfolioResult:
    """All ten explorers with derived seeds, scored against one reference."""
    results = []
    for explorer in ExplorerId:
        try:
            results.append(
                explore(explorer, instance, model, budget, portfolio_seed(master_seed, explorer))
            )
        except Exception as err:
            raise RuntimeError(f"explorer {explorer.name} failed on {instance.id}") from err
    return score_results(instance, model, tuple(results), exhaustive_reference_limit)
