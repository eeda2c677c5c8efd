"""Tests for the explorer portfolio: budgets, determinism, and scoring."""

from __future__ import annotations

import pytest

from dsekit.benchmarks import Family, synth_instance
from dsekit.explorers import (
    Budget,
    BudgetedEvaluator,
    ExplorerId,
    explore,
    run_portfolio,
)
from dsekit.explorers.base import NOMINAL_EVAL_SECONDS, BudgetSaturated
from dsekit.pareto import pareto_filter
from dsekit.surrogate import SurrogateModel, exhaustive_front

ALL_EXPLORERS = list(ExplorerId)


class CountingModel:
    """Duck-typed wrapper that counts raw cost-model invocations."""

    def __init__(self, inner: SurrogateModel) -> None:
        self.inner = inner
        self.calls = 0

    @property
    def cardinalities(self):
        return self.inner.cardinalities

    def evaluate_knobs(self, knobs):
        self.calls += 1
        return self.inner.evaluate_knobs(knobs)


@pytest.fixture(scope="module")
def small_case():
    instance = synth_instance(Family.SMOOTH, 3, "small")
    return instance, SurrogateModel.from_instance(instance)


@pytest.fixture(scope="module")
def medium_case():
    instance = synth_instance(Family.RUGGED, 1, "medium")
    return instance, SurrogateModel.from_instance(instance)


class TestBudget:
    def test_rejects_zero_evaluations(self):
        with pytest.raises(ValueError, match="positive integer"):
            Budget(0)

    def test_rejects_float_evaluations(self):
        with pytest.raises(ValueError, match="positive integer"):
            Budget(10.0)

    def test_rejects_nonpositive_wall(self):
        with pytest.raises(ValueError, match="must be positive"):
            Budget(10, max_wall_seconds=0.0)


class TestBudgetedEvaluator:
    def make(self, case, budget):
        instance, model = case
        return BudgetedEvaluator(model, instance.schema, budget, 0.001)

    def test_repeat_proposals_are_free(self, small_case):
        ev = self.make(small_case, Budget(5))
        first = ev.evaluate((0, 0, 0, 0)[: len(small_case[0].schema.cardinalities)])
        again = ev.evaluate(first.knobs)
        assert again is first
        assert ev.evaluations_used == 1

    def test_budget_one_admits_exactly_one_point(self, small_case):
        ev = self.make(small_case, Budget(1))
        knobs = tuple(0 for _ in small_case[0].schema.cardinalities)
        ev.evaluate(knobs)
        with pytest.raises(BudgetSaturated):
            ev.evaluate(tuple(c - 1 for c in small_case[0].schema.cardinalities))
        assert ev.evaluations_used == 1

    def test_wall_clock_is_modeled_from_the_rate(self, small_case):
        ev = self.make(small_case, Budget(50, max_wall_seconds=0.0035))
        cards = small_case[0].schema.cardinalities
        points = iter(small_case[0].schema.iter_points())
        with pytest.raises(BudgetSaturated):
            for _ in range(50):
                ev.evaluate(next(points))
        # at 0.001 s/eval only three evaluations fit under 0.0035 s
        assert ev.evaluations_used == 3
        assert ev.wall_seconds == pytest.approx(0.003)
        assert len(cards) >= 2

    def test_proposal_cap_breaks_repeat_loops(self, small_case):
        ev = self.make(small_case, Budget(1))
        knobs = tuple(0 for _ in small_case[0].schema.cardinalities)
        ev.evaluate(knobs)
        with pytest.raises(BudgetSaturated):
            for _ in range(2001):
                ev.evaluate(knobs)
        assert ev.evaluations_used == 1

    def test_incremental_front_matches_batch_filter(self, medium_case):
        result = explore(ExplorerId.SA, *medium_case, Budget(200), seed=7)
        assert result.front == pareto_filter(result.evaluated)


class TestExplore:
    @pytest.mark.parametrize("explorer", ALL_EXPLORERS, ids=lambda e: e.name)
    def test_deterministic_given_seed(self, medium_case, explorer):
        a = explore(explorer, *medium_case, Budget(120), seed=11)
        b = explore(explorer, *medium_case, Budget(120), seed=11)
        assert a == b
        assert 1 <= a.evaluations_used <= 120

    @pytest.mark.parametrize("explorer", ALL_EXPLORERS, ids=lambda e: e.name)
    def test_front_is_filter_of_evaluated(self, medium_case, explorer):
        result = explore(explorer, *medium_case, Budget(80), seed=3)
        assert result.front == pareto_filter(result.evaluated)
        assert result.wall_seconds == pytest.approx(
            result.evaluations_used * NOMINAL_EVAL_SECONDS[explorer]
        )

    def test_seed_changes_the_trajectory(self, medium_case):
        a = explore(ExplorerId.PSO, *medium_case, Budget(120), seed=1)
        b = explore(ExplorerId.PSO, *medium_case, Budget(120), seed=2)
        assert a.evaluated != b.evaluated

    def test_unknown_explorer_rejected(self, small_case):
        with pytest.raises(ValueError):
            explore(42, *small_case, Budget(10), seed=0)

    def test_model_instance_mismatch_rejected(self, small_case, medium_case):
        instance, _ = small_case
        _, other_model = medium_case
        with pytest.raises(ValueError, match="does not match"):
            explore(ExplorerId.SA, instance, other_model, Budget(10), seed=0)

    def test_exhaustive_fallback_enumerates_small_spaces(self, small_case):
        instance, model = small_case
        size = instance.schema.space_size()
        result = explore(ExplorerId.ACO, instance, model, Budget(size), seed=0)
        assert result.evaluations_used == size
        assert result.front == exhaustive_front(model, instance.schema, size)

    def test_fallback_can_be_disabled(self, small_case):
        instance, model = small_case
        size = instance.schema.space_size()
        result = explore(
            ExplorerId.SA, instance, model, Budget(size), seed=0, exhaustive_fallback=False
        )
        assert result.evaluations_used <= size

    def test_spent_budget_never_exceeds_the_cap(self, medium_case):
        instance, model = medium_case
        for explorer, cap in [
            (ExplorerId.NSGA2, 1),
            (ExplorerId.SBO, 7),
            (ExplorerId.LATTICE, 73),
            (ExplorerId.QLMOEA, 240),
        ]:
            counting = CountingModel(model)
            result = explore(explorer, instance, counting, Budget(cap), seed=5)
            assert 1 <= result.evaluations_used <= cap
            assert counting.calls == result.evaluations_used


class TestPortfolio:
    def test_saturating_budget_makes_every_explorer_exact(self, small_case):
        instance, model = small_case
        budget = Budget(instance.schema.space_size())
        portfolio = run_portfolio(instance, model, budget, master_seed=0)
        assert all(v == 0.0 for v in portfolio.adrs_values)
        # ties on score resolve to the lowest explorer code
        assert portfolio.argmin is ExplorerId.NSGA2

    def test_scores_are_nonnegative_and_argmin_wins(self, medium_case):
        instance, model = medium_case
        portfolio = run_portfolio(instance, model, Budget(150), master_seed=9)
        values = portfolio.adrs_values
        assert len(values) == 10
        assert all(v >= 0.0 for v in values)
        assert values[portfolio.argmin.value] == min(values)

    def test_explorer_failures_carry_attribution(self, small_case, monkeypatch):
        from dsekit.explorers import base

        def boom(ev, schema, rng):
            raise RuntimeError("internal fault")

        base._ensure_runners()
        monkeypatch.setitem(base._RUNNERS, ExplorerId.SA, boom)
        instance, model = small_case
        with pytest.raises(RuntimeError, match=f"explorer SA failed on {instance.id}"):
            run_portfolio(instance, model, Budget(3), master_seed=0)
