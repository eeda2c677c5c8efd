"""Run all ten explorers on two benchmarks and watch the winner change.

This is the no-free-lunch effect that motivates learned algorithm selection:
the explorer that wins on a smooth landscape is not the one that wins on a
rugged or plateau-heavy one.
"""

from dsekit.benchmarks import Family, synth_instance
from dsekit.explorers import Budget, ExplorerId, run_portfolio
from dsekit.surrogate import SurrogateModel

BUDGET = Budget(60)

for family in (Family.SMOOTH, Family.RUGGED, Family.PLATEAU):
    instance = synth_instance(family, seed=2, size_class="small")
    model = SurrogateModel.from_instance(instance)
    portfolio = run_portfolio(instance, model, BUDGET, master_seed=0)

    print(instance.id)
    for explorer, result in zip(ExplorerId, portfolio.results):
        marker = "  <- winner" if explorer == portfolio.argmin else ""
        print(f"  {explorer.name.lower():8s} adrs={result.adrs:.5f} "
              f"evals={result.evaluations_used:4d}{marker}")
    print()
