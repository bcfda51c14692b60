"""Spending a query budget optimally.

The twinning decision is an average-cost MDP on (S, S_hat, latch). A
price eta per query turns the budget into a Lagrangian; bisection on eta
finds the price at which the greedy policy just fits the budget, and one
state twins at random to use the budget exactly.
"""

from twinsync import (CostFunctionSpec, PolicySpec, build_mdp, simulate_cell, solve_constrained,
                      two_system_example)

sc = two_system_example()
c1 = CostFunctionSpec("c1")
model = build_mdp(sc, c1)
print(f"{model.n_states} reachable states, uniformization rate {model.uniform_rate}")

for budget in (0.5, 1.0, 2.0, 100.0):
    sol = solve_constrained(model, budget)
    note = ""
    if sol.randomized_state is not None:
        x = sol.randomized_state
        note = f"  randomizes in {model.encode(x)} with p={sol.policy[x]:.4f}"
    print(f"budget {budget:6.1f}: eta={sol.eta:.6f} cost={sol.cost_rate:.4f} "
          f"rate={sol.achieved_rate:.4f}{note}")

sol = solve_constrained(model, 1.0)
print("\nreplay at budget 1 (300 replications, horizon 300):")
for i, (name, spec) in enumerate([("lookup", PolicySpec.lookup(sol)),
                                  ("PRTP", PolicySpec.prtp(1.0)),
                                  ("PPTP", PolicySpec.pptp(1.0))]):
    r = simulate_cell(sc, spec, [c1], 300.0, 300, seed=5, cell=i)
    print(f"  {name:6s} cost {r.mean('c1'):.4f} +- {r.stderr('c1'):.4f}  rate {r.rate_mean:.3f}")
