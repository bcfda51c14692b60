"""How stale is a twin that stopped syncing tau time units ago?

Two answers exist. "Has the system moved at all since the snapshot?"
is governed by the holding time in the current state (the sojourn
form). "Is the system in a different state than the snapshot?" is
governed by the diagonal of e^{Q tau} (the diagonal form). A system can
leave and come back, so the two differ, and Monte Carlo shows which
question each one answers.
"""

from twinsync import (RngStream, estimate_point_cost, holding_probability,
                      same_state_probability, stationary_distribution, transition_matrix,
                      two_system_example)

sc = two_system_example()
g1 = sc.systems[0].generator
print("pi of the slow system:", stationary_distribution(g1))
print("e^{Q tau} at tau=1:\n", transition_matrix(g1, 1.0))

print("\n tau   moved(MC)  1-sojourn   differs(MC)  1-diagonal")
for tau in (0.1, 0.5, 1.0, 2.0):
    rng = RngStream(1, int(tau * 10))
    moved, _ = estimate_point_cost(sc, tau, "latched_per_ps", 50_000, rng)
    differs, _ = estimate_point_cost(sc, tau, "state_mismatch_per_ps", 50_000, rng)
    print(f"{tau:4.1f}   {moved[0]:.4f}     {1 - holding_probability(g1, tau=tau):.4f}"
          f"      {differs[0]:.4f}       {1 - same_state_probability(g1, tau=tau):.4f}")
