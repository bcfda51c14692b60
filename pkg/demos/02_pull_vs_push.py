"""Pull (PRTP) against push (PPTP) twinning under a sync delay.

Pull queries arrive blindly at rate lambda. Push fires on physical
transitions, so every query carries news; its rate saturates at the
total event rate sigma. With preemption a new query cancels the one in
flight, so very frequent pull queries can starve the twin when the sync
delay is long.
"""

from twinsync import CostFunctionSpec, PolicySpec, simulate_cell, two_system_example

costs = [CostFunctionSpec("c1"), CostFunctionSpec("c2")]
print("delta  lambda   PRTP c1   PPTP c1   PRTP c2   PPTP c2   PPTP rate")
cell = 0
for delta in (0.0, 0.3, 0.6):
    sc = two_system_example(delta=delta)
    for lam in (1, 3, 10, 30):
        pr = simulate_cell(sc, PolicySpec.prtp(lam), costs, 300.0, 60, seed=3, cell=cell)
        pp = simulate_cell(sc, PolicySpec.pptp(lam), costs, 300.0, 60, seed=3, cell=cell + 1)
        cell += 2
        print(f"{delta:5.1f}  {lam:6d}   {pr.mean('c1'):.4f}    {pp.mean('c1'):.4f}"
              f"    {pr.mean('c2'):.4f}    {pp.mean('c2'):.4f}    {pp.rate_mean:.3f}")
