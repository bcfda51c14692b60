"""Digital-twin synchronization of independent Markov physical systems.

Simulation, closed-form expected costs, and rate-constrained optimal
twinning for networks of continuous-time Markov chains.
"""

from .analytic import (expected_cost_c1, expected_cost_c2, expected_cost_c3_hamming,
                       holding_probability, same_state_probability)
from .costs import (CostFunctionSpec, MismatchState, cost_c1, cost_c2, cost_c3,
                    time_average_cost)
from .ctmc import (GeneratorMatrix, sample_jump, sample_stationary, stationary_distribution,
                   total_event_rate, transition_matrix, validate_generator)
from .mdp import (MdpModel, MdpSolution, build_mdp, induced_rate, relative_value_iteration,
                  solve_constrained)
from .policies import (PolicySpec, lookup_decide, periodic_next_query, pptp_on_transition,
                       pptp_probability, prtp_next_query)
from .rng import RngStream
from .scenario import PhysicalSystem, ScenarioSpec, make_scenario, two_system_example
from .sim import (EventTrace, ReplicationSummary, empirical_twinning_rate, estimate_point_cost,
                  run_replication, simulate_cell)

__version__ = "0.1.0"
