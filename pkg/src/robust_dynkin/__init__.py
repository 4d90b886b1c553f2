"""Robust Dynkin games on finite scenario trees.

Backward induction under a rectangular family of priors, dyadic-grid
approximations, optimal stopping rules and an exhaustive oracle that checks
them.
"""

from .ambiguity import (
    Kernel,
    KernelMenu,
    TreeMeasure,
    enumerate_policies,
    inf_expectation,
    measure_of,
    mutually_singular,
    one_step_inf_expectation,
    paste_policies,
    policy_expectation,
)
from .errors import *  # noqa: F401,F403
from .gamespec import GameSpec, load_spec, parse_spec, spec_from_dict
from .oracle import (
    enumerate_stopping_times,
    expected_payoff,
    game_values,
    lower_value_bruteforce,
    upper_value_bruteforce,
    verify_saddle,
    verify_tau_star,
)
from .payoff import PayoffSpec, PayoffValues, StopPair, check_payoff_bound, eval_g, eval_psi, eval_R
from .scenario_tree import Node, ScenarioTree, TimeGrid, additive_tree, build_tree, nodes_at_depth, path_of
from .sde_lattice import SdeSpec, build_lattice, check_increment_scaling, lipschitz_probe
from .solver import (
    GameSolution,
    StoppingRegion,
    backward_induction,
    backward_induction_grid,
    convergence_report,
    extract_gamma_star,
    extract_p_star,
    extract_tau_star,
    upsilon,
    verify_submartingale,
)

__version__ = "0.1.0"
