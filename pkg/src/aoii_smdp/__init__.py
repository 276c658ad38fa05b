"""Optimal estimate-dependent threshold policies for AoII-penalised remote estimation."""

from .cycle_model import ChannelModel, SmdpParameters, SourceModel, build_cycle_chain, smdp_parameters
from .dr_dph import DualRegimeChain, DrDphDistribution
from .experiments import Scenario, run_sweep, scenario_one, scenario_two
from .simulator import SimPolicy, SimulationReport, estimate_cycle_parameters, simulate
from .smdp_solver import Policy, SolverResult, policy_evaluate, policy_iteration
from .stochastic_core import DphDistribution

__all__ = [
    "ChannelModel", "DphDistribution", "DrDphDistribution", "DualRegimeChain", "Policy", "Scenario",
    "SimPolicy", "SimulationReport", "SmdpParameters", "SolverResult", "SourceModel", "build_cycle_chain",
    "estimate_cycle_parameters", "policy_evaluate", "policy_iteration", "run_sweep", "scenario_one",
    "scenario_two", "simulate", "smdp_parameters",
]
