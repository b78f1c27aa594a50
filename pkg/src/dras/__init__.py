"""Data-driven distributionally robust appointment scheduling over Wasserstein balls."""
from __future__ import annotations

from .duration import DroSolution, WassersteinBall, solve_saa, solve_wdras, worst_case_distribution
from .harness import ExperimentConfig, ExperimentResult, cross_validate_epsilon, stress_test
from .noshow import solve_wns, worst_case_distribution_noshow
from .schedule import CostParams, Instance, SampleSet, Schedule
from .stochastics import DiscreteDistribution, GeneratorSpec, out_of_sample_cost, wasserstein_1

__version__ = "0.1.0"

__all__ = [
    "CostParams", "DiscreteDistribution", "DroSolution", "ExperimentConfig", "ExperimentResult", "GeneratorSpec",
    "Instance", "SampleSet", "Schedule", "WassersteinBall", "cross_validate_epsilon", "out_of_sample_cost",
    "solve_saa", "solve_wdras", "solve_wns", "stress_test", "wasserstein_1", "worst_case_distribution",
    "worst_case_distribution_noshow",
]
