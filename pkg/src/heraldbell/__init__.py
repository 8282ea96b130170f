"""Heralded mapping of photonic entanglement into two remote atoms.

Closed-form planning, exact state algebra and seeded Monte Carlo for a
heralded, loophole-free CHSH test with 40Ca+ ions.
"""
from .planner import ExperimentParams, PlannerReport, plan
from .quantum import DensityMatrix, PureState, chsh, werner
from .simulate import RecordBatch, SimConfig, TrialRecord, run_campaign
from .stats import ChshEstimate, ChshEstimator, estimate

__all__ = [
    "ExperimentParams", "PlannerReport", "plan",
    "DensityMatrix", "PureState", "chsh", "werner",
    "RecordBatch", "SimConfig", "TrialRecord", "run_campaign",
    "ChshEstimate", "ChshEstimator", "estimate",
]

__version__ = "0.1.0"
