"""Exact distinguishability analysis and runtime monitors for hidden Markov chains."""

from . import corpus
from .distinguish import (DistinguishabilityReport, TestSet, compute_test_set, dist, equivalent,
                          profile_constant, refined_constant, select_event)
from .forward import ForwardFilter, StreamTracker, cd, lr, pr, sub
from .model import ClassifiedHmc, Hmc, ModelError, load_model, parse_model
from .monitors import (MonitorPlan, Verdict, plan_multi, plan_two_sided, run_m1, run_m2,
                       run_m2prime, run_multi)
from .rv import condition, decide_monitorable
from .sampling import sample_run

__all__ = [
    "ClassifiedHmc", "DistinguishabilityReport", "ForwardFilter", "Hmc", "ModelError",
    "MonitorPlan", "StreamTracker", "TestSet", "Verdict", "cd", "compute_test_set", "dist",
    "equivalent", "load_model", "lr", "parse_model", "plan_multi", "plan_two_sided", "pr",
    "profile_constant", "refined_constant", "run_m1", "run_m2", "run_m2prime", "run_multi",
    "select_event", "sub", "condition", "corpus", "decide_monitorable", "sample_run",
]

__version__ = "0.1.0"
