"""Deterministic MANET workbench for ADARA and a reference AODV engine."""

from .adara import AdaraNode
from .aodv import AodvNode
from .metrics import RunMetrics, check_trace, compute_metrics, loop_monitor
from .router import DropReason, NodeOutput, ProtocolParams
from .scenario import Scenario, load_scenario, run_scenario

__all__ = [
    "AdaraNode",
    "AodvNode",
    "DropReason",
    "NodeOutput",
    "ProtocolParams",
    "RunMetrics",
    "Scenario",
    "check_trace",
    "compute_metrics",
    "load_scenario",
    "loop_monitor",
    "run_scenario",
]
