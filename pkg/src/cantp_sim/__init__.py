"""Simulated ISO 15765-2 transport with attack injection and mitigations."""
from .codec import decode_tp_frame, encode_tp_frame
from .scenario import Scenario, load_scenario, run_matrix, run_scenario

__all__ = ["decode_tp_frame", "encode_tp_frame", "Scenario", "load_scenario", "run_matrix", "run_scenario"]
__version__ = "0.1.0"
