"""Simulator and closure constructions for two-way finite automata with quantum and classical states."""
from .machine import Machine, MachineBuilder, validate, check
from .execution import Verdict, exact_eval, estimate_acceptance

__all__ = ["Machine", "MachineBuilder", "validate", "check", "Verdict", "exact_eval", "estimate_acceptance"]
__version__ = "0.1.0"
