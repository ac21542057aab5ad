"""Linearizability and lock-freedom checking of concurrent objects by
divergence-sensitive branching bisimulation."""

__version__ = "0.1.0"
