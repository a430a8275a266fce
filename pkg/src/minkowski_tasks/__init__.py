"""Relativistic quantum tasks in Minkowski space: geometry, simulation and feasibility analysis."""

__version__ = "0.1.0"
