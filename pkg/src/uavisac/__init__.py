"""Simulation and learning toolkit for a UAV-carried reflecting surface serving joint sensing and communication."""

__version__ = "0.1.0"
