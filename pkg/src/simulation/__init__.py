# src/simulation/__init__.py
"""
Simulation Package
Jump-diffusion quantum trajectories, seeded ensembles and the ln V replay
"""

from .doleans import doleans_track
from .ensemble import Ensemble, ensemble
from .trajectory import StepRecord, Trajectory, simulate, step

__all__ = [
    "Ensemble",
    "StepRecord",
    "Trajectory",
    "doleans_track",
    "ensemble",
    "simulate",
    "step",
]
