# src/models/__init__.py
"""
Model Package
Matrix types, operator maps and superoperators of the stochastic master equation
"""

from .model_schema import load_model, parse_model, serialize_model
from .operators import ChannelKind, SmeModel, SubspaceSplit, block_decompose
from .superop import Generator, generator_superop, mean_evolve, reduced_generators

__all__ = [
    "ChannelKind",
    "Generator",
    "SmeModel",
    "SubspaceSplit",
    "block_decompose",
    "generator_superop",
    "load_model",
    "mean_evolve",
    "parse_model",
    "reduced_generators",
    "serialize_model",
]
