"""Clustered ad hoc networks under a shot-noise Cox process.

Topology sampling, intensity analysis, closed-form capacity exponents,
cut-set upper bounds, transport infrastructures and the nested-domain
hierarchy.
"""
from .errors import (FitError, InfeasibleThinningError, InvalidGeometryError, InvalidParameterError,
                     InvalidPartitionError, NoStripFound, SncpError, SupercriticalMuError,
                     TooFewNodesError, WrongConditionError)
from .params import ChannelParams, ModelParams
from .sncp import Topology, sample_topology

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "ModelParams", "Topology", "sample_topology",
    "FitError", "InfeasibleThinningError", "InvalidGeometryError", "InvalidParameterError",
    "InvalidPartitionError", "NoStripFound", "SncpError", "SupercriticalMuError",
    "TooFewNodesError", "WrongConditionError",
]
