"""Discrete denoising diffusion for graphs with categorical node and edge attributes."""

from .denoiser import DenoiserConfig, GraphTransformer
from .graph import DatasetStats, Graph, GraphError, SoftGraph, compute_stats, encode_graph, from_edge_list, permute
from .kernels import BACKEND as KERNEL_BACKEND
from .noise import DiscreteNoise, NoiseSchedule

__version__ = "0.1.0"

__all__ = [
    "DatasetStats",
    "DenoiserConfig",
    "DiscreteNoise",
    "Graph",
    "GraphError",
    "GraphTransformer",
    "KERNEL_BACKEND",
    "NoiseSchedule",
    "SoftGraph",
    "compute_stats",
    "encode_graph",
    "from_edge_list",
    "permute",
]
