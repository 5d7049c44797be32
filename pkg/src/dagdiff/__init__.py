"""Latent-space DAG diffusion for one-way spreading on manifold graphs."""

from .dag import build_dag, build_hop_dag, spectrum_report
from .diffusion import DiffusionParams, Trajectory, competitor1, diffuse
from .embedding import Embedding, EmbeddingParams, embed, embed_le, embed_lle
from .generators import LatticeSpec, generate_lattice
from .graph_core import Dag, UndirectedGraph, build_directed_laplacian, build_laplacian, validate_dag
from .metrics import compare, deltacon_similarity, mse_over_time, relative_error, tune_parameters
from .montecarlo import SimConfig, SimSignal, simulate

__version__ = "0.1.0"
