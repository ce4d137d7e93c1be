"""Link-level simulation of codeword position index SCMA."""

from .codebook import Codebook, FactorGraph, build_factor_graph, load_codebook
from .index_map import IndexLut, bits_to_indices, build_lut, index_bit_count, indices_to_bits
from .mpad import MpadDetector, MpadParams, detect_frame
from .sim import SimConfig, run_sweep

__all__ = [
    "Codebook",
    "FactorGraph",
    "IndexLut",
    "MpadDetector",
    "MpadParams",
    "SimConfig",
    "bits_to_indices",
    "build_factor_graph",
    "build_lut",
    "detect_frame",
    "index_bit_count",
    "indices_to_bits",
    "load_codebook",
    "run_sweep",
]
