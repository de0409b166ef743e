"""Hull decompositions of two point sets and explicit two-hidden-layer networks separating them."""
__version__ = "0.1.0"

from .activation import LEAKY_RELU, RELU, SIGMOID, TANH, ActivationSpec, min_delta, solve_x0
from .constructor import ConstructedNetwork, construct, verify_separation
from .dataio import LabeledDataset, load_csv, load_idx, split_binary
from .decomposition import Decomposition, estimate_decomposition, validate_decomposition
from .geometry import hull_distance, max_margin_separator

__all__ = [
    "ActivationSpec", "ConstructedNetwork", "Decomposition", "LabeledDataset",
    "LEAKY_RELU", "RELU", "SIGMOID", "TANH",
    "construct", "estimate_decomposition", "hull_distance", "load_csv", "load_idx",
    "max_margin_separator", "min_delta", "solve_x0", "split_binary",
    "validate_decomposition", "verify_separation",
]
