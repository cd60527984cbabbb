from .loop import (
    SearchConfig,
    SearchData,
    alpha_entropy,
    derive_architecture,
    run_search,
    search_data_from_synth,
    search_loss,
)
from .space import SEARCH_SPACES, SearchSpace, get_search_space
from .supernet import MixedLayer, Supernet, SupernetState, gumbel_weights, init_supernet

__all__ = [
    "SearchConfig",
    "SearchData",
    "alpha_entropy",
    "derive_architecture",
    "run_search",
    "search_data_from_synth",
    "search_loss",
    "SEARCH_SPACES",
    "SearchSpace",
    "get_search_space",
    "MixedLayer",
    "Supernet",
    "SupernetState",
    "gumbel_weights",
    "init_supernet",
]
