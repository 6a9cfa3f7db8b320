"""Modulo factored-POMDP environment, datasets, and enumeration oracles."""

from .config import EnvConfig, config_hash
from .dataset import (
    Dataset,
    TrainBatch,
    generate_dataset,
    load_dataset,
    save_dataset,
    stack_episodes,
)
from .modulo import (
    Episode,
    PropertyReport,
    action_options,
    ground_truth_graph,
    reward,
    rollout,
    sample_action,
    sample_noise,
    step,
    verify_properties,
)
from .oracle import TabularTransitionModel, enumerate_states, enumeration_cmi, noise_entropy

__all__ = [
    "Dataset",
    "EnvConfig",
    "Episode",
    "PropertyReport",
    "TabularTransitionModel",
    "TrainBatch",
    "action_options",
    "config_hash",
    "enumerate_states",
    "enumeration_cmi",
    "generate_dataset",
    "ground_truth_graph",
    "load_dataset",
    "noise_entropy",
    "reward",
    "rollout",
    "sample_action",
    "sample_noise",
    "save_dataset",
    "stack_episodes",
    "step",
    "verify_properties",
]
