"""Network assembly: layers, loss, optimizer, checkpoints, gradient checks."""

from .adam import Adam
from .checkpoint import config_hash, load_checkpoint, save_checkpoint
from .gradcheck import (
    check_conv_gradients,
    check_network_gradients,
    random_adjacency,
    random_pool_map,
    relative_error,
    synthesize_sample,
)
from .layers import BatchNorm, Dense, InstanceNorm
from .loss import cross_entropy, softmax
from .network import NetConfig, Network, NetworkInput

__all__ = [
    "Adam",
    "BatchNorm",
    "Dense",
    "InstanceNorm",
    "NetConfig",
    "Network",
    "NetworkInput",
    "check_conv_gradients",
    "check_network_gradients",
    "config_hash",
    "cross_entropy",
    "load_checkpoint",
    "random_adjacency",
    "random_pool_map",
    "relative_error",
    "save_checkpoint",
    "softmax",
    "synthesize_sample",
]
