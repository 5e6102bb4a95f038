# Import the model components to make them available from wsdt.models
from .config import ModelConfig
from .blocks import Attention, Mlp, OutputHead, TimestepEmbedder, TransBlock, modulate
from .transformer import WSDT
from .discriminator import Discriminator

__all__ = [
    "ModelConfig",
    "Attention",
    "Mlp",
    "OutputHead",
    "TimestepEmbedder",
    "TransBlock",
    "modulate",
    "WSDT",
    "Discriminator",
]
