from .losses import discriminator_loss, generator_loss, loss_adv, loss_recon
from .synth import GENERATORS, SynthSpec, generate_synth
from .trainer import TrainConfig, Trainer, load_generator

__all__ = [
    "discriminator_loss",
    "generator_loss",
    "loss_adv",
    "loss_recon",
    "GENERATORS",
    "SynthSpec",
    "generate_synth",
    "TrainConfig",
    "Trainer",
    "load_generator",
]
