"""
Reconstruction and adversarial objectives.
"""

from ..autodiff import as_tensor, softplus
from ..exceptions import DimensionError
from ..wavelet import mdwt


def loss_recon(prediction, target, levels):
    """
    L1 reconstruction in the pixel and wavelet domains.

    Args:
        prediction (Tensor): Ĩ_0
        target: I_0, array or Tensor
        levels (int): wavelet levels J

    Returns:
        tuple: (L_pixel, L_fre) scalar Tensors
    """
    prediction, target = as_tensor(prediction), as_tensor(target)
    if prediction.shape != target.shape:
        raise DimensionError(f"reconstruction shapes differ: {prediction.shape} vs {target.shape}")
    pixel = (prediction - target).abs().mean()
    frequency = (mdwt(prediction, levels).data - mdwt(target, levels).data).abs().mean()
    return pixel, frequency


def discriminator_loss(real_logits, fake_logits):
    """−log σ(D(real)) − log(1 − σ(D(fake))), averaged over the batch."""
    return softplus(-real_logits).mean() + softplus(fake_logits).mean()


def generator_loss(fake_logits):
    """Non-saturating generator loss −log σ(D(fake))."""
    return softplus(-fake_logits).mean()


def loss_adv(discriminator, previous_real, previous_fake, current, t):
    """
    Adversarial losses on (I_{t−1}, I_t) pairs.

    Returns:
        tuple: (L_D, L_G); gradients of L_D reach the fake sample too, so
        detach it before a discriminator update
    """
    real_logits = discriminator(previous_real, current, t)
    fake_logits = discriminator(previous_fake, current, t)
    return discriminator_loss(real_logits, fake_logits), generator_loss(fake_logits)
