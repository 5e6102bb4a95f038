"""
Few-step Gaussian diffusion: schedule, forward perturbation, posterior
sampling and the conditional super-resolution sampling loop.

ᾱ_t is the cumulative signal coefficient: q(I_t | I_0) = N(√ᾱ_t I_0, (1 − ᾱ_t) I).
The clean image is the state before step 0, with ᾱ_{−1} = 1.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np

from .autodiff import get_default_dtype, no_grad
from .exceptions import ConfigurationError, ContractError

logger = logging.getLogger(__name__)

DEFAULT_ALPHA_BAR = (0.9801, 0.64, 0.16, 0.01)
# Lower bound on √ᾱ_0; the default schedule sits exactly on it.
MIN_FIRST_SQRT_ALPHA_BAR = 0.99
BOUND_SLACK = 1e-9
MAX_LAST_ALPHA_BAR = 0.05


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Cumulative signal coefficients ᾱ_0 > … > ᾱ_{T−1}.

    Raises:
        ConfigurationError: unless the values lie in (0, 1), strictly decrease,
            end at or below 0.05 and (for T ≥ 2) start with √ᾱ_0 at or above 0.99
    """

    alpha_bar: tuple = DEFAULT_ALPHA_BAR

    def __post_init__(self):
        values = tuple(float(value) for value in self.alpha_bar)
        object.__setattr__(self, "alpha_bar", values)
        if not values:
            raise ConfigurationError("noise schedule needs at least one step")
        if any(not 0.0 < value < 1.0 for value in values):
            raise ConfigurationError(f"alpha_bar values must lie in (0, 1), got {list(values)}")
        if any(later >= earlier for earlier, later in zip(values, values[1:])):
            raise ConfigurationError(f"alpha_bar must be strictly decreasing, got {list(values)}")
        if values[-1] > MAX_LAST_ALPHA_BAR:
            raise ConfigurationError(f"alpha_bar must end at or below {MAX_LAST_ALPHA_BAR}, got {values[-1]}")
        if len(values) >= 2 and math.sqrt(values[0]) < MIN_FIRST_SQRT_ALPHA_BAR - BOUND_SLACK:
            raise ConfigurationError(
                f"alpha_bar must start at or above {MIN_FIRST_SQRT_ALPHA_BAR}^2, got {values[0]}"
            )

    @classmethod
    def default(cls, timesteps=4):
        """
        The T=4 schedule √ᾱ = [0.99, 0.8, 0.4, 0.1]; other T space √ᾱ linearly
        between 0.99 and 0.1 (T=1 keeps only the final 0.01).
        """
        if timesteps == len(DEFAULT_ALPHA_BAR):
            return cls(DEFAULT_ALPHA_BAR)
        if timesteps < 1:
            raise ConfigurationError(f"timesteps must be >= 1, got {timesteps}")
        if timesteps == 1:
            return cls((0.01,))
        roots = np.linspace(0.99, 0.1, timesteps)
        return cls(tuple(float(root * root) for root in roots))

    @property
    def timesteps(self):
        return len(self.alpha_bar)

    def previous(self, t):
        """ᾱ_{t−1}, with ᾱ_{−1} = 1."""
        return self.alpha_bar[t - 1] if t >= 1 else 1.0

    def alpha(self, t):
        """Per-step α_t = ᾱ_t / ᾱ_{t−1}."""
        return self.alpha_bar[t] / self.previous(t)

    def beta(self, t):
        return 1.0 - self.alpha(t)

    def posterior_variance(self, t):
        """β̃_t = (1 − ᾱ_{t−1}) / (1 − ᾱ_t) · β_t."""
        return (1.0 - self.previous(t)) / (1.0 - self.alpha_bar[t]) * self.beta(t)

    def posterior_coefficients(self, t):
        """Weights of Ĩ_0 and I_t in the posterior mean."""
        alpha_bar, previous, beta = self.alpha_bar[t], self.previous(t), self.beta(t)
        coef_x0 = np.sqrt(previous) * beta / (1.0 - alpha_bar)
        coef_xt = np.sqrt(self.alpha(t)) * (1.0 - previous) / (1.0 - alpha_bar)
        return float(coef_x0), float(coef_xt)

    def check_step(self, t, low=0):
        if isinstance(t, bool) or not isinstance(t, (int, np.integer)):
            raise ContractError(f"timestep must be an integer, got {t!r}")
        if not low <= t < self.timesteps:
            raise ContractError(f"timestep {t} outside [{low}, {self.timesteps})")
        return int(t)

    def to_list(self):
        return list(self.alpha_bar)


def _noise(rng, shape, noise):
    if noise is not None:
        return np.asarray(noise, dtype=get_default_dtype())
    return rng.standard_normal(shape).astype(get_default_dtype())


def forward_sample(x0, t, schedule, rng, noise=None):
    """
    Draw I_t ~ q(I_t | I_0) = N(√ᾱ_t I_0, (1 − ᾱ_t) I).

    Args:
        x0 (np.ndarray): clean images
        t (int): step in [0, T)
        schedule (NoiseSchedule): coefficients
        rng (np.random.Generator): noise source
        noise (np.ndarray | None): fixed ε instead of a draw

    Raises:
        ContractError: If t is out of range
    """
    t = schedule.check_step(t)
    x0 = np.asarray(x0, dtype=get_default_dtype())
    eps = _noise(rng, x0.shape, noise)
    alpha_bar = schedule.alpha_bar[t]
    return (np.sqrt(alpha_bar) * x0 + np.sqrt(1.0 - alpha_bar) * eps).astype(x0.dtype)


def sample_pair(x0, t, schedule, rng):
    """
    Joint draw of (I_{t−1}, I_t) through the one-step Markov kernel.

    I_{t−1} ~ q(I_{t−1} | I_0), then I_t = √α_t I_{t−1} + √β_t ε. At t = 0 the
    previous state is the clean image itself.
    """
    t = schedule.check_step(t)
    x0 = np.asarray(x0, dtype=get_default_dtype())
    if t == 0:
        return x0, forward_sample(x0, 0, schedule, rng)
    previous = forward_sample(x0, t - 1, schedule, rng)
    eps = _noise(rng, x0.shape, None)
    current = np.sqrt(schedule.alpha(t)) * previous + np.sqrt(schedule.beta(t)) * eps
    return previous, current.astype(x0.dtype)


def posterior_sample(xt, x0_pred, t, schedule, rng, noise=None):
    """
    Draw Ĩ_{t−1} ~ q(I_{t−1} | I_t, Ĩ_0).

    The mean mixes Ĩ_0 and I_t with the posterior coefficients; the variance is
    β̃_t. At t − 1 = 0 the mean is returned without noise. ``x0_pred`` may be a
    Tensor, in which case the result stays on its gradient tape.

    Raises:
        ContractError: If t is not in [1, T)
    """
    t = schedule.check_step(t, low=1)
    coef_x0, coef_xt = schedule.posterior_coefficients(t)
    xt = np.asarray(xt, dtype=get_default_dtype())
    mean = coef_x0 * x0_pred + coef_xt * xt
    if t - 1 == 0:
        return mean
    eps = _noise(rng, xt.shape, noise)
    return mean + float(np.sqrt(schedule.posterior_variance(t))) * eps


def sr_sample(lr, model, schedule, rng):
    """
    Conditional sampling loop: start from N(0, I) at HR size and denoise.

    The model is evaluated at t = T−1, …, 0 (T evaluations). Steps t ≥ 1 move
    to I_{t−1} with ``posterior_sample``; the last evaluation's Ĩ_0 is the
    result, clamped to [−1, 1].

    Args:
        lr (np.ndarray): (..., h, w, C) LR condition in [−1, 1]
        model (WSDT): denoiser
        schedule (NoiseSchedule): must have T = model.config.timesteps
        rng (np.random.Generator): noise source

    Raises:
        ConfigurationError: If the LR geometry or T does not match the model
    """
    config = model.config
    lr = np.asarray(lr, dtype=get_default_dtype())
    if tuple(lr.shape[-3:]) != config.lr_shape:
        raise ConfigurationError(f"LR image {lr.shape} does not match model LR geometry {config.lr_shape}")
    if schedule.timesteps != config.timesteps:
        raise ConfigurationError(
            f"schedule has {schedule.timesteps} steps, model expects {config.timesteps}"
        )
    shape = tuple(lr.shape[:-3]) + config.hr_shape
    x = rng.standard_normal(shape).astype(get_default_dtype())
    with no_grad():
        for t in range(schedule.timesteps - 1, 0, -1):
            x0 = model(x, lr, t).data
            x = posterior_sample(x, x0, t, schedule, rng)
            logger.debug(f"sampling step t={t} done")
        x0 = model(x, lr, 0).data
    return np.clip(x0, -1.0, 1.0)
