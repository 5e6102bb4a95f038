"""
Adversarial diffusion training of the WSDT denoiser.

Each step draws one timestep t for the batch, builds the real pair
(I_{t−1}, I_t) from the forward process and the fake I_{t−1} from the
posterior around the generator's Ĩ_0, updates the discriminator, then the
generator on α·L_adv + β·L_pixel + γ·L_fre.
"""

from dataclasses import asdict, dataclass, fields
import json
import logging
import math
from pathlib import Path

import numpy as np

from ..autodiff import Adam, backward
from ..diffusion import NoiseSchedule, posterior_sample, sample_pair
from ..exceptions import ConfigurationError, NumericalError
from ..models import WSDT, Discriminator, ModelConfig
from ..utils.checkpoint import load_checkpoint, save_checkpoint
from .losses import discriminator_loss, generator_loss, loss_recon

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimisation settings.

    Attributes:
        iterations: total training steps
        batch_size: pairs per step
        lr_g, lr_d: generator and discriminator step sizes
        alpha, beta, gamma: weights of L_adv, L_pixel and L_fre
        seed: initialisation and sampling seed
        log_every: INFO log period in steps
        checkpoint_every: checkpoint period in steps (0 = only at the end)
        disc_width: discriminator features in its first block
    """

    iterations: int
    batch_size: int = 4
    lr_g: float = 1.6e-4
    lr_d: float = 1.25e-4
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    seed: int = 0
    log_every: int = 50
    checkpoint_every: int = 1000
    disc_width: int = 64

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"loss weight {name} must be >= 0, got {getattr(self, name)}")
        for name in ("lr_g", "lr_d"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.iterations < 0 or self.batch_size < 1:
            raise ConfigurationError(
                f"need iterations >= 0 and batch_size >= 1, got {self.iterations} and {self.batch_size}"
            )
        if self.log_every < 1 or self.checkpoint_every < 0 or self.disc_width < 1:
            raise ConfigurationError("log_every, checkpoint_every and disc_width must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {field.name for field in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown train config keys: {unknown}")
        return cls(**data)


class Trainer:
    """
    Owns the generator, discriminator, both optimizers and the sampling RNG.

    Args:
        model_config (ModelConfig): generator geometry
        schedule (NoiseSchedule): diffusion schedule; T must match the model
        train_config (TrainConfig): optimisation settings
        dataset (list | None): (HR, LR) pairs in [−1, 1]
    """

    def __init__(self, model_config, schedule, train_config, dataset=None):
        if schedule.timesteps != model_config.timesteps:
            raise ConfigurationError(
                f"schedule has {schedule.timesteps} steps, model expects {model_config.timesteps}"
            )
        self.model_config = model_config
        self.schedule = schedule
        self.config = train_config
        self.generator = WSDT(model_config, seed=train_config.seed)
        self.discriminator = Discriminator(
            model_config.image_size, model_config.channels, model_config.timesteps,
            width=train_config.disc_width, seed=train_config.seed + 1,
        )
        self.opt_g = Adam(self.generator.named_parameters(), train_config.lr_g)
        self.opt_d = Adam(self.discriminator.named_parameters(), train_config.lr_d)
        self.rng = np.random.default_rng(train_config.seed)
        self.iteration = 0
        self.hr = self.lr = None
        if dataset:
            self.set_dataset(dataset)

    def set_dataset(self, dataset):
        hr = np.stack([pair[0] for pair in dataset]).astype(np.float32)
        lr = np.stack([pair[1] for pair in dataset]).astype(np.float32)
        if hr.shape[1:] != self.model_config.hr_shape or lr.shape[1:] != self.model_config.lr_shape:
            raise ConfigurationError(
                f"dataset pairs {hr.shape[1:]}/{lr.shape[1:]} do not match model geometry "
                f"{self.model_config.hr_shape}/{self.model_config.lr_shape}"
            )
        self.hr, self.lr = hr, lr

    def sample_batch(self):
        if self.hr is None:
            raise ConfigurationError("trainer has no dataset")
        count = len(self.hr)
        size = self.config.batch_size
        indices = self.rng.choice(count, size=size, replace=count < size)
        return self.hr[indices], self.lr[indices]

    def train_step(self, hr, lr):
        """
        One discriminator update followed by one generator update.

        Args:
            hr (np.ndarray): (B, H, W, C) clean images I_0
            lr (np.ndarray): (B, h, w, C) LR conditions

        Returns:
            dict: t and the scalar losses

        Raises:
            NumericalError: If a loss is not finite. Neither network nor optimizer
                keeps a partial update.
        """
        config = self.config
        # t = 0 is the final denoising step; its previous state is the clean image (alpha_bar_{-1} = 1).
        t = int(self.rng.integers(0, self.schedule.timesteps))
        previous_real, current = sample_pair(hr, t, self.schedule, self.rng)

        x0_pred = self.generator(current, lr, t)
        if t == 0:
            previous_fake = x0_pred
        else:
            previous_fake = posterior_sample(current, x0_pred, t, self.schedule, self.rng)

        real_logits = self.discriminator(previous_real, current, t)
        fake_logits = self.discriminator(previous_fake.detach(), current, t)
        loss_d = discriminator_loss(real_logits, fake_logits)
        loss_pixel, loss_fre = loss_recon(x0_pred, hr, self.model_config.levels)
        self._check_finite(
            {"loss_d": loss_d.item(), "loss_pixel": loss_pixel.item(), "loss_fre": loss_fre.item()}, t
        )

        snapshot = self._discriminator_state()
        self.opt_d.zero_grad()
        backward(loss_d)
        self.opt_d.step()

        loss_g_adv = generator_loss(self.discriminator(previous_fake, current, t))
        loss_g = config.alpha * loss_g_adv + config.beta * loss_pixel + config.gamma * loss_fre
        losses = {
            "loss_d": loss_d.item(),
            "loss_g_adv": loss_g_adv.item(),
            "loss_pixel": loss_pixel.item(),
            "loss_fre": loss_fre.item(),
            "loss_g": loss_g.item(),
        }
        try:
            self._check_finite(losses, t)
        except NumericalError:
            self._restore_discriminator(snapshot)
            raise
        self.opt_g.zero_grad()
        backward(loss_g)
        self.opt_g.step()
        self.discriminator.zero_grad()
        return {"t": t, **{key: float(value) for key, value in losses.items()}}

    def _discriminator_state(self):
        return self.discriminator.state_dict(), self.opt_d.state_dict(), self.opt_d.step_count

    def _restore_discriminator(self, snapshot):
        params, moments, step_count = snapshot
        self.discriminator.load_state_dict(params)
        self.opt_d.load_state_dict(moments, step_count)
        self.discriminator.zero_grad()

    def _check_finite(self, losses, t):
        bad = {key: value for key, value in losses.items() if not math.isfinite(value)}
        if bad:
            message = f"non-finite loss at iteration {self.iteration + 1} (t={t}): {bad}"
            logger.error(message)
            raise NumericalError(message)

    def fit(self, iterations=None, out_dir=None):
        """
        Train until ``iterations`` total steps (default: the config's).

        With ``out_dir`` set, appends one JSON line per step to
        ``train_log.jsonl`` and writes ``checkpoints/step_NNNNNN.wsdt`` plus
        ``latest.wsdt`` every ``checkpoint_every`` steps and at the end. A
        non-finite loss writes the last good state before the error propagates.

        Returns:
            list: per-step loss records of this call
        """
        target = self.config.iterations if iterations is None else iterations
        out_dir = Path(out_dir) if out_dir is not None else None
        log_handle = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            log_handle = open(out_dir / "train_log.jsonl", "a", encoding="utf-8")
        history = []
        saved_at = None
        try:
            while self.iteration < target:
                rng_state = self.rng.bit_generator.state
                try:
                    record = self.train_step(*self.sample_batch())
                except NumericalError:
                    self.rng.bit_generator.state = rng_state
                    if out_dir is not None and saved_at != self.iteration:
                        path = self.write_checkpoints(out_dir)
                        logger.error(f"Kept last good state of iteration {self.iteration} in {path}")
                    raise
                self.iteration += 1
                record = {"iteration": self.iteration, **record}
                history.append(record)
                if log_handle is not None:
                    log_handle.write(json.dumps(record, sort_keys=True) + "\n")
                    log_handle.flush()
                if self.iteration % self.config.log_every == 0:
                    logger.info(
                        f"iteration {self.iteration}/{target} t={record['t']} "
                        f"L_D={record['loss_d']:.4f} L_adv={record['loss_g_adv']:.4f} "
                        f"L_pixel={record['loss_pixel']:.4f} L_fre={record['loss_fre']:.4f}"
                    )
                every = self.config.checkpoint_every
                if out_dir is not None and every and self.iteration % every == 0:
                    self.write_checkpoints(out_dir)
                    saved_at = self.iteration
        finally:
            if log_handle is not None:
                log_handle.close()
        if out_dir is not None and saved_at != self.iteration:
            self.write_checkpoints(out_dir)
        return history

    def write_checkpoints(self, out_dir):
        out_dir = Path(out_dir)
        step_path = out_dir / "checkpoints" / f"step_{self.iteration:06d}.wsdt"
        self.save(step_path)
        self.save(out_dir / "latest.wsdt")
        return step_path

    # ------------------------------------------------------------------
    # Persistence

    def metadata(self):
        return {
            "kind": "wsdt-trainer",
            "model": self.model_config.to_dict(),
            "schedule": self.schedule.to_list(),
            "train": self.config.to_dict(),
            "iteration": self.iteration,
            "seed": self.config.seed,
            "rng_state": self.rng.bit_generator.state,
            "opt_g_step": self.opt_g.step_count,
            "opt_d_step": self.opt_d.step_count,
        }

    def arrays(self):
        arrays = {}
        for prefix, state in (
            ("generator.", self.generator.state_dict()),
            ("discriminator.", self.discriminator.state_dict()),
            ("opt_g.", self.opt_g.state_dict()),
            ("opt_d.", self.opt_d.state_dict()),
        ):
            for name, values in state.items():
                arrays[prefix + name] = values
        return arrays

    def save(self, path):
        return save_checkpoint(path, self.metadata(), self.arrays())

    def load_state(self, metadata, arrays):
        """Restore parameters, optimizer moments, iteration and RNG state."""
        model = ModelConfig.from_dict(metadata["model"])
        if model != self.model_config:
            raise ConfigurationError(
                f"checkpoint geometry {model.to_dict()} does not match {self.model_config.to_dict()}"
            )
        if tuple(metadata["schedule"]) != self.schedule.alpha_bar:
            raise ConfigurationError("checkpoint noise schedule does not match the run configuration")
        self.generator.load_state_dict(_section(arrays, "generator."))
        self.discriminator.load_state_dict(_section(arrays, "discriminator."))
        self.opt_g.load_state_dict(_section(arrays, "opt_g."), metadata["opt_g_step"])
        self.opt_d.load_state_dict(_section(arrays, "opt_d."), metadata["opt_d_step"])
        self.iteration = int(metadata["iteration"])
        self.rng.bit_generator.state = metadata["rng_state"]

    @classmethod
    def from_checkpoint(cls, path, dataset=None, train_config=None):
        """
        Rebuild a trainer from a checkpoint, optionally with new train settings
        (e.g. more iterations). Geometry always comes from the checkpoint.
        """
        metadata, arrays = load_checkpoint(path)
        model = ModelConfig.from_dict(metadata["model"])
        schedule = NoiseSchedule(tuple(metadata["schedule"]))
        config = train_config or TrainConfig.from_dict(metadata["train"])
        trainer = cls(model, schedule, config, dataset)
        trainer.load_state(metadata, arrays)
        return trainer


def _section(arrays, prefix):
    return {name[len(prefix):]: values for name, values in arrays.items() if name.startswith(prefix)}


def load_generator(path):
    """
    Load only the denoiser from a checkpoint.

    Returns:
        tuple: (WSDT, NoiseSchedule, metadata)
    """
    metadata, arrays = load_checkpoint(path)
    try:
        config = ModelConfig.from_dict(metadata["model"])
        schedule = NoiseSchedule(tuple(metadata["schedule"]))
    except KeyError as exc:
        raise ConfigurationError(f"checkpoint {path} is missing metadata field {exc}") from exc
    model = WSDT(config, seed=int(metadata.get("seed", 0)))
    model.load_state_dict(_section(arrays, "generator."))
    return model, schedule, metadata
