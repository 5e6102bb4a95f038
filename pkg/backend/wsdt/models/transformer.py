"""
The wavelet spectrum denoising transformer (WSDT).

One forward pass: noisy pixel image → J-level spectrum → pyramid tokens →
LF elementary decoder (LEDec, mask M_low) → HF detail decoder (HDDec,
mask M_high) → per-stream output heads → spectrum → clean pixel image.
"""

import logging

import numpy as np

from ..autodiff import Module, as_tensor, concat
from ..exceptions import ConfigurationError, ContractError, WSDTError
from ..masks import build_full, build_m_high, build_m_low
from ..tokenizer import PyramidEmbedding, Segment, detokenize, tokenize
from ..wavelet import imdwt, mdwt
from .blocks import OutputHead, TimestepEmbedder, TransBlock

logger = logging.getLogger(__name__)


class StageError:
    """Re-raise library errors from a forward stage with the stage name prefixed."""

    def __init__(self, stage):
        self.stage = stage

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, WSDTError) and not getattr(exc, "stage", None):
            wrapped = type(exc)(f"{self.stage}: {exc}")
            wrapped.stage = self.stage
            raise wrapped from exc
        return False


class WSDT(Module):
    """
    Denoiser predicting the clean image Ĩ_0 from (I_t, I_lr, t).

    Args:
        config (ModelConfig): geometry and architecture
        seed (int): initialisation seed
    """

    def __init__(self, config, seed=0):
        rng = np.random.default_rng(seed)
        self.config = config
        self.plan = config.plan()
        self.embed = PyramidEmbedding(self.plan, rng)
        self.t_embedder = TimestepEmbedder(config.dim, config.timesteps, rng)
        self.ledec = [
            TransBlock(config.dim, config.n_heads, config.mlp_ratio, rng)
            for _ in range(config.depth_le)
        ]
        self.hddec = [
            TransBlock(config.dim, config.n_heads, config.mlp_ratio, rng)
            for _ in range(config.depth_hd)
        ]
        self.heads = {
            stream.key: OutputHead(config.dim, stream.features * config.channels, rng)
            for stream in self.plan.streams
            if stream.segment is not Segment.LR
        }

        self.n_lr = self.plan.count(Segment.LR)
        self.n_lf = self.plan.count(Segment.LF)
        self.n_hf = self.plan.count(Segment.HF)
        segments = self.plan.segments
        self.mask_low = build_m_low(segments[:self.n_lr + self.n_lf])
        if config.hf_mask == "full":
            self.mask_high = build_full(segments)
        else:
            self.mask_high = build_m_high(segments)
        logger.debug(
            f"WSDT with {self.plan.token_count} tokens "
            f"({self.n_lr} LR, {self.n_lf} LF, {self.n_hf} HF), {self.num_parameters()} parameters"
        )

    def embed_time(self, t):
        return self.t_embedder(t)

    def _check_block(self, tokens, count, name):
        if tokens.shape[-2] != count or tokens.shape[-1] != self.config.dim:
            raise ContractError(
                f"{name} block has shape {tokens.shape}, expected {count} tokens of width {self.config.dim}"
            )

    def ledec_forward(self, f_lr, f_lf, t, temb=None):
        """
        LF elementary decoder over [LR | LF] under M_low.

        Returns:
            tuple: (f̃_lr, f̃_Le)
        """
        self._check_block(f_lr, self.n_lr, "LR")
        self._check_block(f_lf, self.n_lf, "LF")
        temb = self.embed_time(t) if temb is None else temb
        x = concat([f_lr, f_lf], axis=-2)
        for block in self.ledec:
            x = block(x, self.mask_low, temb)
        return x[..., :self.n_lr, :], x[..., self.n_lr:, :]

    def hddec_forward(self, f_lr, f_le, f_hf, t, temb=None):
        """
        HF detail decoder over [LR | LF | HF] under M_high.

        Returns:
            tuple: (f̂_lr, f̃_Lr, F̃_H); the LR output is not used downstream
        """
        self._check_block(f_lr, self.n_lr, "LR")
        self._check_block(f_le, self.n_lf, "LF")
        self._check_block(f_hf, self.n_hf, "HF")
        temb = self.embed_time(t) if temb is None else temb
        x = concat([f_lr, f_le, f_hf], axis=-2)
        for block in self.hddec:
            x = block(x, self.mask_high, temb)
        split = self.n_lr + self.n_lf
        return x[..., :self.n_lr, :], x[..., self.n_lr:split, :], x[..., split:, :]

    def _check_inputs(self, noisy, lr):
        config = self.config
        if tuple(noisy.shape[-3:]) != config.hr_shape:
            raise ConfigurationError(f"noisy image {noisy.shape} does not match HR geometry {config.hr_shape}")
        if tuple(lr.shape[-3:]) != config.lr_shape:
            raise ConfigurationError(f"LR image {lr.shape} does not match LR geometry {config.lr_shape}")
        if noisy.shape[:-3] != lr.shape[:-3]:
            raise ConfigurationError(f"batch axes differ: {noisy.shape} vs {lr.shape}")

    def forward(self, noisy, lr, t):
        """
        Predict the clean image.

        Args:
            noisy: (..., H, W, C) I_t, array or Tensor
            lr: (..., H/N, W/N, C) LR condition
            t (int | array): timestep, scalar or one per leading batch entry

        Returns:
            Tensor: Ĩ_0 with the shape of ``noisy``

        Raises:
            WSDTError: from any stage, with the stage name prefixed
        """
        noisy, lr = as_tensor(noisy), as_tensor(lr)
        with StageError("input"):
            self._check_inputs(noisy, lr)
            temb = self.embed_time(t)
        with StageError("tokenize"):
            tokens = tokenize(mdwt(noisy, self.config.levels), lr, self.plan, self.embed)
            f_lr = tokens.block(Segment.LR)
            f_lf = tokens.block(Segment.LF)
            f_hf = tokens.block(Segment.HF)
        with StageError("ledec"):
            f_lr, f_le = self.ledec_forward(f_lr, f_lf, t, temb=temb)
        with StageError("hddec"):
            _, f_res, f_hf = self.hddec_forward(f_lr, f_le, f_hf, t, temb=temb)
        with StageError("detokenize"):
            lf = f_le + f_res if self.config.lf_residual else f_le
            spectrum = detokenize(lf, f_hf, self.plan, self.heads, temb)
            return imdwt(spectrum)
