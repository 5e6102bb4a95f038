"""
Architecture and geometry settings for the denoising transformer.
"""

from dataclasses import asdict, dataclass, fields

from ..exceptions import ConfigurationError
from ..tokenizer import plan_patches
from ..wavelet import level_for_scale

HF_MASKS = ("high", "full")


@dataclass(frozen=True)
class ModelConfig:
    """
    Geometry and architecture of one WSDT model.

    Attributes:
        image_size: HR height and width
        scale: upscale factor N; the wavelet levels are J = ceil(log2 N)
        channels: image channels
        dim: embedding width D
        n_heads: attention heads
        depth_le: LEDec blocks
        depth_hd: HDDec blocks
        mlp_ratio: MLP hidden width as a multiple of D
        p_min: LF patch size
        lr_patch: LR patch size
        timesteps: diffusion steps T
        pyramid: pyramid patch sizes (False = one patch size everywhere)
        lf_residual: add HDDec's LF residual before the LF head
        hf_mask: "high" for the HF detail mask, "full" for unrestricted attention
    """

    image_size: int
    scale: int
    channels: int = 3
    dim: int = 128
    n_heads: int = 4
    depth_le: int = 2
    depth_hd: int = 2
    mlp_ratio: float = 4.0
    p_min: int = 2
    lr_patch: int = 2
    timesteps: int = 4
    pyramid: bool = True
    lf_residual: bool = True
    hf_mask: str = "high"

    def __post_init__(self):
        if self.dim % 8:
            raise ConfigurationError(f"dim {self.dim} is not divisible by 8")
        if self.n_heads < 1 or self.dim % self.n_heads:
            raise ConfigurationError(f"dim {self.dim} is not divisible by n_heads {self.n_heads}")
        if self.depth_le < 1 or self.depth_hd < 1:
            raise ConfigurationError(
                f"decoder depths must be >= 1, got depth_le={self.depth_le}, depth_hd={self.depth_hd}"
            )
        if self.mlp_ratio <= 0:
            raise ConfigurationError(f"mlp_ratio must be positive, got {self.mlp_ratio}")
        if self.timesteps < 1:
            raise ConfigurationError(f"timesteps must be >= 1, got {self.timesteps}")
        if self.hf_mask not in HF_MASKS:
            raise ConfigurationError(f"hf_mask must be one of {HF_MASKS}, got '{self.hf_mask}'")
        if self.scale < 2:
            raise ConfigurationError(f"scale must be >= 2, got {self.scale}")
        if self.image_size % self.scale:
            raise ConfigurationError(
                f"image_size {self.image_size} is not divisible by scale {self.scale}"
            )
        # Validates the remaining geometry.
        self.plan()

    @classmethod
    def base(cls, **overrides):
        """128² HR at 8×, D=256, six blocks per decoder."""
        values = dict(image_size=128, scale=8, dim=256, depth_le=6, depth_hd=6)
        values.update(overrides)
        return cls(**values)

    @classmethod
    def desk(cls, **overrides):
        """64² HR at 8×, D=128, two blocks per decoder."""
        values = dict(image_size=64, scale=8, dim=128, depth_le=2, depth_hd=2)
        values.update(overrides)
        return cls(**values)

    @classmethod
    def tiny(cls, **overrides):
        """8² HR at 2×, D=16, one block per decoder; for gradient checks."""
        values = dict(image_size=8, scale=2, dim=16, n_heads=2, depth_le=1, depth_hd=1, mlp_ratio=2.0)
        values.update(overrides)
        return cls(**values)

    @property
    def levels(self):
        return level_for_scale(self.scale)

    @property
    def lr_size(self):
        return self.image_size // self.scale

    @property
    def hr_shape(self):
        return (self.image_size, self.image_size, self.channels)

    @property
    def lr_shape(self):
        return (self.lr_size, self.lr_size, self.channels)

    def plan(self):
        return plan_patches(
            self.image_size, self.image_size, self.levels, self.p_min, self.lr_size,
            self.dim, lr_patch=self.lr_patch, channels=self.channels, pyramid=self.pyramid,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {field.name for field in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown model config keys: {unknown}")
        return cls(**data)
