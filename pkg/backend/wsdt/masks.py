"""
Attention visibility masks for the two decoders.

Rows are queries, columns are keys; True means the key is visible.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ContractError, DimensionError
from .tokenizer import Segment

_ORDER = {Segment.LR: 0, Segment.LF: 1, Segment.HF: 2}


@dataclass(frozen=True, eq=False)
class AttentionMask:
    """
    Boolean query×key visibility matrix plus the segment layout it was built from.

    The matrix is stored read-only; masks are safe to share between models.
    """

    visible: np.ndarray
    segments: tuple

    def __post_init__(self):
        visible = np.array(self.visible, dtype=bool)
        n = len(self.segments)
        if visible.shape != (n, n):
            raise DimensionError(f"mask shape {visible.shape} does not match {n} segments")
        if n and not visible.any(axis=1).all():
            raise ConfigurationError("attention mask has a query row without a visible key")
        if n and not np.diagonal(visible).all():
            raise ContractError("attention mask must keep every token visible to itself")
        visible.flags.writeable = False
        object.__setattr__(self, "visible", visible)

    @property
    def size(self):
        return len(self.segments)

    def allows(self, query, key):
        return bool(self.visible[query, key])


def _as_segments(layout):
    segments = []
    for item in layout:
        try:
            segments.append(item if isinstance(item, Segment) else Segment(item))
        except ValueError as exc:
            raise ContractError(f"unknown segment {item!r}") from exc
    return tuple(segments)


def _check_order(segments, allowed):
    for segment in segments:
        if segment not in allowed:
            raise ContractError(f"unexpected {segment.value} segment in layout for this decoder")
    ranks = [_ORDER[segment] for segment in segments]
    if any(later < earlier for earlier, later in zip(ranks, ranks[1:])):
        raise ContractError("segments must appear in LR, LF, HF order")


def _labels(segments):
    return np.array([_ORDER[segment] for segment in segments], dtype=np.int64)


def build_m_low(layout):
    """
    Mask for the LF elementary decoder over an [LR | LF] layout.

    LR queries see only LR keys, so the condition stays clean; LF queries see
    every key.
    """
    segments = _as_segments(layout)
    _check_order(segments, (Segment.LR, Segment.LF))
    labels = _labels(segments)
    query_lr = (labels == _ORDER[Segment.LR])[:, None]
    key_lr = (labels == _ORDER[Segment.LR])[None, :]
    visible = ~query_lr | key_lr
    return AttentionMask(visible, segments)


def build_m_high(layout):
    """
    Mask for the HF detail decoder over an [LR | LF | HF] layout.

    LR queries see only LR keys, LF queries cannot see LR keys and HF queries
    cannot see LF keys. Everything else is visible.
    """
    segments = _as_segments(layout)
    _check_order(segments, (Segment.LR, Segment.LF, Segment.HF))
    labels = _labels(segments)
    query, key = labels[:, None], labels[None, :]
    lr, lf, hf = _ORDER[Segment.LR], _ORDER[Segment.LF], _ORDER[Segment.HF]
    visible = np.ones((len(segments), len(segments)), dtype=bool)
    visible &= ~((query == lr) & (key != lr))
    visible &= ~((query == lf) & (key == lr))
    visible &= ~((query == hf) & (key == lf))
    return AttentionMask(visible, segments)


def build_full(layout):
    """Unrestricted attention (mask ablation)."""
    segments = _as_segments(layout)
    return AttentionMask(np.ones((len(segments), len(segments)), dtype=bool), segments)


def isolate_hf_levels(mask, levels):
    """
    Block HF attention between different wavelet levels.

    Used for the interrelation ablation only.

    Args:
        mask (AttentionMask): mask to restrict
        levels (array-like): wavelet level of every token

    Returns:
        AttentionMask: copy of ``mask`` where an HF query at level j no longer
        sees HF keys of other levels
    """
    levels = np.asarray(levels)
    if levels.shape != (mask.size,):
        raise DimensionError(f"got {levels.shape[0]} token levels for a mask over {mask.size} tokens")
    is_hf = _labels(mask.segments) == _ORDER[Segment.HF]
    cross = is_hf[:, None] & is_hf[None, :] & (levels[:, None] != levels[None, :])
    return AttentionMask(mask.visible & ~cross, mask.segments)
