"""Uplink precoders: one-bit sign alignment and truncated channel inversion."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class PrecoderKind(str, Enum):
    SIGN_ALIGN = "sign_align"
    TRUNCATED_INVERSION = "truncated_inversion"


@dataclass(frozen=True)
class PrecoderSpec:
    kind: PrecoderKind = PrecoderKind.SIGN_ALIGN
    power_limit: float = 1.0
    truncation_threshold: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "kind", PrecoderKind(self.kind))
        if not self.power_limit > 0:
            raise ValueError("power_limit must be positive")
        if self.truncation_threshold < 0:
            raise ValueError("truncation_threshold must be nonnegative")


def _sign(h: float) -> float:
    return 1.0 if h >= 0 else -1.0


def sign_align(h: float, signs) -> np.ndarray:
    """Transmit ``sign(h) * signs`` so the effective channel is ``|h|``.

    Only the sign of ``h`` is used (one-bit CSIT).
    """
    return _sign(h) * np.asarray(signs, dtype=float)


def truncated_inversion(h: float, signs, spec: PrecoderSpec) -> np.ndarray:
    """Invert the channel to a common received amplitude sqrt(P)*threshold.

    Devices with ``|h|`` below the threshold stay silent. The power
    constraint binds exactly at ``|h| == threshold``.
    """
    signs = np.asarray(signs, dtype=float)
    thr = spec.truncation_threshold
    if thr == 0 or abs(h) < thr:
        return np.zeros_like(signs)
    return (np.sqrt(spec.power_limit) * thr / h) * signs


def precode(h: float, signs, spec: PrecoderSpec) -> np.ndarray:
    if spec.kind is PrecoderKind.SIGN_ALIGN:
        return sign_align(h, signs)
    return truncated_inversion(h, signs, spec)


def effective_gain(h: float, spec: PrecoderSpec) -> float:
    """Received amplitude per unit sign after precoding, known at the server."""
    if spec.kind is PrecoderKind.SIGN_ALIGN:
        return abs(h)
    thr = spec.truncation_threshold
    if thr == 0 or abs(h) < thr:
        return 0.0
    return float(np.sqrt(spec.power_limit) * thr)


def check_power(block, power_limit: float) -> bool:
    """Per-symbol surrogate of the average power constraint."""
    block = np.asarray(block, dtype=float)
    if block.size == 0:
        return True
    return bool(np.max(block**2) <= power_limit + 1e-12)
