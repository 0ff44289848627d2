"""The lightweight adapter block and per-stage placement.

The block runs three parallel convolutions (3x3, 5x5, 7x7) over the same
input, averages them, aggregates with a 1x1 convolution, applies SiLU,
passes the result through an augmentation slot, adds the skip connection
and projects with a final 1x1 convolution. Augmentation choices per
backbone stage are described by :class:`PlacementConfig`; stage seeds are
derived independently so evaluation order never matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .crossmodal import AttentionParams, TokenMatrix, crossmodal_forward
from .errors import ShapeMismatchError
from .rng import SplitMix64, mix_seed
from .style import style_diversify
from .synth import gen_text_tokens
from .tensor import FeatureMap, conv2d, silu, _frozen

STAGE_KINDS = ("none", "plain", "style", "crossmodal")

# substream tags for per-stage seed derivation
_TAG_WEIGHTS = 1
_TAG_STYLE = 2
_TAG_TEXT = 3
_TAG_ATTENTION = 4


@dataclass(frozen=True)
class AdapterWeights:
    """Convolution weights of one adapter block: 3/5/7 branches, 1x1 agg and proj."""

    k3: np.ndarray
    k5: np.ndarray
    k7: np.ndarray
    agg: np.ndarray
    proj: np.ndarray

    def __post_init__(self):
        kernels = {"k3": (self.k3, 3), "k5": (self.k5, 5), "k7": (self.k7, 7),
                   "agg": (self.agg, 1), "proj": (self.proj, 1)}
        c = None
        for name, (w, k) in kernels.items():
            arr = np.asarray(w, dtype=np.float64)
            if arr.ndim != 4 or arr.shape[2] != k or arr.shape[3] != k:
                raise ShapeMismatchError(f"{name} must be [C, C, {k}, {k}], got {arr.shape}")
            if arr.shape[0] != arr.shape[1]:
                raise ShapeMismatchError(f"{name} must preserve the channel count")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} values must be finite")
            if c is None:
                c = arr.shape[0]
            elif arr.shape[0] != c:
                raise ShapeMismatchError("all adapter kernels must share one channel count")
            object.__setattr__(self, name, _frozen(arr))

    @property
    def channels(self) -> int:
        return self.k3.shape[0]

    @classmethod
    def zero_identity(cls, channels: int) -> "AdapterWeights":
        """All-zero branches with an identity projection: the block becomes a no-op."""
        eye = np.eye(channels)[:, :, None, None]
        return cls(
            k3=np.zeros((channels, channels, 3, 3)),
            k5=np.zeros((channels, channels, 5, 5)),
            k7=np.zeros((channels, channels, 7, 7)),
            agg=np.zeros((channels, channels, 1, 1)),
            proj=eye,
        )

    @classmethod
    def seeded(cls, channels: int, seed: int) -> "AdapterWeights":
        """Gaussian weights scaled by 1/(C * k^2) per branch, identity-plus-noise projection."""
        rng = SplitMix64(seed)

        def draw(k):
            scale = 1.0 / (channels * k * k)
            flat = rng.normal_array(channels * channels * k * k, scale=scale)
            return flat.reshape(channels, channels, k, k)

        eye = np.eye(channels)[:, :, None, None]
        return cls(k3=draw(3), k5=draw(5), k7=draw(7), agg=draw(1), proj=eye + 0.1 * draw(1))


def adapter_forward(
    x: FeatureMap,
    w: AdapterWeights,
    augment: Callable[[FeatureMap], FeatureMap] | None = None,
    post_residual: bool = False,
) -> FeatureMap:
    """One adapter block pass; ``augment`` fills the augmentation slot.

    Default wiring is proj(x + augment(silu(agg(avg(conv3, conv5, conv7))))).
    ``post_residual=True`` moves the skip after the projection instead
    (proj(augment(...)) + x), kept selectable for ablation.
    """
    if w.channels != x.channels:
        raise ShapeMismatchError(f"weights expect {w.channels} channels, map has {x.channels}")
    branches = (
        conv2d(x, w.k3, 1).data + conv2d(x, w.k5, 2).data + conv2d(x, w.k7, 3).data
    ) / 3.0
    mixed = conv2d(FeatureMap(branches), w.agg, 0)
    activated = silu(mixed)
    augmented = augment(activated) if augment is not None else activated
    if augmented.shape != x.shape:
        raise ShapeMismatchError(
            f"augmentation changed the shape: {augmented.shape} vs {x.shape}"
        )
    if post_residual:
        return FeatureMap(conv2d(augmented, w.proj, 0).data + x.data)
    return conv2d(FeatureMap(x.data + augmented.data), w.proj, 0)


@dataclass(frozen=True)
class PlacementConfig:
    """Which augmentation runs at which backbone stage, plus its knobs.

    Stage indices are 1-based. The default places the style adapter at
    stage 1 and the cross-modal adapter at stage 3, the strongest
    placement; stage 2 stays untouched. ``attention``/``text_tokens`` may
    be supplied by the caller; otherwise both are synthesized from the
    per-stage seed.
    """

    stage_assignments: dict = field(default_factory=lambda: {1: "style", 3: "crossmodal"})
    alpha: tuple | None = None
    attention: AttentionParams | None = None
    text_tokens: TokenMatrix | None = None
    d_k: int = 64
    seed: int = 0
    num_stages: int = 3

    def __post_init__(self):
        if self.num_stages < 1:
            raise ValueError("num_stages must be >= 1")
        object.__setattr__(self, "stage_assignments", dict(self.stage_assignments))
        for idx, kind in self.stage_assignments.items():
            if not 1 <= idx <= self.num_stages:
                raise ValueError(f"stage index {idx} outside 1..{self.num_stages}")
            if kind not in STAGE_KINDS:
                raise ValueError(f"unknown stage kind {kind!r}; expected one of {STAGE_KINDS}")
        if self.alpha is not None:
            avec = tuple(float(a) for a in self.alpha)
            if any(a <= 0 or not math.isfinite(a) for a in avec):
                raise ValueError("alpha entries must be finite and > 0")
            object.__setattr__(self, "alpha", avec)
        if self.d_k < 1:
            raise ValueError("d_k must be >= 1")


def stage_seed(cfg: PlacementConfig, index: int) -> int:
    """Independent 64-bit seed for one stage, order-free by construction."""
    return mix_seed(cfg.seed, index)


def _stage_alpha(cfg: PlacementConfig, channels: int) -> np.ndarray:
    if cfg.alpha is None:
        return np.ones(channels)
    avec = np.asarray(cfg.alpha, dtype=np.float64)
    if avec.size == 1:
        return np.full(channels, avec[0])
    if avec.shape != (channels,):
        raise ShapeMismatchError(
            f"alpha has length {avec.size}, stage map has {channels} channels"
        )
    return avec


def apply_stage(x: FeatureMap, cfg: PlacementConfig, index: int) -> FeatureMap:
    """Run stage ``index``'s configured adapter on one feature map.

    A pure function of (x, cfg, index): stages never see each other's
    state, so any evaluation order gives identical results.
    """
    if not 1 <= index <= cfg.num_stages:
        raise ValueError(f"stage index {index} outside 1..{cfg.num_stages}")
    kind = cfg.stage_assignments.get(index, "none")
    if kind == "none":
        return x
    sseed = stage_seed(cfg, index)
    weights = AdapterWeights.seeded(x.channels, mix_seed(sseed, _TAG_WEIGHTS))
    if kind == "plain":
        augment = None
    elif kind == "style":
        alpha = _stage_alpha(cfg, x.channels)
        style_seed = mix_seed(sseed, _TAG_STYLE)
        augment = lambda fm: style_diversify(fm, alpha, style_seed)
    else:  # crossmodal
        params = cfg.attention
        text = cfg.text_tokens
        if text is None:
            text_dim = params.text_dim if params is not None else 16
            text = gen_text_tokens(8, text_dim, mix_seed(sseed, _TAG_TEXT))
        if params is None:
            params = AttentionParams.seeded(
                x.channels, text.dim, cfg.d_k, mix_seed(sseed, _TAG_ATTENTION)
            )
        augment = lambda fm: crossmodal_forward(fm, text, params)
    return adapter_forward(x, weights, augment)


def run_stack(features: list[FeatureMap], cfg: PlacementConfig) -> list[FeatureMap]:
    """Apply each stage's configured adapter to its feature map independently."""
    if len(features) != cfg.num_stages:
        raise ShapeMismatchError(
            f"expected {cfg.num_stages} stage maps, got {len(features)}"
        )
    return [apply_stage(fm, cfg, i + 1) for i, fm in enumerate(features)]
