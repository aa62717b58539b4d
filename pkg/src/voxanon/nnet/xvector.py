"""Speaker embedding TDNN with utterance-level statistics pooling.

Five frame-level layers with time splicing, a pooling layer that reduces
the variable-length sequence to utterance statistics, and two segment
layers. The speaker embedding is the affine output of the first segment
layer, taken before its nonlinearity.

Frame splicing offsets per layer: [-2..+2], {-2,0,+2}, {-3,0,+3}, {t},
{t}; the third layer therefore sees a 15-frame receptive field, which sets
the minimum input length. No frame padding is applied, so the frame-level
sequence shrinks by 14 frames before pooling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embeddings import SpeakerEmbedding
from ..features import FeatureMatrix
from .weights import ModelWeights, register_config

INPUT_DIM = 24
EMBED_DIM = 512
SPLICE_OFFSETS = ((-2, -1, 0, 1, 2), (-2, 0, 2), (-3, 0, 3), (0,), (0,))
FRAME_LAYER_SIZES = (512, 512, 512, 512, 1500)
MIN_FRAMES = 15  # total splice context of the frame-level stack


@dataclass(frozen=True)
class XVectorConfig:
    """Shape parameters of the embedding network.

    The frame-level structure is fixed; only the training-softmax width
    and the pooling statistic are configurable. ``pool_with_std`` selects
    standard deviation for the second pooling half (the usual convention);
    set it False to pool raw variance instead.
    """

    n_train_speakers: int = 200
    pool_with_std: bool = True

    component = "xvector"

    def __post_init__(self):
        if self.n_train_speakers < 1:
            raise ValueError("n_train_speakers must be positive")

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        in_dim = INPUT_DIM
        for i, (offsets, out_dim) in enumerate(
            zip(SPLICE_OFFSETS, FRAME_LAYER_SIZES), start=1
        ):
            shapes[f"frame{i}.w"] = (out_dim, in_dim * len(offsets))
            shapes[f"frame{i}.b"] = (out_dim,)
            in_dim = out_dim
        pooled = 2 * FRAME_LAYER_SIZES[-1]
        shapes["segment6.w"] = (EMBED_DIM, pooled)
        shapes["segment6.b"] = (EMBED_DIM,)
        shapes["segment7.w"] = (EMBED_DIM, EMBED_DIM)
        shapes["segment7.b"] = (EMBED_DIM,)
        shapes["softmax.w"] = (self.n_train_speakers, EMBED_DIM)
        shapes["softmax.b"] = (self.n_train_speakers,)
        return shapes


register_config("xvector", XVectorConfig)


def _splice(x: np.ndarray, offsets: tuple[int, ...]) -> np.ndarray:
    # Valid-region splicing: row t of the output concatenates rows
    # t+off-min(offsets) of x for each offset; the sequence shrinks by
    # max(offsets)-min(offsets) rows.
    lo, hi = min(offsets), max(offsets)
    n = x.shape[0] - (hi - lo)
    return np.hstack([x[off - lo : off - lo + n] for off in offsets])


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def xvector_embedding(frames: FeatureMatrix, weights: ModelWeights) -> np.ndarray:
    """Raw embedding vector (the affine output of the first segment layer)."""
    if weights.component != "xvector":
        raise ValueError(f"expected xvector weights, got {weights.component!r}")
    if frames.dim != INPUT_DIM:
        raise ValueError(f"expected {INPUT_DIM}-dim input frames, got {frames.dim}")
    if frames.n_frames < MIN_FRAMES:
        raise ValueError(
            f"need at least {MIN_FRAMES} frames, got {frames.n_frames}"
        )
    h = frames.frames
    for i, offsets in enumerate(SPLICE_OFFSETS, start=1):
        spliced = _splice(h, offsets)
        h = _relu(spliced @ weights[f"frame{i}.w"].T + weights[f"frame{i}.b"])
    # Utterance statistics over the valid frames. The mean is computed as
    # deviations from the first frame so constant sequences pool to the
    # same bits at any length.
    mean = h[0] + (h - h[0]).mean(axis=0)
    second = np.square(h - mean).mean(axis=0)
    if weights.config.pool_with_std:
        second = np.sqrt(second)
    pooled = np.concatenate([mean, second])
    return pooled @ weights["segment6.w"].T + weights["segment6.b"]


def xvector_forward(
    frames: FeatureMatrix, weights: ModelWeights, embedding_id: str = "xvector"
) -> SpeakerEmbedding:
    """Extract a speaker embedding from a 24-dim filterbank stream.

    The output dimension is 512 regardless of input length. Note that a
    degenerate all-zero embedding (possible only with pathological
    weights) cannot be wrapped as a ``SpeakerEmbedding``; use
    :func:`xvector_embedding` to inspect the raw vector in that case.
    """
    return SpeakerEmbedding(embedding_id, xvector_embedding(frames, weights))
