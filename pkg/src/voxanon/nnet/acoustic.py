"""Autoregressive acoustic model: aligned features to mel spectrogram.

Two tanh feedforward layers, a bidirectional LSTM, then a unidirectional
LSTM whose input at each step concatenates the recurrent features with the
mel frame generated (or, in teacher mode, observed) at the previous step.
A linear layer produces the 80-dim mel frame. Step 0 always feeds a zero
mel vector, so teacher and free mode agree on the first frame.

The recurrence is inherently sequential over frames; parallelize across
utterances, never within one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import FeatureMatrix
from .weights import ModelWeights, register_config

MEL_DIM = 80


@dataclass(frozen=True)
class AcousticConfig:
    """Layer sizes; ``content_dim`` is the width of the content block in the
    aligned input (posterior tap width), so the expected input dimension is
    ``content_dim + 2 + xvec_dim``."""

    content_dim: int = 1944
    xvec_dim: int = 512
    ff_size: int = 512
    blstm_size: int = 256  # per direction
    ar_size: int = 512

    component = "acoustic"

    def __post_init__(self):
        for name in ("content_dim", "xvec_dim", "ff_size", "blstm_size", "ar_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def input_dim(self) -> int:
        return self.content_dim + 2 + self.xvec_dim

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        blstm_in = self.ff_size
        ar_in = 2 * self.blstm_size + MEL_DIM
        return {
            "ff1.w": (self.ff_size, self.input_dim),
            "ff1.b": (self.ff_size,),
            "ff2.w": (self.ff_size, self.ff_size),
            "ff2.b": (self.ff_size,),
            "blstm.fw.wx": (4 * self.blstm_size, blstm_in),
            "blstm.fw.wh": (4 * self.blstm_size, self.blstm_size),
            "blstm.fw.b": (4 * self.blstm_size,),
            "blstm.bw.wx": (4 * self.blstm_size, blstm_in),
            "blstm.bw.wh": (4 * self.blstm_size, self.blstm_size),
            "blstm.bw.b": (4 * self.blstm_size,),
            "ar.wx": (4 * self.ar_size, ar_in),
            "ar.wh": (4 * self.ar_size, self.ar_size),
            "ar.b": (4 * self.ar_size,),
            "out.w": (MEL_DIM, self.ar_size),
            "out.b": (MEL_DIM,),
        }


register_config("acoustic", AcousticConfig)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _lstm_step(x, h, c, wx, wh, b, size):
    # Gate order in the stacked matrices: input, forget, cell, output.
    z = wx @ x + wh @ h + b
    i = _sigmoid(z[:size])
    f = _sigmoid(z[size : 2 * size])
    g = np.tanh(z[2 * size : 3 * size])
    o = _sigmoid(z[3 * size :])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def _lstm_sequence(xs, wx, wh, b, size, reverse=False):
    steps = range(xs.shape[0] - 1, -1, -1) if reverse else range(xs.shape[0])
    pre = xs @ wx.T  # input projections for all steps at once
    h = np.zeros(size)
    c = np.zeros(size)
    out = np.zeros((xs.shape[0], size))
    for t in steps:
        z = pre[t] + wh @ h + b
        i = _sigmoid(z[:size])
        f = _sigmoid(z[size : 2 * size])
        g = np.tanh(z[2 * size : 3 * size])
        o = _sigmoid(z[3 * size :])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out


def acoustic_forward(
    aligned: FeatureMatrix,
    weights: ModelWeights,
    mode: str = "free",
    teacher_mel: FeatureMatrix | None = None,
) -> FeatureMatrix:
    """Generate a mel spectrogram from aligned synthesis-rate features.

    ``mode`` is ``"free"`` (feed back the model's own previous frame) or
    ``"teacher"`` (feed the supplied natural mel frames, shifted by one
    step). Output is (frames x 80) at the input hop.
    """
    if weights.component != "acoustic":
        raise ValueError(f"expected acoustic weights, got {weights.component!r}")
    config: AcousticConfig = weights.config
    if aligned.kind != "aligned":
        raise ValueError(f"expected aligned features, got kind {aligned.kind!r}")
    if aligned.dim != config.input_dim:
        raise ValueError(
            f"aligned width {aligned.dim} does not match model input {config.input_dim}"
        )
    if mode not in ("free", "teacher"):
        raise ValueError(f"mode must be 'free' or 'teacher', got {mode!r}")
    if mode == "teacher":
        if teacher_mel is None:
            raise ValueError("teacher mode requires teacher_mel")
        if teacher_mel.n_frames != aligned.n_frames:
            raise ValueError(
                f"teacher_mel has {teacher_mel.n_frames} frames, aligned input has "
                f"{aligned.n_frames}"
            )
        if teacher_mel.dim != MEL_DIM:
            raise ValueError(f"teacher_mel must be {MEL_DIM}-dim")

    h = np.tanh(aligned.frames @ weights["ff1.w"].T + weights["ff1.b"])
    h = np.tanh(h @ weights["ff2.w"].T + weights["ff2.b"])
    fw = _lstm_sequence(
        h, weights["blstm.fw.wx"], weights["blstm.fw.wh"], weights["blstm.fw.b"],
        config.blstm_size,
    )
    bw = _lstm_sequence(
        h, weights["blstm.bw.wx"], weights["blstm.bw.wh"], weights["blstm.bw.b"],
        config.blstm_size, reverse=True,
    )
    recurrent = np.hstack([fw, bw])

    n = aligned.n_frames
    out = np.zeros((n, MEL_DIM))
    h_ar = np.zeros(config.ar_size)
    c_ar = np.zeros(config.ar_size)
    prev = np.zeros(MEL_DIM)
    for t in range(n):
        x = np.concatenate([recurrent[t], prev])
        h_ar, c_ar = _lstm_step(
            x, h_ar, c_ar, weights["ar.wx"], weights["ar.wh"], weights["ar.b"],
            config.ar_size,
        )
        out[t] = weights["out.w"] @ h_ar + weights["out.b"]
        prev = teacher_mel.frames[t] if mode == "teacher" else out[t]
    return FeatureMatrix(out, hop=aligned.hop, kind="melspec80")
