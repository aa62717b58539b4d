"""Independent reference computations used to check the library.

Everything here deliberately recomputes results by a different route than
the implementation under test: direct counting instead of sorted sweeps,
plain loops instead of vectorized kernels, textbook formulas instead of
shared helpers.
"""

import math

import numpy as np


def eer_midpoint_sweep(target_scores, nontarget_scores) -> float:
    """EER by brute-force counting at every score-midpoint threshold.

    At each candidate threshold the false rejection and false acceptance
    rates are counted directly; the crossing of the two piecewise-linear
    rate curves is located between the bracketing thresholds.
    """
    tar = np.asarray(target_scores, dtype=np.float64)
    non = np.asarray(nontarget_scores, dtype=np.float64)
    pooled = np.unique(np.concatenate([tar, non]))
    mids = (pooled[:-1] + pooled[1:]) / 2.0 if pooled.size > 1 else np.empty(0)
    thresholds = np.concatenate([[pooled[0] - 1.0], mids, [pooled[-1] + 1.0]])
    frr = (tar[None, :] < thresholds[:, None]).mean(axis=1)
    far = (non[None, :] >= thresholds[:, None]).mean(axis=1)
    diff = frr - far
    i = int(np.argmax(diff >= 0.0))
    if diff[i] == 0.0:
        return float(frr[i])
    t = (far[i - 1] - frr[i - 1]) / ((frr[i] - frr[i - 1]) + (far[i - 1] - far[i]))
    return float(frr[i - 1] + t * (frr[i] - frr[i - 1]))


def edit_distance(ref, hyp) -> int:
    """Full-table edit distance with unit costs, no traceback."""
    n, m = len(ref), len(hyp)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        table[i][0] = i
    for j in range(m + 1):
        table[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            table[i][j] = min(
                table[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
            )
    return table[n][m]


def cosine_fsum(u, v) -> float:
    """Cosine similarity using compensated summation, no numpy."""
    dot = math.fsum(x * y for x, y in zip(u, v))
    nu = math.sqrt(math.fsum(x * x for x in u))
    nv = math.sqrt(math.fsum(y * y for y in v))
    return dot / (nu * nv)


def fft_peak_hz(frame, sample_rate, n_fft=16384) -> float:
    """Dominant frequency of a frame from a long zero-padded FFT."""
    frame = np.asarray(frame, dtype=np.float64)
    window = np.hanning(frame.size)
    spectrum = np.abs(np.fft.rfft(frame * window, n=n_fft))
    return float(np.argmax(spectrum) * sample_rate / n_fft)


def nccf_peak(frame, lag_min, lag_max) -> float:
    """Best normalized cross-correlation value of one frame, plain loops."""
    x = np.asarray(frame, dtype=np.float64)
    x = x - x.mean()
    best = 0.0
    for tau in range(lag_min, lag_max + 1):
        head = x[: x.size - tau]
        tail = x[tau:]
        denom = math.sqrt(float(head @ head) * float(tail @ tail))
        if denom == 0.0:
            continue
        best = max(best, float(head @ tail) / denom)
    return best


def mel_center_frequencies(n_mels, low_hz, high_hz) -> np.ndarray:
    """Filter center frequencies from the HTK mel formula."""
    def to_mel(hz):
        return 2595.0 * math.log10(1.0 + hz / 700.0)

    def to_hz(mel):
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)

    points = np.linspace(to_mel(low_hz), to_mel(high_hz), n_mels + 2)
    return np.array([to_hz(m) for m in points[1:-1]])
