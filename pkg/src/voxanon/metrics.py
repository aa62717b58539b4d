"""Speaker-verification trial scoring, EER, and word error rate.

Scoring uses cosine similarity between enrollment and test embeddings
(higher means more target-like; the accept rule is score >= threshold).
The equal error rate is located by linearly interpolating the false
rejection and false acceptance rates between adjacent operating points of
the threshold sweep, so the value is invariant to any strictly increasing
transform of the scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .embeddings import SpeakerEmbedding, cosine_similarity
from .errors import DataError

TRIAL_LABELS = ("target", "nontarget")


@dataclass(frozen=True)
class Trial:
    """One verification trial: does ``test_id``'s speech come from ``enroll_id``?"""

    enroll_id: str
    test_id: str
    label: str

    def __post_init__(self):
        if self.label not in TRIAL_LABELS:
            raise ValueError(
                f"trial label must be one of {TRIAL_LABELS}, got {self.label!r}"
            )


@dataclass(frozen=True)
class EerResult:
    """Equal error rate with the threshold at the crossing.

    At the reported threshold the stepwise false rejection and false
    acceptance rates bracket ``eer`` (they equal it when the crossing
    lands exactly on an operating point).
    """

    eer: float
    threshold: float
    n_target: int
    n_nontarget: int


@dataclass(frozen=True)
class WerResult:
    """Edit-distance word error counts against a reference."""

    substitutions: int
    deletions: int
    insertions: int
    n_ref_words: int

    @property
    def n_errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> float:
        # May exceed 1 when the hypothesis is much longer than the reference.
        return self.n_errors / self.n_ref_words


def score_trials(
    enroll: Mapping[str, SpeakerEmbedding],
    test: Mapping[str, SpeakerEmbedding],
    trials: Sequence[Trial],
) -> list[tuple[Trial, float]]:
    """Cosine-score a trial list; output order matches input order."""
    scored = []
    for trial in trials:
        if trial.enroll_id not in enroll:
            raise DataError(f"trial references unknown enrollment id {trial.enroll_id!r}")
        if trial.test_id not in test:
            raise DataError(f"trial references unknown test id {trial.test_id!r}")
        scored.append(
            (trial, cosine_similarity(enroll[trial.enroll_id], test[trial.test_id]))
        )
    return scored


def compute_eer(
    target_scores: Sequence[float], nontarget_scores: Sequence[float]
) -> EerResult:
    """Equal error rate of a score distribution pair.

    With the accept rule score >= threshold, the false rejection rate
    FRR(t) = P(target < t) is non-decreasing in t and the false acceptance
    rate FAR(t) = P(nontarget >= t) is non-increasing, so FRR - FAR crosses
    zero exactly once. Operating points are evaluated at every distinct
    score (plus sentinels past both ends) and the crossing is located by
    linear interpolation between the two bracketing points.
    """
    tar = np.asarray(target_scores, dtype=np.float64)
    non = np.asarray(nontarget_scores, dtype=np.float64)
    if tar.size == 0:
        raise ValueError("target score list is empty")
    if non.size == 0:
        raise ValueError("nontarget score list is empty")
    if not (np.all(np.isfinite(tar)) and np.all(np.isfinite(non))):
        raise ValueError("scores must be finite")

    tar_sorted = np.sort(tar)
    non_sorted = np.sort(non)
    values = np.unique(np.concatenate([tar_sorted, non_sorted]))
    thresholds = np.concatenate([[values[0] - 1.0], values, [values[-1] + 1.0]])
    frr = np.searchsorted(tar_sorted, thresholds, side="left") / tar.size
    far = (non.size - np.searchsorted(non_sorted, thresholds, side="left")) / non.size

    diff = frr - far
    i = int(np.argmax(diff >= 0.0))  # first crossing; diff[0] is always -1
    if diff[i] == 0.0:
        return EerResult(float(frr[i]), float(thresholds[i]), tar.size, non.size)
    t = (far[i - 1] - frr[i - 1]) / ((frr[i] - frr[i - 1]) + (far[i - 1] - far[i]))
    eer = frr[i - 1] + t * (frr[i] - frr[i - 1])
    threshold = thresholds[i - 1] + t * (thresholds[i] - thresholds[i - 1])
    return EerResult(float(eer), float(threshold), tar.size, non.size)


def nearest_nontarget_subset(
    target_spk: SpeakerEmbedding,
    nontargets: Sequence[SpeakerEmbedding],
    k: int,
) -> list[str]:
    """Ids of the ``k`` non-target speakers most similar to the target.

    Restricting trials to the nearest non-targets keeps far-away speakers
    from deflating the error rate. Ties break by ascending id.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(nontargets):
        raise ValueError(f"k {k} exceeds available non-targets ({len(nontargets)})")
    ranked = sorted(
        ((-cosine_similarity(target_spk, spk), spk.id) for spk in nontargets),
    )
    return [spk_id for _, spk_id in ranked[:k]]


def wer(ref: Sequence[str], hyp: Sequence[str]) -> WerResult:
    """Word error counts from a minimal edit alignment with unit costs.

    Alignment ties are resolved preferring substitution over deletion over
    insertion: among all minimal-cost alignments the one with the most
    aligned (match or substitution) steps is chosen, then deletions beat
    insertions in the residual order. Because every alignment of an
    (n, m) pair satisfies D - I = n - m, this pins the count split
    uniquely, so it is deterministic and swaps D with I exactly when the
    roles of the two sequences swap.
    """
    ref = list(ref)
    hyp = list(hyp)
    if not ref:
        raise ValueError("reference word sequence is empty")
    n, m = len(ref), len(hyp)
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    aligned = np.zeros((n + 1, m + 1), dtype=np.int64)  # max diagonal steps
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            dele = cost[i - 1, j] + 1
            ins = cost[i, j - 1] + 1
            best = min(sub, dele, ins)
            steps = -1
            if sub == best:
                steps = aligned[i - 1, j - 1] + 1
            if dele == best:
                steps = max(steps, aligned[i - 1, j])
            if ins == best:
                steps = max(steps, aligned[i, j - 1])
            cost[i, j] = best
            aligned[i, j] = steps

    subs = dels = inss = 0
    i, j = n, m
    while i > 0 or j > 0:
        if (
            i > 0 and j > 0
            and cost[i, j] == cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            and aligned[i, j] == aligned[i - 1, j - 1] + 1
        ):
            subs += ref[i - 1] != hyp[j - 1]
            i -= 1
            j -= 1
        elif (
            i > 0
            and cost[i, j] == cost[i - 1, j] + 1
            and aligned[i, j] == aligned[i - 1, j]
        ):
            dels += 1
            i -= 1
        else:
            inss += 1
            j -= 1
    return WerResult(int(subs), int(dels), int(inss), n)


def read_trials(path) -> list[Trial]:
    """Parse a trial list file: one ``enroll_id test_id {tar|non}`` per line."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read trial file {path}: {exc}") from exc
    trials = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3 or parts[2] not in ("tar", "non"):
            raise DataError(
                f"{path}, line {lineno}: expected 'enroll_id test_id tar|non', got {line!r}"
            )
        label = "target" if parts[2] == "tar" else "nontarget"
        trials.append(Trial(parts[0], parts[1], label))
    if not trials:
        raise DataError(f"{path}: trial file contains no trials")
    return trials


def write_trials(path, trials: Sequence[Trial]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for trial in trials:
            tag = "tar" if trial.label == "target" else "non"
            fh.write(f"{trial.enroll_id} {trial.test_id} {tag}\n")
