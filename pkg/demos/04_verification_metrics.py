"""
Verification and content metrics
================================

Scores speaker-verification trials with cosine similarity, locates the
equal error rate, restricts non-targets to the nearest K speakers, and
counts word errors.
"""

import numpy as np

from voxanon import (
    SpeakerEmbedding,
    Trial,
    compute_eer,
    nearest_nontarget_subset,
    score_trials,
    wer,
)

rng = np.random.default_rng(3)

# Two enrolled speakers and a few test utterances around them.
enroll = {
    "spk1": SpeakerEmbedding("spk1", rng.standard_normal(32)),
    "spk2": SpeakerEmbedding("spk2", rng.standard_normal(32)),
}
test = {}
for speaker, base in enroll.items():
    for j in range(3):
        test[f"{speaker}_u{j}"] = SpeakerEmbedding(
            f"{speaker}_u{j}", base.vector + 0.2 * rng.standard_normal(32)
        )

trials = [
    Trial(enrolled, utt, "target" if utt.startswith(enrolled) else "nontarget")
    for enrolled in enroll
    for utt in test
]
scored = score_trials(enroll, test, trials)
for trial, score in scored[:4]:
    print(f"{trial.enroll_id} vs {trial.test_id}: {score:+.3f} ({trial.label})")

tar = [s for t, s in scored if t.label == "target"]
non = [s for t, s in scored if t.label == "nontarget"]
result = compute_eer(tar, non)
print(f"\nEER {result.eer:.2%} at threshold {result.threshold:.3f} "
      f"({result.n_target} target / {result.n_nontarget} nontarget trials)")

# Keeping only the K most similar non-target speakers makes the protocol
# harder: distant speakers cannot deflate the error rate.
candidates = [SpeakerEmbedding(f"non{i}", rng.standard_normal(32)) for i in range(8)]
for k in (2, 8):
    kept = nearest_nontarget_subset(enroll["spk1"], candidates, k)
    print(f"nearest K={k}: {kept}")

# Word error rate from a minimal edit alignment.
reference = "the cat sat on the mat".split()
hypothesis = "the cat sat on a mat mat".split()
counts = wer(reference, hypothesis)
print(
    f"\nWER {counts.rate:.2%}: {counts.substitutions} sub, "
    f"{counts.deletions} del, {counts.insertions} ins over {counts.n_ref_words} words"
)
