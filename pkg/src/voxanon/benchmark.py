"""Anonymization-strength benchmark on embedding-level speaker data.

The benchmark mirrors the verification protocol used to evaluate
anonymization: each target speaker enrolls with their speaker-level
embedding, target trials score the speaker's own test utterances, and
non-target trials score other speakers' utterances (optionally restricted
to the K most similar non-target speakers). Anonymization replaces every
target test utterance's embedding with a pseudo speaker composed from the
pool; non-target speech stays untouched. A working anonymizer therefore
drives the equal error rate up from its baseline.

Everything here is a pure function of (inputs, seeds): repetition seeds
derive from the strategy seed, and per-speaker seeds derive from the
repetition seed, so adding a speaker never perturbs the draws of others.

The module also provides the synthetic data generators used by the
simulation command and the test suites.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .anonymize import AnonymizationSpec, apply_spec
from .embeddings import (
    EmbeddingPool,
    SpeakerEmbedding,
    cosine_similarity,
    dissimilarity,
    mean_embedding,
)
from .metrics import EerResult, compute_eer, nearest_nontarget_subset
from .seeding import derive_seed


@dataclass(frozen=True)
class EvalSpeaker:
    """One speaker in the benchmark: a speaker-level enrollment embedding
    plus per-utterance test embeddings."""

    id: str
    enroll: SpeakerEmbedding
    tests: tuple[SpeakerEmbedding, ...]

    @property
    def gender(self) -> str | None:
        return self.enroll.gender


@dataclass(frozen=True)
class EvalProtocol:
    """Evaluation protocol knobs.

    ``nearest_k`` restricts each target's non-target trials to its K most
    similar non-target speakers (None means all). ``repetitions`` controls
    how many anonymization draws are averaged for seeded strategies.
    """

    nearest_k: int | None = None
    repetitions: int = 1
    gender_partition: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.nearest_k is not None and self.nearest_k < 1:
            raise ValueError("nearest_k must be at least 1 (or None for all)")


@dataclass(frozen=True)
class AnonymizationEvent:
    """Provenance of one pseudo-speaker draw inside the benchmark."""

    repetition: int
    speaker_id: str
    seed: int | None
    selected_ids: tuple[str, ...]
    dissimilarity: float


@dataclass(frozen=True)
class PartitionEer:
    partition: str
    before: EerResult
    after: tuple[EerResult, ...]

    @property
    def mean_after(self) -> float:
        return float(np.mean([r.eer for r in self.after]))


@dataclass(frozen=True)
class ConditionResult:
    """Benchmark outcome for one anonymization condition."""

    label: str
    spec: AnonymizationSpec | None
    nearest_k: int | None
    repetitions: int
    rep_seeds: tuple[int | None, ...]
    partitions: tuple[PartitionEer, ...]
    events: tuple[AnonymizationEvent, ...]

    @property
    def pooled(self) -> PartitionEer:
        return next(p for p in self.partitions if p.partition == "pooled")

    @property
    def dissimilarity_range(self) -> tuple[float, float] | None:
        """Min and max measured dissimilarity across all draws."""
        if not self.events:
            return None
        values = [event.dissimilarity for event in self.events]
        return (min(values), max(values))

    def to_records(self) -> list[dict]:
        dis = self.dissimilarity_range
        records = []
        for part in self.partitions:
            records.append(
                {
                    "condition": self.label,
                    "k": self.nearest_k if self.nearest_k is not None else "all",
                    "m": self.spec.n_select if self.spec else None,
                    "s": self.spec.target_similarity if self.spec else None,
                    "partition": part.partition,
                    "eer_before": part.before.eer,
                    "eer_after": part.mean_after,
                    "eer_after_reps": [r.eer for r in part.after],
                    "dis_min": dis[0] if dis else None,
                    "dis_max": dis[1] if dis else None,
                    "seeds": [s for s in self.rep_seeds if s is not None],
                }
            )
        return records


@dataclass
class BenchmarkReport:
    """A stack of condition results plus the configuration echo."""

    conditions: list[ConditionResult]
    config_echo: dict = field(default_factory=dict)

    def to_record_lines(self) -> list[str]:
        lines = [json.dumps({"config": self.config_echo}, sort_keys=True)]
        for condition in self.conditions:
            for record in condition.to_records():
                lines.append(json.dumps(record, sort_keys=True))
        return lines

    def to_table(self) -> str:
        header = (
            f"{'condition':<24} {'K':>4} {'part':>8} {'EER before':>11} "
            f"{'EER after':>10} {'dis range':>15}"
        )
        rows = [header, "-" * len(header)]
        for condition in self.conditions:
            dis = condition.dissimilarity_range
            dis_text = f"{dis[0]:.3f}-{dis[1]:.3f}" if dis else "-"
            k_text = str(condition.nearest_k) if condition.nearest_k else "all"
            for part in condition.partitions:
                rows.append(
                    f"{condition.label:<24} {k_text:>4} {part.partition:>8} "
                    f"{part.before.eer:>10.2%} {part.mean_after:>9.2%} {dis_text:>15}"
                )
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class _TargetBlock:
    # Precomputed per-target trial scores; "after" conditions only swap the
    # target-side scores.
    speaker: EvalSpeaker
    target_scores: np.ndarray
    nontarget_scores: np.ndarray
    nontarget_genders: tuple[str | None, ...]


def _build_blocks(
    targets: Sequence[EvalSpeaker],
    nontargets: Sequence[EvalSpeaker],
    nearest_k: int | None,
) -> list[_TargetBlock]:
    blocks = []
    for target in targets:
        others = [s for s in nontargets if s.id != target.id]
        if not others:
            raise ValueError(f"no non-target speakers available for {target.id!r}")
        if nearest_k is not None:
            kept_ids = set(
                nearest_nontarget_subset(
                    target.enroll, [o.enroll for o in others], nearest_k
                )
            )
            others = [o for o in others if o.id in kept_ids]
        tar_scores = np.array(
            [cosine_similarity(target.enroll, utt) for utt in target.tests]
        )
        non_scores = []
        non_genders = []
        for other in others:
            for utt in other.tests:
                non_scores.append(cosine_similarity(target.enroll, utt))
                non_genders.append(other.gender)
        blocks.append(
            _TargetBlock(
                target, tar_scores, np.array(non_scores), tuple(non_genders)
            )
        )
    return blocks


def _partition_eer(
    blocks: Sequence[_TargetBlock],
    target_scores: Sequence[np.ndarray],
    gender: str | None,
) -> EerResult:
    tar: list[np.ndarray] = []
    non: list[np.ndarray] = []
    for block, scores in zip(blocks, target_scores):
        if gender is not None and block.speaker.gender != gender:
            continue
        tar.append(scores)
        if gender is None:
            non.append(block.nontarget_scores)
        else:
            mask = np.array([g == gender for g in block.nontarget_genders])
            non.append(block.nontarget_scores[mask])
    return compute_eer(np.concatenate(tar), np.concatenate(non))


def _partitions(
    blocks: Sequence[_TargetBlock], gender_partition: bool
) -> list[str | None]:
    parts: list[str | None] = [None]
    if gender_partition:
        genders = sorted({b.speaker.gender for b in blocks if b.speaker.gender})
        parts.extend(genders)
    return parts


def run_anonymization_benchmark(
    targets: Sequence[EvalSpeaker],
    nontargets: Sequence[EvalSpeaker],
    pool: EmbeddingPool | None,
    spec: AnonymizationSpec | None,
    protocol: EvalProtocol,
) -> ConditionResult:
    """Measure the EER before and after anonymizing the target test sides.

    ``spec=None`` is the identity condition (before equals after). For the
    random strategy the seed in ``spec`` is the condition master seed;
    every repetition r uses ``derive_seed(seed, "rep:r")`` and every
    speaker within it a further per-id derivation.
    """
    if not targets:
        raise ValueError("no target speakers supplied")
    blocks = _build_blocks(targets, nontargets, protocol.nearest_k)
    parts = _partitions(blocks, protocol.gender_partition)
    before_scores = [block.target_scores for block in blocks]
    before = {
        part: _partition_eer(blocks, before_scores, part) for part in parts
    }

    if spec is None:
        partitions = tuple(
            PartitionEer("pooled" if p is None else p, before[p], (before[p],))
            for p in parts
        )
        return ConditionResult(
            "none", None, protocol.nearest_k, 1, (None,), partitions, ()
        )

    if pool is None:
        raise ValueError("an embedding pool is required when a strategy is set")

    after: dict[str | None, list[EerResult]] = {part: [] for part in parts}
    events: list[AnonymizationEvent] = []
    rep_seeds: list[int | None] = []
    for rep in range(protocol.repetitions):
        rep_seed = (
            derive_seed(spec.seed, f"rep:{rep}") if spec.strategy == "random" else None
        )
        rep_seeds.append(rep_seed)
        rep_scores = []
        for block in blocks:
            speaker = block.speaker
            rep_spec = spec
            event_seed = None
            if spec.strategy == "random":
                event_seed = derive_seed(rep_seed, speaker.id)
                rep_spec = replace(spec, seed=event_seed)
            pseudo = apply_spec(pool, rep_spec, original=speaker.enroll)
            score = cosine_similarity(speaker.enroll, pseudo.embedding)
            rep_scores.append(np.full(len(speaker.tests), score))
            events.append(
                AnonymizationEvent(
                    rep,
                    speaker.id,
                    event_seed,
                    pseudo.selected_ids,
                    dissimilarity(speaker.enroll, pseudo.embedding),
                )
            )
        for part in parts:
            after[part].append(_partition_eer(blocks, rep_scores, part))

    label = _condition_label(spec)
    partitions = tuple(
        PartitionEer("pooled" if p is None else p, before[p], tuple(after[p]))
        for p in parts
    )
    return ConditionResult(
        label,
        spec,
        protocol.nearest_k,
        protocol.repetitions,
        tuple(rep_seeds),
        partitions,
        tuple(events),
    )


def _condition_label(spec: AnonymizationSpec) -> str:
    if spec.strategy == "random":
        return f"random(m={spec.n_select})"
    if spec.strategy == "nearest":
        return f"nearest(m={spec.n_select})"
    return f"range(s={spec.target_similarity:g},eps={spec.half_width:g})"


# ---------------------------------------------------------------------------
# Synthetic data generators


def make_cluster_speakers(
    n_speakers: int,
    utterances_per_speaker: int,
    dim: int,
    cluster_std: float,
    seed: int,
) -> list[EvalSpeaker]:
    """Synthetic speakers as Gaussian clusters around unit-norm means.

    Utterance embeddings are the cluster mean plus isotropic noise of the
    given standard deviation; the enrollment embedding is the mean of the
    utterances (the speaker-level embedding the pipeline would compute).
    Genders alternate so gender-partitioned protocols are exercisable.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    speakers = []
    for i in range(n_speakers):
        center = rng.standard_normal(dim)
        center /= np.linalg.norm(center)
        gender = "female" if i % 2 == 0 else "male"
        spk_id = f"spk{i:03d}"
        utterances = center + cluster_std * rng.standard_normal(
            (utterances_per_speaker, dim)
        )
        tests = tuple(
            SpeakerEmbedding(f"{spk_id}_u{j:03d}", utterances[j], {"gender": gender})
            for j in range(utterances_per_speaker)
        )
        enroll = mean_embedding(tests, new_id=spk_id)
        enroll = SpeakerEmbedding(spk_id, enroll.vector, {"gender": gender})
        speakers.append(EvalSpeaker(spk_id, enroll, tests))
    return speakers


def make_random_pool(size: int, dim: int, seed: int) -> EmbeddingPool:
    """A pool of unit-norm random embeddings standing in for external speakers."""
    rng = np.random.Generator(np.random.PCG64(seed))
    entries = []
    for i in range(size):
        vec = rng.standard_normal(dim)
        vec /= np.linalg.norm(vec)
        gender = "female" if i % 2 == 0 else "male"
        entries.append(SpeakerEmbedding(f"pool{i:04d}", vec, {"gender": gender}))
    return EmbeddingPool(entries)


def make_similarity_ladder_pool(
    original: SpeakerEmbedding,
    size: int,
    sim_low: float,
    sim_high: float,
) -> EmbeddingPool:
    """A pool of unit vectors whose similarities to ``original`` sweep a range.

    Entries lie in a fixed half-plane spanned by the original's direction
    and one deterministic orthogonal direction, at similarities evenly
    covering [sim_low, sim_high]. Because all entries sit on the same side,
    averaging a similarity window lands near the window's center instead of
    collapsing onto the original's axis, which is what range-selection
    experiments need.
    """
    if not -1.0 <= sim_low < sim_high <= 1.0:
        raise ValueError("need -1 <= sim_low < sim_high <= 1")
    if size < 2:
        raise ValueError("ladder pool needs at least two entries")
    if original.dim < 2:
        raise ValueError("ladder pool requires an embedding dimension of at least 2")
    axis = original.vector / np.linalg.norm(original.vector)
    # Deterministic orthogonal direction: the basis vector least aligned
    # with the axis, Gram-Schmidt orthogonalized.
    pivot = int(np.argmin(np.abs(axis)))
    basis = np.zeros(original.dim)
    basis[pivot] = 1.0
    ortho = basis - np.dot(basis, axis) * axis
    ortho /= np.linalg.norm(ortho)
    entries = []
    for i, s in enumerate(np.linspace(sim_low, sim_high, size)):
        vec = s * axis + np.sqrt(1.0 - s * s) * ortho
        entries.append(SpeakerEmbedding(f"ladder{i:04d}", vec))
    return EmbeddingPool(entries)
