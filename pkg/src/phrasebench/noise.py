"""Seeded recognizer stand-in: corrupts spoken phrases into plausible transcripts.

The model applies per-token substitution then deletion.  Misrecognitions are
sticky: each (participant, token) pair has a preferred corruption, drawn from
a stream keyed by the pair, that is reused with the configured stickiness
probability whenever the token errors.  This reproduces the recognizer
behavior that motivates table-based post-processing: the same wrong words
come back again and again for the same speaker.

Every random draw comes from a counter-style stream derived by hashing
(seed, participant, phrase, repetition), so corpora are reproducible
regardless of generation order and participants never share randomness.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Observation, Phrase, PhraseSet, Role, tokenize

Substitutions = Mapping[str, tuple[tuple[str, float], ...]]


@dataclass(frozen=True)
class ConfusionModel:
    substitutions: Substitutions
    deletion_prob: float = 0.0
    stickiness: float = 0.8
    participant_bias: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        for token, entries in self.substitutions.items():
            total = sum(p for _, p in entries)
            if any(p < 0 for _, p in entries) or total > 1.0 + 1e-9:
                raise ValueError(f"substitution probabilities for {token!r} must be >= 0 and sum to <= 1")
        if not 0.0 <= self.deletion_prob < 1.0:
            raise ValueError("deletion_prob must be in [0, 1)")
        if not 0.0 <= self.stickiness <= 1.0:
            raise ValueError("stickiness must be in [0, 1]")
        max_bias = max(self.participant_bias.values(), default=1.0)
        if any(b < 0 for b in self.participant_bias.values()):
            raise ValueError("participant bias multipliers must be >= 0")
        if self.deletion_prob * max(1.0, max_bias) >= 1.0:
            raise ValueError("deletion_prob times the largest bias must stay below 1")


def _stream(*key: object) -> np.random.Generator:
    """Deterministic generator keyed by the hashed arguments (order matters)."""
    digest = hashlib.sha256("|".join(repr(k) for k in key).encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _sticky_replacement(model: ConfusionModel, participant: str, token: str) -> str:
    """The corruption this participant prefers for this token.

    Drawn once per (participant, token) from its own stream, so it is a pure
    function of the model and the pair: the 'first sampled substitution' in a
    form that does not depend on generation order.
    """
    entries = model.substitutions[token]
    probs = np.array([p for _, p in entries])
    rng = _stream(model.seed, "sticky", participant, token)
    choice = rng.choice(len(entries), p=probs / probs.sum())
    return entries[choice][0]


def corrupt(model: ConfusionModel, phrase: Phrase, participant: str, repetition: int) -> str:
    """Simulated recognizer output for one utterance of phrase by participant."""
    rng = _stream(model.seed, participant, phrase.id, repetition)
    bias = model.participant_bias.get(participant, 1.0)
    out: list[str] = []
    for token in tokenize(phrase.text):
        entries = model.substitutions.get(token, ())
        total = min(1.0, bias * sum(p for _, p in entries))
        produced = token
        if entries and rng.random() < total:
            if rng.random() < model.stickiness:
                produced = _sticky_replacement(model, participant, token)
            else:
                probs = np.array([p for _, p in entries])
                choice = rng.choice(len(entries), p=probs / probs.sum())
                produced = entries[choice][0]
        if rng.random() < min(1.0, bias * model.deletion_prob):
            continue
        out.append(produced)
    return " ".join(out)


def participant_ids(count: int) -> list[str]:
    width = max(2, len(str(count)))
    return [f"p{i:0{width}d}" for i in range(1, count + 1)]


def generate_corpus(
    model: ConfusionModel,
    phrase_set: PhraseSet,
    participants: int,
    train_reps: int,
    test_reps: int,
) -> list[Observation]:
    """Full factorial corpus: every participant speaks every phrase.

    Repetitions 1..train_reps are training trials, the following test_reps
    are test trials.  Output size is 16 * participants * (train + test).
    """
    if participants < 0 or train_reps < 0 or test_reps < 0:
        raise ValueError("counts must be non-negative")
    observations: list[Observation] = []
    for participant in participant_ids(participants):
        for phrase in phrase_set:
            for rep in range(1, train_reps + test_reps + 1):
                role = Role.TRAIN if rep <= train_reps else Role.TEST
                observations.append(
                    Observation(
                        transcript=corrupt(model, phrase, participant, rep),
                        target=phrase.id,
                        participant=participant,
                        repetition=rep,
                        role=role,
                    )
                )
    return observations


def _derived_corruptions(token: str, count: int) -> list[str]:
    """Deterministic pseudo-misrecognitions of a token.

    Each variant applies one small edit (char swap, drop, doubling, or a
    split into two tokens), keyed only by the token text so the table is
    stable across runs and seeds.
    """
    variants: list[str] = []
    salt = 0
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    while len(variants) < count:
        rng = _stream("corruption-variant", token, len(variants), salt)
        op = rng.integers(0, 4)
        chars = list(token)
        if op == 0 or len(chars) < 2:
            i = int(rng.integers(0, len(chars)))
            chars[i] = alphabet[int(rng.integers(0, 26))]
            variant = "".join(chars)
        elif op == 1:
            i = int(rng.integers(0, len(chars)))
            variant = "".join(chars[:i] + chars[i + 1 :])
        elif op == 2:
            i = int(rng.integers(0, len(chars)))
            variant = "".join(chars[: i + 1] + chars[i:])
        else:
            i = int(rng.integers(1, len(chars)))
            variant = "".join(chars[:i]) + " " + "".join(chars[i:])
        if variant and variant != token and variant not in variants:
            variants.append(variant)
        else:
            salt += 1
    return variants


def uniform_confusion_model(
    phrase_set: PhraseSet,
    rate: float,
    stickiness: float = 0.8,
    variants: int = 3,
    deletion_prob: float = 0.0,
    seed: int = 0,
) -> ConfusionModel:
    """Every vocabulary token errs with the same probability.

    Each token of the phrase set gets `variants` derived corruptions sharing
    the total substitution rate equally.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    tokens = sorted({t for phrase in phrase_set for t in tokenize(phrase.text)})
    substitutions = {
        token: tuple((v, rate / variants) for v in _derived_corruptions(token, variants))
        for token in tokens
    }
    return ConfusionModel(
        substitutions=substitutions,
        deletion_prob=deletion_prob,
        stickiness=stickiness,
        seed=seed,
    )


def confusion_model_from_dict(doc: dict) -> ConfusionModel:
    substitutions = {
        token: tuple((str(rep), float(p)) for rep, p in entries)
        for token, entries in doc.get("substitutions", {}).items()
    }
    return ConfusionModel(
        substitutions=substitutions,
        deletion_prob=float(doc.get("deletion_prob", 0.0)),
        stickiness=float(doc.get("stickiness", 0.8)),
        participant_bias={str(k): float(v) for k, v in doc.get("participant_bias", {}).items()},
        seed=int(doc.get("seed", 0)),
    )


def load_confusion_model(path: str | Path) -> ConfusionModel:
    return confusion_model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def default_confusion_model(seed: int | None = None) -> ConfusionModel:
    """The shipped homophone-style table for the checklist vocabulary."""
    doc = json.loads(resources.files("phrasebench.data").joinpath("default_confusions.json").read_text("utf-8"))
    model = confusion_model_from_dict(doc)
    if seed is not None:
        model = ConfusionModel(
            substitutions=model.substitutions,
            deletion_prob=model.deletion_prob,
            stickiness=model.stickiness,
            participant_bias=model.participant_bias,
            seed=seed,
        )
    return model
