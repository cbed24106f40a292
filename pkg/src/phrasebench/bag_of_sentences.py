"""Learning-table classifier: a many-to-few map from recognizer strings to phrases.

Training records which target each returned string belonged to, newest entry
winning.  Classification is an exact lookup on the normalized string; a miss
yields the distinct UNRECOGNIZED outcome, which scoring counts as incorrect.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

from .corpus import CorpusError, Observation, PhraseSet, normalize


class _Unrecognized:
    """Singleton returned when a transcript has no table entry."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNRECOGNIZED"

    def __bool__(self) -> bool:
        return False


UNRECOGNIZED = _Unrecognized()


@dataclass(frozen=True)
class LearningTable:
    """Immutable transcript -> phrase-id map, identity-seeded over its phrase set."""

    entries: Mapping[str, int]
    phrase_set: PhraseSet

    def __post_init__(self) -> None:
        valid = range(len(self.phrase_set.phrases))
        for text, pid in self.entries.items():
            if pid not in valid:
                raise CorpusError(f"table maps {text!r} to invalid phrase id {pid}")
        for phrase in self.phrase_set:
            if self.entries.get(phrase.text) is None:
                raise CorpusError(f"missing identity entry for phrase {phrase.id}")

    def __len__(self) -> int:
        return len(self.entries)


def train_table(train_obs: Sequence[Observation], phrase_set: PhraseSet) -> LearningTable:
    """Build the table: identity entries first, then training matches in order.

    Later observations overwrite earlier mappings of the same normalized
    transcript, so the mapping of any string equals the target of its final
    occurrence.  With no training observations the table reproduces the
    recognizer-only behavior of accepting exact phrase hits.
    """
    entries: dict[str, int] = {phrase.text: phrase.id for phrase in phrase_set}
    n_phrases = len(phrase_set.phrases)
    for obs in train_obs:
        if not 0 <= obs.target < n_phrases:
            raise CorpusError(f"training target {obs.target} not in phrase set")
        entries[normalize(obs.transcript)] = obs.target
    return LearningTable(entries=MappingProxyType(entries), phrase_set=phrase_set)


def classify_table(table: LearningTable, transcript: str):
    """Exact lookup of the normalized transcript; miss -> UNRECOGNIZED."""
    hit = table.entries.get(normalize(transcript))
    return UNRECOGNIZED if hit is None else hit


def save_table(table: LearningTable, path: str | Path) -> None:
    """Write the two-column (transcript, target_id) CSV form."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["transcript", "target_id"])
        for text in sorted(table.entries):
            writer.writerow([text, table.entries[text]])


def load_table(path: str | Path, phrase_set: PhraseSet) -> LearningTable:
    entries: dict[str, int] = {phrase.text: phrase.id for phrase in phrase_set}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or set(reader.fieldnames) != {"transcript", "target_id"}:
            raise CorpusError(f"bad table header in {path}")
        for row in reader:
            entries[normalize(row["transcript"])] = int(row["target_id"])
    return LearningTable(entries=MappingProxyType(entries), phrase_set=phrase_set)
