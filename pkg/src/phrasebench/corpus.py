"""Phrase sets, transcript observations, tokenization and word-frequency features.

Documents are represented as normalized word-frequency vectors: the entry for
an in-vocabulary term w in document d is count(w in d) / len(d).  Tokens that
are not in the vocabulary still count toward the denominator, so a vector sums
to 1 exactly when every token of the document is known.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class CorpusError(ValueError):
    """Raised for malformed corpus files or invalid corpus constructions."""


class PhraseType(str, Enum):
    AS_IS = "as_is"
    REDUCED = "reduced"
    PERSONALIZED = "personalized"


class Role(str, Enum):
    TRAIN = "train"
    TEST = "test"


PHRASES_PER_SET = 16

# Letters, digits and "&" survive normalization; everything else is stripped.
# "&" is kept so clinical shorthand like "h&p" stays a single token.
_STRIP_RE = re.compile(r"[^a-z0-9&\s]+")


def tokenize(raw: str) -> list[str]:
    """Lowercase, strip punctuation (keeping ``&``), split on whitespace."""
    return _STRIP_RE.sub("", raw.lower()).split()


def normalize(raw: str) -> str:
    """Canonical single-spaced form of a transcript: tokenize then re-join."""
    return " ".join(tokenize(raw))


@dataclass(frozen=True)
class Phrase:
    """One target phrase: a small id, normalized text, and its set kind."""

    id: int
    text: str
    phrase_type: PhraseType

    def __post_init__(self) -> None:
        if not 0 <= self.id < PHRASES_PER_SET:
            raise CorpusError(f"phrase id {self.id} out of range 0..{PHRASES_PER_SET - 1}")
        if not self.text or normalize(self.text) != self.text:
            raise CorpusError(f"phrase text not normalized: {self.text!r}")


@dataclass(frozen=True)
class PhraseSet:
    """The 16 target phrases of one phrasing style, ordered by id."""

    phrase_type: PhraseType
    phrases: tuple[Phrase, ...]

    def __post_init__(self) -> None:
        if len(self.phrases) != PHRASES_PER_SET:
            raise CorpusError(f"phrase set needs exactly {PHRASES_PER_SET} phrases, got {len(self.phrases)}")
        if [p.id for p in self.phrases] != list(range(PHRASES_PER_SET)):
            raise CorpusError("phrase ids must be 0..15 in order")
        if any(p.phrase_type != self.phrase_type for p in self.phrases):
            raise CorpusError("all phrases in a set must share the set's phrase_type")

    @classmethod
    def from_texts(cls, texts: Sequence[str], phrase_type: PhraseType) -> "PhraseSet":
        phrases = tuple(
            Phrase(id=i, text=normalize(t), phrase_type=phrase_type) for i, t in enumerate(texts)
        )
        return cls(phrase_type=phrase_type, phrases=phrases)

    def text_of(self, phrase_id: int) -> str:
        return self.phrases[phrase_id].text

    def __iter__(self):
        return iter(self.phrases)


@dataclass(frozen=True)
class Observation:
    """One spoken-phrase trial: what the recognizer returned, and the truth."""

    transcript: str
    target: int
    participant: str
    repetition: int
    role: Role

    def __post_init__(self) -> None:
        if not 0 <= self.target < PHRASES_PER_SET:
            raise CorpusError(f"target {self.target} out of range 0..{PHRASES_PER_SET - 1}")
        if self.repetition < 1:
            raise CorpusError(f"repetition must be >= 1, got {self.repetition}")


@dataclass(frozen=True)
class Vocabulary:
    """Deterministically ordered distinct terms with their column positions."""

    terms: tuple[str, ...]
    index: Mapping[str, int] = field(compare=False)

    @classmethod
    def from_terms(cls, terms: Iterable[str]) -> "Vocabulary":
        ordered = tuple(sorted(set(terms)))
        return cls(terms=ordered, index={t: i for i, t in enumerate(ordered)})

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index


def build_vocabulary(docs: Sequence[Sequence[str]]) -> Vocabulary:
    """Collect the distinct tokens of ``docs`` in lexicographic order."""
    if not docs:
        raise CorpusError("empty corpus")
    return Vocabulary.from_terms(t for doc in docs for t in doc)


def vectorize(doc: Sequence[str], vocab: Vocabulary) -> np.ndarray:
    """Word-frequency vector of ``doc`` over ``vocab``.

    The entry for term w is count(w in doc) / len(doc).  Out-of-vocabulary
    tokens inflate the denominator only, so the vector sums to less than 1
    when the document contains unknown words.  An empty document maps to the
    zero vector.
    """
    x = np.zeros(len(vocab))
    if not doc:
        return x
    for token in doc:
        j = vocab.index.get(token)
        if j is not None:
            x[j] += 1.0
    x /= len(doc)
    return x


@dataclass(frozen=True)
class DocTermMatrix:
    """Stacked word-frequency vectors, one row per document."""

    rows: np.ndarray
    vocabulary: Vocabulary
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.vocabulary):
            raise CorpusError("row width must equal vocabulary size")
        if self.labels is not None and len(self.labels) != self.rows.shape[0]:
            raise CorpusError("one label per row required")

    @property
    def n_docs(self) -> int:
        return self.rows.shape[0]


def build_matrix(
    docs: Sequence[Sequence[str]],
    vocab: Vocabulary,
    labels: Sequence[int] | None = None,
) -> DocTermMatrix:
    rows = np.vstack([vectorize(d, vocab) for d in docs]) if docs else np.zeros((0, len(vocab)))
    lab = None if labels is None else np.asarray(labels, dtype=int)
    return DocTermMatrix(rows=rows, vocabulary=vocab, labels=lab)


CSV_COLUMNS = ("transcript", "target_id", "phrase_type", "participant", "repetition", "role")


def load_corpus(path: str | Path) -> list[Observation]:
    """Read observations from the corpus CSV schema.

    Transcripts are kept verbatim; normalization happens at tokenize/classify
    time.  Errors name the offending data row (1-based, header excluded).
    """
    observations: list[Observation] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise CorpusError(f"missing column(s) {', '.join(missing)} in {path}")
        for rownum, row in enumerate(reader, start=1):
            try:
                target = int(row["target_id"])
            except (TypeError, ValueError):
                raise CorpusError(f"bad target_id {row.get('target_id')!r}, row {rownum}") from None
            if not 0 <= target < PHRASES_PER_SET:
                raise CorpusError(f"target out of range, row {rownum}")
            if row["phrase_type"] not in PhraseType._value2member_map_:
                raise CorpusError(f"unknown phrase_type {row['phrase_type']!r}, row {rownum}")
            try:
                role = Role(row["role"])
            except ValueError:
                raise CorpusError(f"unknown role {row['role']!r}, row {rownum}") from None
            try:
                repetition = int(row["repetition"])
            except (TypeError, ValueError):
                raise CorpusError(f"bad repetition {row.get('repetition')!r}, row {rownum}") from None
            observations.append(
                Observation(
                    transcript=row["transcript"],
                    target=target,
                    participant=row["participant"],
                    repetition=repetition,
                    role=role,
                )
            )
    return observations


def corpus_phrase_type(path: str | Path) -> PhraseType:
    """Return the phrase_type recorded in a corpus CSV (must be uniform)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "phrase_type" not in reader.fieldnames:
            raise CorpusError(f"missing column(s) phrase_type in {path}")
        seen = {row["phrase_type"] for row in reader}
    if len(seen) != 1:
        raise CorpusError(f"corpus mixes phrase types {sorted(seen)}: one type per file")
    return PhraseType(seen.pop())


def save_corpus(path: str | Path, observations: Sequence[Observation], phrase_type: PhraseType) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for obs in observations:
            writer.writerow(
                [obs.transcript, obs.target, phrase_type.value, obs.participant, obs.repetition, obs.role.value]
            )


def split_by_role(observations: Sequence[Observation]) -> tuple[list[Observation], list[Observation]]:
    """Partition into (train, test), preserving order within each part."""
    train = [o for o in observations if o.role is Role.TRAIN]
    test = [o for o in observations if o.role is Role.TEST]
    return train, test


def load_phrase_set(phrase_type: PhraseType | str) -> PhraseSet:
    """Load one of the three built-in 16-phrase checklist sets."""
    phrase_type = PhraseType(phrase_type)
    data = json.loads(resources.files("phrasebench.data").joinpath("phrases.json").read_text("utf-8"))
    return PhraseSet.from_texts(data[phrase_type.value], phrase_type)
