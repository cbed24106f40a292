"""Factorial experiment runner and published-table replay.

A design is a grid of cells (phrase type x training level x method).  The
method grid follows the evaluation layout: the raw recognizer is only
meaningful with zero training, the three post-processing methods only with
training repetitions.  Each cell draws its corpus from a stream derived from
(seed, phrase type, level), so adding or removing cells never changes the
results of the others, and the three methods of a (type, level) cell are
compared on identical data.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import bag_of_sentences as bos
from . import maxent as me
from . import noise
from . import stats
from . import svm as sv
from .corpus import (
    CorpusError,
    DocTermMatrix,
    Observation,
    PhraseSet,
    PhraseType,
    build_matrix,
    build_vocabulary,
    corpus_phrase_type,
    load_corpus,
    load_phrase_set,
    split_by_role,
    tokenize,
)

PAPER_LEVELS = (0, 5, 10)


class Method(str, Enum):
    GOOGLE_ONLY = "google_only"
    BAG_OF_SENTENCES = "bos"
    SVM = "svm"
    MAXENT = "maxent"


class ConfigurationError(ValueError):
    """A design cell or config value outside the supported grid."""


def checked_cell(level: int, method: Method) -> bool:
    """Whether (level, method) is a cell of the evaluation grid."""
    if method is Method.GOOGLE_ONLY:
        return level == 0
    return level in (5, 10)


@dataclass(frozen=True)
class MaxentSettings:
    step: float = 1.0
    max_iters: int = 500
    tolerance: float = 1e-4
    l2: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    phrase_types: tuple[PhraseType, ...] = (PhraseType.AS_IS, PhraseType.REDUCED, PhraseType.PERSONALIZED)
    levels: tuple[int, ...] = PAPER_LEVELS
    methods: tuple[Method, ...] = (Method.GOOGLE_ONLY, Method.BAG_OF_SENTENCES, Method.SVM, Method.MAXENT)
    participants: int = 16
    test_reps: int = 5
    seed: int = 0
    svm: sv.SvmConfig = field(default_factory=sv.SvmConfig)
    maxent: MaxentSettings = field(default_factory=MaxentSettings)
    confusion_model_path: str | None = None
    corpus_csv: str | None = None
    per_participant: bool = False

    def __post_init__(self) -> None:
        for level in self.levels:
            if level < 0:
                raise ConfigurationError(f"negative training level {level}")
        if self.participants < 1 or self.test_reps < 1:
            raise ConfigurationError("participants and test_reps must be >= 1")

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        kwargs: dict = {}
        if "phrase_types" in doc:
            kwargs["phrase_types"] = tuple(PhraseType(t) for t in doc["phrase_types"])
        if "levels" in doc:
            kwargs["levels"] = tuple(int(v) for v in doc["levels"])
        if "methods" in doc:
            kwargs["methods"] = tuple(Method(m) for m in doc["methods"])
        for key in ("participants", "test_reps", "seed"):
            if key in doc:
                kwargs[key] = int(doc[key])
        if "svm" in doc:
            kwargs["svm"] = sv.SvmConfig(**doc["svm"])
        if "maxent" in doc:
            kwargs["maxent"] = MaxentSettings(**doc["maxent"])
        for key in ("confusion_model_path", "corpus_csv"):
            if key in doc and doc[key] is not None:
                kwargs[key] = str(doc[key])
        if "per_participant" in doc:
            kwargs["per_participant"] = bool(doc["per_participant"])
        return cls(**kwargs)


@dataclass(frozen=True)
class CellResult:
    phrase_type: PhraseType
    level: int
    method: Method
    per_phrase: tuple[tuple[int, int], ...]  # (correct, total) for phrase ids 0..15
    elapsed_s: float

    @property
    def per_phrase_percent(self) -> tuple[float, ...]:
        return tuple(100.0 * c / n if n else 0.0 for c, n in self.per_phrase)

    @property
    def mean_percent(self) -> float:
        return float(np.mean(self.per_phrase_percent))

    @property
    def total_correct(self) -> int:
        return sum(c for c, _ in self.per_phrase)

    @property
    def total_trials(self) -> int:
        return sum(n for _, n in self.per_phrase)


def _derived_seed(seed: int, *parts: object) -> int:
    digest = hashlib.sha256(("|".join([str(seed), *map(str, parts)])).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _cell_corpus(
    config: ExperimentConfig, phrase_set: PhraseSet, level: int
) -> tuple[list[Observation], list[Observation]]:
    """Training and test observations for one (phrase type, level) cell."""
    if config.corpus_csv is not None:
        file_type = corpus_phrase_type(config.corpus_csv)
        if file_type != phrase_set.phrase_type:
            raise ConfigurationError(
                f"corpus file holds {file_type.value} phrases, cell needs {phrase_set.phrase_type.value}"
            )
        observations = load_corpus(config.corpus_csv)
        train, test = split_by_role(observations)
        # Level L uses the first L training repetitions per (participant, phrase).
        train = [o for o in train if o.repetition <= level]
        return train, test
    if config.confusion_model_path is not None:
        model = noise.load_confusion_model(config.confusion_model_path)
    else:
        model = noise.default_confusion_model()
    model = replace(model, seed=_derived_seed(config.seed, phrase_set.phrase_type.value, level))
    observations = noise.generate_corpus(
        model, phrase_set, participants=config.participants, train_reps=level, test_reps=config.test_reps
    )
    return split_by_role(observations)


def _train_feature_classifier(
    method: Method,
    train_obs: Sequence[Observation],
    phrase_set: PhraseSet,
    config: ExperimentConfig,
):
    """Fit SVM or maxent on training transcripts plus one pristine phrase copy each.

    The pristine copies guarantee every class at least one example and put
    the target wordings themselves into the vocabulary; test transcripts
    contribute nothing to either.
    """
    docs = [tokenize(o.transcript) for o in train_obs] + [tokenize(p.text) for p in phrase_set]
    labels = [o.target for o in train_obs] + [p.id for p in phrase_set]
    vocab = build_vocabulary(docs)
    matrix = build_matrix(docs, vocab, labels)
    if method is Method.SVM:
        model = sv.train_svm(matrix, config.svm, classes=range(len(phrase_set.phrases)))
        model.phrase_texts = tuple(p.text for p in phrase_set)
        return model
    m = config.maxent
    model = me.train_maxent(
        matrix,
        max_iters=m.max_iters,
        step=m.step,
        tolerance=m.tolerance,
        l2=m.l2,
        classes=range(len(phrase_set.phrases)),
    )
    model.phrase_texts = tuple(p.text for p in phrase_set)
    return model


def _predict(method: Method, model, transcript: str):
    if method in (Method.GOOGLE_ONLY, Method.BAG_OF_SENTENCES):
        return bos.classify_table(model, transcript)
    if method is Method.SVM:
        return sv.classify_svm(model, transcript)
    return me.classify_maxent(model, transcript)


def train_cell_classifier(
    method: Method,
    train_obs: Sequence[Observation],
    phrase_set: PhraseSet,
    config: ExperimentConfig,
):
    """The trained object a cell classifies with; exposed for hygiene tests."""
    if method is Method.GOOGLE_ONLY:
        return bos.train_table([], phrase_set)
    if method is Method.BAG_OF_SENTENCES:
        return bos.train_table(train_obs, phrase_set)
    return _train_feature_classifier(method, train_obs, phrase_set, config)


def run_cell(
    config: ExperimentConfig, phrase_type: PhraseType | str, level: int, method: Method | str
) -> CellResult:
    """Generate or load the cell corpus, train its classifier, score per phrase."""
    phrase_type = PhraseType(phrase_type)
    method = Method(method)
    if not checked_cell(level, method):
        raise ConfigurationError(f"({level}, {method.value}) is not a cell of the evaluation grid")
    start = time.perf_counter()
    phrase_set = load_phrase_set(phrase_type)
    train_obs, test_obs = _cell_corpus(config, phrase_set, level)

    groups: list[tuple[Sequence[Observation], Sequence[Observation]]]
    if config.per_participant and method is not Method.GOOGLE_ONLY:
        participants = sorted({o.participant for o in test_obs})
        groups = [
            (
                [o for o in train_obs if o.participant == p],
                [o for o in test_obs if o.participant == p],
            )
            for p in participants
        ]
    else:
        groups = [(train_obs, test_obs)]

    correct = np.zeros(len(phrase_set.phrases), dtype=int)
    total = np.zeros(len(phrase_set.phrases), dtype=int)
    for group_train, group_test in groups:
        model = train_cell_classifier(method, group_train, phrase_set, config)
        for obs in group_test:
            total[obs.target] += 1
            predicted = _predict(method, model, obs.transcript)
            if predicted is not bos.UNRECOGNIZED and predicted == obs.target:
                correct[obs.target] += 1

    elapsed = time.perf_counter() - start
    return CellResult(
        phrase_type=phrase_type,
        level=level,
        method=method,
        per_phrase=tuple((int(c), int(n)) for c, n in zip(correct, total)),
        elapsed_s=elapsed,
    )


def design_cells(config: ExperimentConfig) -> list[tuple[PhraseType, int, Method]]:
    """The requested grid cells in deterministic report order."""
    cells = []
    for phrase_type in config.phrase_types:
        for level in sorted(config.levels):
            for method in (Method.GOOGLE_ONLY, Method.BAG_OF_SENTENCES, Method.SVM, Method.MAXENT):
                if method in config.methods and checked_cell(level, method):
                    cells.append((phrase_type, level, method))
    return cells


def run_design(config: ExperimentConfig, out_dir: str | Path | None = None) -> list[CellResult]:
    """Run every requested cell; optionally write the report files."""
    results = [run_cell(config, pt, level, method) for pt, level, method in design_cells(config)]
    if out_dir is not None:
        write_reports(results, config, Path(out_dir))
    return results


# ---------------------------------------------------------------------------
# report files


def _app_path_results(results: Sequence[CellResult], phrase_type: PhraseType) -> dict[int, CellResult]:
    """The recognizer-plus-table column per level: google_only at 0, bos at 5/10."""
    out: dict[int, CellResult] = {}
    for r in results:
        if r.phrase_type != phrase_type:
            continue
        if (r.level == 0 and r.method is Method.GOOGLE_ONLY) or (
            r.level in (5, 10) and r.method is Method.BAG_OF_SENTENCES
        ):
            out[r.level] = r
    return dict(sorted(out.items()))


def _phrase_pvalue(levels: dict[int, CellResult], phrase_id: int) -> float | None:
    if len(levels) < 2:
        return None
    correct = [r.per_phrase[phrase_id][0] for r in levels.values()]
    totals = [r.per_phrase[phrase_id][1] for r in levels.values()]
    try:
        table = stats.ContingencyTable.from_level_counts(correct, totals)
        _, _, p = stats.chi_squared_test(table)
    except (ValueError, stats.DegenerateTableError):
        return None
    return p


def write_reports(results: Sequence[CellResult], config: ExperimentConfig, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    phrase_types = sorted({r.phrase_type for r in results}, key=lambda t: t.value)

    for phrase_type in phrase_types:
        app_path = _app_path_results(results, phrase_type)
        if app_path:
            _write_counts_csv(out_dir / f"counts_{phrase_type.value}.csv", phrase_type, app_path)
    _write_level_summary_csv(out_dir / "summary_levels.csv", results, phrase_types)
    _write_classifier_csv(out_dir / "summary_classifiers.csv", results, phrase_types)
    _write_results_json(out_dir / "results.json", results, config)


def _write_counts_csv(path: Path, phrase_type: PhraseType, app_path: dict[int, CellResult]) -> None:
    phrase_set = load_phrase_set(phrase_type)
    levels = list(app_path)
    header = ["phrase"]
    for level in levels:
        header += [f"pct_level{level}", f"n{level}"]
    header.append("p_value")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for phrase in phrase_set:
            row: list[object] = [phrase.text]
            for level in levels:
                c, n = app_path[level].per_phrase[phrase.id]
                row += [f"{100.0 * c / n:.1f}" if n else "", c]
            p = _phrase_pvalue(app_path, phrase.id)
            row.append(f"{p:.3f}" if p is not None else "")
            writer.writerow(row)


def _write_level_summary_csv(path: Path, results: Sequence[CellResult], phrase_types: Sequence[PhraseType]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phrase_type", "level", "mean_pct", "std_pct", "p_vs_prev_level"])
        for phrase_type in phrase_types:
            app_path = _app_path_results(results, phrase_type)
            prev: CellResult | None = None
            for level, cell in app_path.items():
                percents = cell.per_phrase_percent
                mean = float(np.mean(percents))
                std = float(np.std(percents, ddof=1))
                p = (
                    stats.two_proportion_test(
                        prev.total_correct, prev.total_trials, cell.total_correct, cell.total_trials
                    )
                    if prev is not None
                    else None
                )
                writer.writerow(
                    [phrase_type.value, level, f"{mean:.1f}", f"{std:.1f}", f"{p:.3f}" if p is not None else ""]
                )
                prev = cell


def _write_classifier_csv(path: Path, results: Sequence[CellResult], phrase_types: Sequence[PhraseType]) -> None:
    by_key = {(r.phrase_type, r.level, r.method): r for r in results}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "phrase_type",
                "level",
                "svm_mean",
                "svm_std",
                "maxent_mean",
                "maxent_std",
                "p_bos_svm",
                "p_bos_maxent",
                "p_svm_maxent",
            ]
        )
        for phrase_type in phrase_types:
            for level in (5, 10):
                svm_cell = by_key.get((phrase_type, level, Method.SVM))
                maxent_cell = by_key.get((phrase_type, level, Method.MAXENT))
                bos_cell = by_key.get((phrase_type, level, Method.BAG_OF_SENTENCES))
                if svm_cell is None and maxent_cell is None:
                    continue
                row: list[object] = [phrase_type.value, level]
                for cell in (svm_cell, maxent_cell):
                    if cell is None:
                        row += ["", ""]
                    else:
                        percents = cell.per_phrase_percent
                        row += [f"{np.mean(percents):.1f}", f"{np.std(percents, ddof=1):.1f}"]
                for a, b in ((bos_cell, svm_cell), (bos_cell, maxent_cell), (svm_cell, maxent_cell)):
                    if a is None or b is None:
                        row.append("")
                    else:
                        p = stats.two_proportion_test(
                            a.total_correct, a.total_trials, b.total_correct, b.total_trials
                        )
                        row.append(f"{p:.3f}")
                writer.writerow(row)


def _write_results_json(path: Path, results: Sequence[CellResult], config: ExperimentConfig) -> None:
    doc = {
        "config": {
            "phrase_types": [t.value for t in config.phrase_types],
            "levels": list(config.levels),
            "methods": [m.value for m in config.methods],
            "participants": config.participants,
            "test_reps": config.test_reps,
            "seed": config.seed,
            "per_participant": config.per_participant,
            "confusion_model_path": config.confusion_model_path,
            "corpus_csv": config.corpus_csv,
        },
        "cells": [
            {
                "phrase_type": r.phrase_type.value,
                "level": r.level,
                "method": r.method.value,
                "per_phrase": [{"phrase_id": i, "correct": c, "total": n} for i, (c, n) in enumerate(r.per_phrase)],
                "mean_percent": round(r.mean_percent, 6),
            }
            for r in results
        ],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# published-table replay


@dataclass(frozen=True)
class ReplayRow:
    table: str
    phrase: str
    correct: tuple[int, ...]
    chi2: float
    df: int
    p_computed: float
    p_printed: str
    p_effective: str  # printed value, or the erratum-corrected one when present
    erratum: str | None

    @property
    def agrees(self) -> bool:
        """Computed p matches the effective published value (bound or +-0.002)."""
        if self.p_effective.startswith("<"):
            return self.p_computed < float(self.p_effective[1:])
        return abs(self.p_computed - float(self.p_effective)) <= 0.002


@dataclass(frozen=True)
class ReplayMeans:
    phrase_type: str
    level: int
    published: float
    recomputed: float | None  # None when no per-phrase column was published

    @property
    def diff(self) -> float | None:
        return None if self.recomputed is None else abs(self.recomputed - self.published)


@dataclass(frozen=True)
class ReplayReport:
    rows: tuple[ReplayRow, ...]
    means: tuple[ReplayMeans, ...]

    @property
    def all_rows_agree(self) -> bool:
        return all(r.agrees for r in self.rows)


def load_published_tables() -> dict:
    return json.loads(resources.files("phrasebench.data").joinpath("published_tables.json").read_text("utf-8"))


def replay_paper_tables() -> ReplayReport:
    """Recompute every published chi-squared p-value and level mean.

    p-values come from the published correct/incorrect counts; level means
    from the published percentage columns.  The personalized set has no
    published per-phrase column, so its means pass through unrecomputed.
    """
    data = load_published_tables()
    totals = [data["trials_per_level"]] * len(data["levels"])
    rows: list[ReplayRow] = []
    for table_name, table_rows in data["tables"].items():
        for row in table_rows:
            contingency = stats.ContingencyTable.from_level_counts(row["correct"], totals)
            chi2, df, p = stats.chi_squared_test(contingency)
            printed = row["p_value"]
            effective = row.get("p_value_corrected", printed)
            rows.append(
                ReplayRow(
                    table=table_name,
                    phrase=row["phrase"],
                    correct=tuple(row["correct"]),
                    chi2=chi2,
                    df=df,
                    p_computed=p,
                    p_printed=printed,
                    p_effective=effective,
                    erratum=row.get("erratum"),
                )
            )

    means: list[ReplayMeans] = []
    for phrase_type, summary in data["level_summary"].items():
        table_rows = data["tables"].get(phrase_type)
        for j, level in enumerate(data["levels"]):
            recomputed = None
            if table_rows is not None:
                recomputed = float(np.mean([r["percent"][j] for r in table_rows]))
            means.append(
                ReplayMeans(
                    phrase_type=phrase_type,
                    level=level,
                    published=summary["mean"][j],
                    recomputed=recomputed,
                )
            )
    return ReplayReport(rows=tuple(rows), means=tuple(means))


def write_replay_report(report: ReplayReport, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "replay_pvalues.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["table", "phrase", "chi2", "df", "p_computed", "p_printed", "p_effective", "agrees", "erratum"])
        for r in report.rows:
            writer.writerow(
                [
                    r.table,
                    r.phrase,
                    f"{r.chi2:.4f}",
                    r.df,
                    f"{r.p_computed:.6f}",
                    r.p_printed,
                    r.p_effective,
                    "yes" if r.agrees else "NO",
                    r.erratum or "",
                ]
            )
    with open(out_dir / "replay_means.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phrase_type", "level", "published_mean", "recomputed_mean", "abs_diff"])
        for m in report.means:
            writer.writerow(
                [
                    m.phrase_type,
                    m.level,
                    f"{m.published:.1f}",
                    f"{m.recomputed:.4f}" if m.recomputed is not None else "not published per phrase",
                    f"{m.diff:.4f}" if m.diff is not None else "",
                ]
            )
    doc = {
        "pvalues": [
            {
                "table": r.table,
                "phrase": r.phrase,
                "chi2": round(r.chi2, 6),
                "df": r.df,
                "p_computed": round(r.p_computed, 8),
                "p_printed": r.p_printed,
                "p_effective": r.p_effective,
                "agrees": r.agrees,
                "erratum": r.erratum,
            }
            for r in report.rows
        ],
        "means": [
            {
                "phrase_type": m.phrase_type,
                "level": m.level,
                "published": m.published,
                "recomputed": m.recomputed,
                "abs_diff": m.diff,
            }
            for m in report.means
        ],
    }
    (out_dir / "replay.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
