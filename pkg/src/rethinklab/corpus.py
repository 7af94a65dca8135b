"""Emit prefix-tagged tuning corpora pairing correct and incorrect rationales.

Every mistake record yields two adjacent training examples, the correct one
first: the item's reference rationale tagged [CORRECT RATIONALE] and the
mistaken rationale tagged [INCORRECT RATIONALE]. Concatenation joins
question, prefix, and rationale with single spaces, giving byte-stable
corpora either as one "text" field or as an input/target split.

The autoregressive loss itself is out of scope here; the emitted files carry
enough structure for an external trainer to mask or not mask the prompt side
as it sees fit.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import BenchmarkItem, MistakeRecord, mistakes_hash
from .errors import ConfigError, IoFailure, PrefixCollision, UnresolvedItem

CORRECT_PREFIX = "[CORRECT RATIONALE]"
INCORRECT_PREFIX = "[INCORRECT RATIONALE]"
FORMATS = ("concat", "seq2seq")


@dataclass(frozen=True)
class TuningExample:
    """One training record: question, prefix tag, and rationale."""

    item_id: str
    label: str  # correct | incorrect
    question: str
    rationale: str

    def __post_init__(self):
        if self.label not in ("correct", "incorrect"):
            raise ValueError(f"unknown label {self.label!r}")
        if not self.question or not self.rationale:
            raise ValueError("question and rationale must be nonempty")
        for text in (self.question, self.rationale):
            if CORRECT_PREFIX in text or INCORRECT_PREFIX in text:
                raise PrefixCollision(
                    f"item {self.item_id}: text already contains a rationale prefix"
                )

    @property
    def prefix(self) -> str:
        return CORRECT_PREFIX if self.label == "correct" else INCORRECT_PREFIX

    @property
    def concatenated(self) -> str:
        return f"{self.question} {self.prefix} {self.rationale}"

    @property
    def input(self) -> str:
        return f"{self.question} {self.prefix}"

    @property
    def target(self) -> str:
        return self.rationale


def build_tuning_examples(
    mistakes: Sequence[MistakeRecord],
    dataset: Sequence[BenchmarkItem],
    *,
    include_clean: bool = False,
    limit: int | None = None,
    seed: int = 0,
) -> list[TuningExample]:
    """Pair every mistake with its item's reference rationale.

    Emits two adjacent examples per mistake, correct first. With
    ``include_clean``, items that never produced a mistake contribute their
    correct example afterwards, in dataset order. ``limit`` subsamples the
    mistake records (seeded, without replacement) before building.
    """
    by_id = {item.id: item for item in dataset}
    chosen = list(mistakes)
    if limit is not None:
        if limit < 0:
            raise ConfigError("limit must be >= 0")
        if limit < len(chosen):
            rng = random.Random(seed)
            keep = set(rng.sample(range(len(chosen)), limit))
            chosen = [record for index, record in enumerate(chosen) if index in keep]

    examples: list[TuningExample] = []
    mistaken_ids: set[str] = set()
    for record in chosen:
        item = by_id.get(record.item_id)
        if item is None:
            raise UnresolvedItem(record.item_id)
        mistaken_ids.add(item.id)
        examples.append(
            TuningExample(
                item_id=item.id,
                label="correct",
                question=item.question,
                rationale=item.reference,
            )
        )
        examples.append(
            TuningExample(
                item_id=item.id,
                label="incorrect",
                question=item.question,
                rationale=record.incorrect_rationale,
            )
        )
    if include_clean:
        for item in dataset:
            if item.id not in mistaken_ids:
                examples.append(
                    TuningExample(
                        item_id=item.id,
                        label="correct",
                        question=item.question,
                        rationale=item.reference,
                    )
                )
    return examples


def serialize(
    examples: Sequence[TuningExample], path: str | Path, format: str = "concat"
) -> Path:
    """Write one JSON object per line; byte-stable across runs.

    concat  -> {"text": question + " " + prefix + " " + rationale}
    seq2seq -> {"input": question + " " + prefix, "target": rationale}
    """
    if format not in FORMATS:
        raise ConfigError(f"unknown corpus format {format!r}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for example in examples:
                if format == "concat":
                    obj = {"text": example.concatenated}
                else:
                    obj = {"input": example.input, "target": example.target}
                handle.write(json.dumps(obj, ensure_ascii=False))
                handle.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def write_corpus_manifest(
    corpus_path: str | Path,
    *,
    mistakes: Sequence[MistakeRecord],
    format: str,
    examples: Sequence[TuningExample],
) -> Path:
    """Record the source errorset hash, format, and example counts."""
    corpus_path = Path(corpus_path)
    manifest = {
        "schema": "corpus-manifest-v1",
        "format": format,
        "errorset_hash": mistakes_hash(mistakes),
        "examples": len(examples),
        "correct": sum(1 for e in examples if e.label == "correct"),
        "incorrect": sum(1 for e in examples if e.label == "incorrect"),
    }
    path = corpus_path.with_name(corpus_path.name + ".manifest.json")
    path.write_text(json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return path
