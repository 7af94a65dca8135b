"""Domain types plus line-delimited dataset, mistake, and result file I/O.

Canonical file format is UTF-8 JSON lines, one object per line. Unknown
fields on dataset records are preserved through load/save round-trips but
otherwise ignored. Gold answers are normalized exactly once, at load time,
using the rules in the evaluate module.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import DuplicateId, IoFailure, MalformedRecord, MissingManifest

DATASET_FIELDS = ("id", "task", "question", "reference", "answer", "answer_type", "choices")
MANIFEST_SCHEMA = "run-manifest-v1"


@dataclass(frozen=True)
class BenchmarkItem:
    """One task instance: question, gold rationale, and normalized gold answer."""

    id: str
    task: str
    question: str
    reference: str
    gold_answer: str
    answer_type: str
    choices: tuple[tuple[str, str], ...] = ()
    extras: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            "id": self.id,
            "task": self.task,
            "question": self.question,
            "reference": self.reference,
            "answer": self.gold_answer,
            "answer_type": self.answer_type,
        }
        if self.choices:
            record["choices"] = [list(pair) for pair in self.choices]
        record.update(self.extras)
        return record


@dataclass
class MistakeRecord:
    """One mistake-corpus row: an incorrect rationale plus its introspection.

    Enrichment (introspection, keywords, category) mutates the record in
    place; each record is owned by a single worker while being enriched.
    """

    item_id: str
    question: str
    reference: str
    target: str
    incorrect_rationale: str
    error_causes: str = ""
    error_keywords: list[str] | None = None
    error_category: str | None = None

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            "item_id": self.item_id,
            "question": self.question,
            "reference": self.reference,
            "target": self.target,
            "incorrect_rationale": self.incorrect_rationale,
            "error_causes": self.error_causes,
        }
        if self.error_keywords is not None:
            record["error_keywords"] = list(self.error_keywords)
        if self.error_category is not None:
            record["error_category"] = self.error_category
        return record


@dataclass(frozen=True)
class RunResult:
    """Outcome of one strategy run on one item."""

    item_id: str
    strategy: str
    final_answer: str
    correct: bool
    backend_calls: int
    trace_path: str = ""

    def __post_init__(self):
        if self.backend_calls < 1:
            raise ValueError("backend_calls must be >= 1")

    def to_record(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "strategy": self.strategy,
            "final_answer": self.final_answer,
            "correct": self.correct,
            "backend_calls": self.backend_calls,
            "trace_path": self.trace_path,
        }


# ---------------------------------------------------------------------------
# canonical serialization and hashing


def canonical_json(obj: Any) -> str:
    """Key-sorted, separator-stable JSON; the hashing authority."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def content_hash(records: Iterable[Mapping[str, Any]]) -> str:
    """SHA-256 over canonicalized records, stable under key reordering."""
    digest = hashlib.sha256()
    for record in records:
        digest.update(canonical_json(record).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def dataset_hash(items: Sequence[BenchmarkItem]) -> str:
    return content_hash(item.to_record() for item in items)


def mistakes_hash(records: Sequence[MistakeRecord]) -> str:
    return content_hash(record.to_record() for record in records)


# ---------------------------------------------------------------------------
# JSONL helpers


def _iter_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise MalformedRecord(line_no, "record is not a JSON object")
            yield line_no, obj


_ENCODE = json.JSONEncoder(ensure_ascii=False).encode


def _write_jsonl(records: Iterable[Mapping[str, Any]], path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            handle.writelines(_ENCODE(record) + "\n" for record in records)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def _required(obj: dict, key: str, line_no: int) -> Any:
    if key not in obj:
        raise MalformedRecord(line_no, f"missing field {key!r}")
    return obj[key]


# ---------------------------------------------------------------------------
# datasets


def load_dataset(path: str | Path) -> list[BenchmarkItem]:
    """Load a line-delimited dataset file, validating every item.

    Gold answers are normalized here, once; choice golds must name one of the
    item's choice labels, numeric golds must parse as decimals. Unknown extra
    fields are kept on the item so save_dataset can round-trip them.
    """
    from .evaluate import ANSWER_TYPES, normalize_answer  # one normalization authority
    from .errors import NotNumeric

    items: list[BenchmarkItem] = []
    seen: set[str] = set()
    for line_no, obj in _iter_jsonl(Path(path)):
        item_id = str(_required(obj, "id", line_no))
        if not item_id:
            raise MalformedRecord(line_no, "empty id")
        if item_id in seen:
            raise DuplicateId(item_id)
        seen.add(item_id)

        answer_type = str(_required(obj, "answer_type", line_no))
        if answer_type not in ANSWER_TYPES:
            raise MalformedRecord(line_no, f"unknown answer_type {answer_type!r}")

        raw_choices = obj.get("choices") or []
        choices = tuple((str(label), str(text)) for label, text in raw_choices)

        raw_answer = str(_required(obj, "answer", line_no))
        try:
            gold = normalize_answer(raw_answer, answer_type)
        except NotNumeric:
            raise MalformedRecord(line_no, f"gold answer {raw_answer!r} is not numeric") from None

        if answer_type == "choice":
            if not choices:
                raise MalformedRecord(line_no, "choice item without choices")
            labels = {normalize_answer(label, "choice") for label, _ in choices}
            if gold not in labels:
                raise MalformedRecord(line_no, f"gold {gold!r} not among choice labels")

        extras = {k: v for k, v in obj.items() if k not in DATASET_FIELDS}
        items.append(
            BenchmarkItem(
                id=item_id,
                task=str(_required(obj, "task", line_no)),
                question=str(_required(obj, "question", line_no)),
                reference=str(_required(obj, "reference", line_no)),
                gold_answer=gold,
                answer_type=answer_type,
                choices=choices,
                extras=extras,
            )
        )
    return items


def save_dataset(items: Sequence[BenchmarkItem], path: str | Path) -> Path:
    return _write_jsonl((item.to_record() for item in items), Path(path))


# ---------------------------------------------------------------------------
# mistake corpora


def load_mistakes(path: str | Path) -> list[MistakeRecord]:
    """Load a mistake file, rejecting rows whose rationale answers the target.

    The schema carries no answer type, so validation infers one from the
    target's shape before applying the extraction rules.
    """
    from .evaluate import extract_and_normalize, infer_answer_type
    from .errors import NoAnswerFound, NotNumeric

    records: list[MistakeRecord] = []
    for line_no, obj in _iter_jsonl(Path(path)):
        record = MistakeRecord(
            item_id=str(_required(obj, "item_id", line_no)),
            question=str(_required(obj, "question", line_no)),
            reference=str(_required(obj, "reference", line_no)),
            target=str(_required(obj, "target", line_no)),
            incorrect_rationale=str(_required(obj, "incorrect_rationale", line_no)),
            error_causes=str(obj.get("error_causes", "")),
            error_keywords=list(obj["error_keywords"]) if "error_keywords" in obj else None,
            error_category=obj.get("error_category"),
        )
        answer_type = infer_answer_type(record.target)
        try:
            extracted = extract_and_normalize(record.incorrect_rationale, answer_type)
        except (NoAnswerFound, NotNumeric):
            extracted = None
        if extracted is not None and extracted == record.target:
            raise MalformedRecord(
                line_no, "incorrect_rationale resolves to the target answer"
            )
        records.append(record)
    return records


def save_mistakes(records: Sequence[MistakeRecord], path: str | Path) -> Path:
    return _write_jsonl((record.to_record() for record in records), Path(path))


# ---------------------------------------------------------------------------
# run results and manifests


def timestamp() -> str:
    """ISO-8601 UTC timestamp; honors SOURCE_DATE_EPOCH for reproducible runs."""
    pinned = os.environ.get("SOURCE_DATE_EPOCH")
    if pinned:
        moment = datetime.fromtimestamp(int(pinned), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.replace(microsecond=0).isoformat()


def load_results(path: str | Path) -> list[RunResult]:
    results = []
    for line_no, obj in _iter_jsonl(Path(path)):
        try:
            results.append(
                RunResult(
                    item_id=obj["item_id"],
                    strategy=obj["strategy"],
                    final_answer=obj["final_answer"],
                    correct=bool(obj["correct"]),
                    backend_calls=int(obj["backend_calls"]),
                    trace_path=obj.get("trace_path", ""),
                )
            )
        except KeyError as exc:
            raise MalformedRecord(line_no, f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise MalformedRecord(line_no, str(exc)) from None
    return results


def write_results(
    results: Sequence[RunResult],
    out_dir: str | Path,
    *,
    strategy: str = "",
    task: str = "",
    config: Mapping[str, Any] | None = None,
    dataset_digest: str = "",
    started_at: str | None = None,
) -> Path:
    """Write results.jsonl plus a manifest; returns the manifest path.

    Re-reading the results file reproduces the result list exactly. Paths in
    results stay relative to the run dir so runs compare byte-for-byte across
    output locations.
    """
    from .evaluate import mean_backend_calls, score_run

    run_dir = Path(out_dir)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {run_dir}: {exc}") from exc
    if not os.access(run_dir, os.W_OK):
        raise IoFailure(f"directory not writable: {run_dir}")

    results_file = _write_jsonl((r.to_record() for r in results), run_dir / "results.jsonl")

    finished = timestamp()
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "strategy": strategy or (results[0].strategy if results else ""),
        "task": task,
        "config": dict(config or {}),
        "dataset_hash": dataset_digest,
        "count": len(results),
        "accuracy": score_run(results) if results else None,
        "mean_backend_calls": mean_backend_calls(results) if results else None,
        "started_at": started_at if started_at is not None else finished,
        "finished_at": finished,
        "results_file": results_file.name,
    }
    manifest_path = run_dir / "manifest.json"
    try:
        manifest_path.write_text(
            json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise IoFailure(f"cannot write {manifest_path}: {exc}") from exc
    return manifest_path


def load_manifest(run_dir: str | Path) -> dict[str, Any]:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise MissingManifest(str(run_dir))
    return json.loads(path.read_text(encoding="utf-8"))
