from __future__ import annotations

import json

import pytest

from rethinklab.core import (
    RunResult,
    content_hash,
    dataset_hash,
    load_dataset,
    load_manifest,
    load_mistakes,
    load_results,
    save_dataset,
    save_mistakes,
    timestamp,
    write_results,
)
from rethinklab.errors import DuplicateId, IoFailure, MalformedRecord, MissingManifest

from conftest import NATALIA_INCORRECT, NATALIA_QUESTION

NATALIA_RECORD = {
    "id": "gsm8k-natalia",
    "task": "gsm8k",
    "question": NATALIA_QUESTION,
    "reference": "Natalia sold 48/2 = 24 clips in May. Natalia sold 48+24 = 72 clips altogether in April and May.",
    "answer": "72",
    "answer_type": "numeric",
}


def write_lines(path, *objs):
    path.write_text("".join(json.dumps(o, ensure_ascii=False) + "\n" for o in objs), encoding="utf-8")
    return path


def test_load_dataset_natalia(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", NATALIA_RECORD)
    items = load_dataset(path)
    assert len(items) == 1
    assert items[0].answer_type == "numeric"
    assert items[0].gold_answer == "72"
    assert items[0].question == NATALIA_QUESTION


def test_load_dataset_empty_file(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text("", encoding="utf-8")
    assert load_dataset(path) == []


def test_load_dataset_duplicate_id(tmp_path):
    record = dict(NATALIA_RECORD, id="q1")
    path = write_lines(tmp_path / "d.jsonl", record, dict(record, answer="73"))
    with pytest.raises(DuplicateId) as exc:
        load_dataset(path)
    assert exc.value.item_id == "q1"


def test_load_dataset_invalid_json_reports_line(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps(NATALIA_RECORD) + "\n{bad json\n", encoding="utf-8")
    with pytest.raises(MalformedRecord) as exc:
        load_dataset(path)
    assert exc.value.line_no == 2


def test_load_dataset_missing_field(tmp_path):
    record = {k: v for k, v in NATALIA_RECORD.items() if k != "question"}
    path = write_lines(tmp_path / "d.jsonl", record)
    with pytest.raises(MalformedRecord):
        load_dataset(path)


def test_load_dataset_rejects_unknown_answer_type(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", dict(NATALIA_RECORD, answer_type="integer"))
    with pytest.raises(MalformedRecord):
        load_dataset(path)


def test_load_dataset_rejects_bad_numeric_gold(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", dict(NATALIA_RECORD, answer="seventy-two"))
    with pytest.raises(MalformedRecord):
        load_dataset(path)


def test_load_normalizes_gold_once(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", dict(NATALIA_RECORD, answer="072.50"))
    assert load_dataset(path)[0].gold_answer == "72.5"


def test_choice_item_validation(tmp_path):
    record = dict(
        NATALIA_RECORD,
        answer_type="choice",
        answer="b",
        choices=[["A", "24"], ["B", "72"]],
    )
    items = load_dataset(write_lines(tmp_path / "d.jsonl", record))
    assert items[0].gold_answer == "B"
    assert items[0].choices == (("A", "24"), ("B", "72"))

    bad = dict(record, answer="C")
    with pytest.raises(MalformedRecord):
        load_dataset(write_lines(tmp_path / "bad.jsonl", bad))
    with pytest.raises(MalformedRecord):
        load_dataset(write_lines(tmp_path / "none.jsonl", dict(record, choices=[])))


def test_unknown_fields_preserved_on_round_trip(tmp_path):
    record = dict(NATALIA_RECORD, split="train", difficulty=3)
    items = load_dataset(write_lines(tmp_path / "d.jsonl", record))
    assert items[0].extras == {"split": "train", "difficulty": 3}
    out = save_dataset(items, tmp_path / "out.jsonl")
    reloaded = load_dataset(out)
    assert reloaded == items
    assert reloaded[0].extras == items[0].extras


def test_dataset_round_trip_identity(tmp_path):
    records = [NATALIA_RECORD, dict(NATALIA_RECORD, id="q2", answer="144")]
    items = load_dataset(write_lines(tmp_path / "d.jsonl", *records))
    assert load_dataset(save_dataset(items, tmp_path / "out.jsonl")) == items


def test_content_hash_stable_under_field_permutation():
    record = {"id": "x", "task": "t", "answer": "1"}
    permuted = {"answer": "1", "id": "x", "task": "t"}
    assert content_hash([record]) == content_hash([permuted])
    assert content_hash([record]) != content_hash([dict(record, answer="2")])


def test_dataset_hash_ignores_file_field_order(tmp_path):
    shuffled = {k: NATALIA_RECORD[k] for k in reversed(list(NATALIA_RECORD))}
    a = load_dataset(write_lines(tmp_path / "a.jsonl", NATALIA_RECORD))
    b = load_dataset(write_lines(tmp_path / "b.jsonl", shuffled))
    assert dataset_hash(a) == dataset_hash(b)


# ---------------------------------------------------------------------------
# mistakes


def test_mistakes_round_trip(tmp_path, natalia_mistake):
    path = save_mistakes([natalia_mistake], tmp_path / "m.jsonl")
    assert load_mistakes(path) == [natalia_mistake]


def test_load_mistakes_rejects_rationale_that_hits_target(tmp_path):
    record = {
        "item_id": "q1",
        "question": NATALIA_QUESTION,
        "reference": "ref",
        "target": "144",
        "incorrect_rationale": NATALIA_INCORRECT,  # extracts to 144
        "error_causes": "whatever",
    }
    path = tmp_path / "m.jsonl"
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    with pytest.raises(MalformedRecord):
        load_mistakes(path)


def test_mistake_optional_fields_round_trip(tmp_path, chicken_mistake):
    chicken_mistake.error_keywords = ["numerical"]
    chicken_mistake.error_category = "Numeric"
    path = save_mistakes([chicken_mistake], tmp_path / "m.jsonl")
    loaded = load_mistakes(path)[0]
    assert loaded.error_keywords == ["numerical"]
    assert loaded.error_category == "Numeric"


# ---------------------------------------------------------------------------
# results


def _results(n=3, correct=2):
    return [
        RunResult(
            item_id=f"q{i}",
            strategy="cot",
            final_answer="72",
            correct=i < correct,
            backend_calls=1,
        )
        for i in range(n)
    ]


def test_write_results_manifest_counts(tmp_path):
    manifest_path = write_results(_results(3), tmp_path / "run")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    assert manifest["count"] == 3
    assert manifest["results_file"] == "results.jsonl"
    assert load_manifest(tmp_path / "run") == manifest


def test_results_round_trip(tmp_path):
    results = _results(5, correct=4)
    write_results(results, tmp_path / "run")
    assert load_results(tmp_path / "run" / "results.jsonl") == results


def test_results_rewrite_is_byte_stable(tmp_path):
    results = _results(4, correct=2)
    write_results(results, tmp_path / "a")
    reloaded = load_results(tmp_path / "a" / "results.jsonl")
    write_results(reloaded, tmp_path / "b")
    assert (tmp_path / "a" / "results.jsonl").read_bytes() == (
        tmp_path / "b" / "results.jsonl"
    ).read_bytes()


def test_write_results_unwritable_dir(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("file, not dir", encoding="utf-8")
    with pytest.raises(IoFailure):
        write_results(_results(1), blocker / "run")


def test_backend_calls_invariant():
    with pytest.raises(ValueError):
        RunResult(item_id="q", strategy="cot", final_answer="1", correct=True, backend_calls=0)


def test_missing_manifest(tmp_path):
    with pytest.raises(MissingManifest):
        load_manifest(tmp_path)


def test_timestamp_honors_source_date_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    assert timestamp() == "2023-11-14T22:13:20+00:00"
    monkeypatch.delenv("SOURCE_DATE_EPOCH")
    assert timestamp() != "2023-11-14T22:13:20+00:00"
