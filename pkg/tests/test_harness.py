from __future__ import annotations

import json

import pytest

from rethinklab.backends import MockBackend, MockRule
from rethinklab.errors import ConfigError
from rethinklab.harness import run_strategy
from rethinklab.strategies import RethinkConfig

from conftest import make_items


def per_item_backend(items, wrong_ids=()):
    rules = [MockRule.of("Do you make similar", "No.")]
    for item in items:
        answer = "999" if item.id in wrong_ids else item.gold_answer
        rules.append(MockRule.of(item.question, f"The total comes to {answer}."))
    return MockBackend(rules=rules)


def test_results_in_dataset_order_under_concurrency(params):
    items = make_items(16)
    backend = per_item_backend(items)
    results = run_strategy(items, backend, params, strategy="cot", max_concurrency=8)
    assert [r.item_id for r in results] == [item.id for item in items]
    assert all(r.correct for r in results)


def test_trace_files_written_with_relative_paths(tmp_path, params):
    items = make_items(3)
    backend = per_item_backend(items)
    results = run_strategy(
        items, backend, params, strategy="cot", out_dir=tmp_path / "run"
    )
    for result in results:
        assert not result.trace_path.startswith("/")
        trace_file = tmp_path / "run" / result.trace_path
        assert trace_file.exists()
        trace = json.loads(trace_file.read_text(encoding="utf-8"))
        assert trace["schema"] == "trace-v1"
        assert trace["item_id"] == result.item_id


def test_incorrect_and_abstaining_items_score_incorrect(params):
    items = make_items(2)
    backend = MockBackend(
        rules=[
            MockRule.of(items[0].question, "The total comes to 999."),
            MockRule.of(items[1].question, "I am not sure."),
        ]
    )
    results = run_strategy(items, backend, params, strategy="cot")
    assert [r.correct for r in results] == [False, False]
    assert results[1].final_answer == ""


def test_self_rethinking_run_uses_config(tmp_path, params, natalia_mistake):
    items = make_items(2)
    backend = MockBackend(
        rules=[
            MockRule.of("So the correct answer is: ", "Corrected to 999."),
            MockRule.of("Do you make similar", "Yes, I make a mistake."),
            MockRule.of("Let's think", "First guess is 1."),
        ]
    )
    results = run_strategy(
        items,
        backend,
        params,
        strategy="self-rethinking",
        mistakes=[natalia_mistake],
        rethink_config=RethinkConfig(k=2),
    )
    assert all(r.backend_calls == 5 for r in results)  # 1 + 2k with always-yes


def test_unknown_strategy_rejected(params):
    with pytest.raises(ConfigError):
        run_strategy(make_items(1), MockBackend(default="x"), params, strategy="debate")


def test_max_concurrency_validated(params):
    with pytest.raises(ConfigError):
        run_strategy(
            make_items(1), MockBackend(default="x"), params, strategy="cot", max_concurrency=0
        )


def test_trace_filenames_safe_for_odd_ids(tmp_path, params):
    from rethinklab.core import BenchmarkItem

    item = BenchmarkItem(
        id="task/with:odd chars",
        task="toy",
        question="What is 1 plus 1?",
        reference="The answer is 2.",
        gold_answer="2",
        answer_type="numeric",
    )
    backend = MockBackend(default="The answer is 2.")
    results = run_strategy([item], backend, params, strategy="cot", out_dir=tmp_path)
    assert (tmp_path / results[0].trace_path).exists()
    assert "/" not in results[0].trace_path.removeprefix("traces/")
