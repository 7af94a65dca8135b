from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rethinklab.backends import GenParams, MockBackend, MockRule
from rethinklab.core import BenchmarkItem, RunResult, write_results
from rethinklab.errors import (
    ConfigError,
    EmptyBallot,
    EmptyRun,
    MissingManifest,
    NoAnswerFound,
    NotNumeric,
)
from rethinklab.evaluate import (
    ablation_run,
    extract_answer,
    infer_answer_type,
    majority_vote,
    mean_backend_calls,
    normalize_answer,
    render_report,
    render_tuning_report,
    score_run,
    sweep_k,
)
from rethinklab.strategies import RethinkConfig

from conftest import NATALIA_CORRECT, VERDICT_NO, VERDICT_YES


# ---------------------------------------------------------------------------
# extraction


def test_extract_numeric_last_number():
    assert extract_answer(NATALIA_CORRECT, "numeric") == "72"


def test_extract_numeric_commas():
    assert extract_answer("it had 5,217 feathers left", "numeric") == "5,217"


def test_extract_choice_parenthesized():
    assert extract_answer("The answer is (B).", "choice") == "B"


def test_extract_choice_bare_and_case():
    assert extract_answer("I pick option d", "choice") == "d"
    assert normalize_answer(extract_answer("I pick option d", "choice"), "choice") == "D"


def test_extract_boolean_last_token():
    assert extract_answer("Yes at first, but finally no.", "boolean") == "no"


def test_extract_freeform_trims():
    assert extract_answer("  The Cimarron meridian  ", "freeform") == "The Cimarron meridian"


def test_extract_empty_text():
    for answer_type in ("numeric", "choice", "boolean", "freeform"):
        with pytest.raises(NoAnswerFound):
            extract_answer("", answer_type)


def test_extract_numeric_none_present():
    with pytest.raises(NoAnswerFound):
        extract_answer("no digits in sight", "numeric")


def test_extract_unknown_type():
    with pytest.raises(ConfigError):
        extract_answer("x", "integer")


# ---------------------------------------------------------------------------
# normalization


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("5,217", "5217"),
        ("072.50", "72.5"),
        ("+5", "5"),
        ("-0", "0"),
        ("0.500", "0.5"),
        ("1e2", "100"),
        ("144", "144"),
    ],
)
def test_normalize_numeric(raw, expected):
    assert normalize_answer(raw, "numeric") == expected


def test_normalize_not_numeric():
    with pytest.raises(NotNumeric):
        normalize_answer("seventy-two", "numeric")


def test_normalize_choice_boolean_freeform():
    assert normalize_answer(" b ", "choice") == "B"
    assert normalize_answer(" YES ", "boolean") == "yes"
    assert normalize_answer("  text  ", "freeform") == "text"


@settings(max_examples=300, deadline=None)
@given(
    value=st.decimals(allow_nan=False, allow_infinity=False, places=4),
    commas=st.booleans(),
)
def test_normalize_numeric_idempotent(value, commas):
    raw = format(value, ",f") if commas else format(value, "f")
    once = normalize_answer(raw, "numeric")
    assert normalize_answer(once, "numeric") == once


@given(text=st.text(min_size=1).map(lambda t: " " + t + " "))
def test_normalize_freeform_idempotent(text):
    once = normalize_answer(text, "freeform")
    assert normalize_answer(once, "freeform") == once


def test_infer_answer_type():
    assert infer_answer_type("72") == "numeric"
    assert infer_answer_type("-3.5") == "numeric"
    assert infer_answer_type("yes") == "boolean"
    assert infer_answer_type("B") == "choice"
    assert infer_answer_type("The Cimarron meridian") == "freeform"


# ---------------------------------------------------------------------------
# voting and scoring


def vote_oracle(ballot):
    """Brute-force count-all vote, first-seen tie-break; no Counter involved."""
    candidates = []
    for answer in ballot:
        if answer not in candidates:
            candidates.append(answer)
    best = None
    for candidate in candidates:
        count = sum(1 for other in ballot if other == candidate)
        if best is None or count > best[1]:
            best = (candidate, count)
    return best[0]


def test_majority_vote_examples():
    assert majority_vote(["72", "72", "144"]) == "72"
    assert majority_vote(["72", "144"]) == "72"
    with pytest.raises(EmptyBallot):
        majority_vote([])


def test_majority_vote_matches_oracle_exhaustively():
    import itertools

    symbols = ("a", "b", "c")
    cases = 0
    for length in range(1, 6):
        for ballot in itertools.product(symbols, repeat=length):
            assert majority_vote(list(ballot)) == vote_oracle(list(ballot))
            cases += 1
    assert cases == 363  # 3^1 + ... + 3^5


def _results(correct: int, total: int):
    return [
        RunResult(
            item_id=f"q{i}",
            strategy="cot",
            final_answer="1",
            correct=i < correct,
            backend_calls=1 + (i % 3),
        )
        for i in range(total)
    ]


def recount_oracle(results):
    total = 0
    correct = 0
    for result in results:
        total += 1
        if result.correct:
            correct += 1
    return round(100.0 * correct / total, 2)


def test_score_run_examples():
    assert score_run(_results(13, 20)) == 65.00
    assert score_run(_results(0, 5)) == 0.00
    with pytest.raises(EmptyRun):
        score_run([])


def test_score_run_matches_recount_oracle():
    rng = random.Random(31)
    for _ in range(200):
        total = rng.randint(1, 40)
        results = [
            RunResult(
                item_id=f"q{i}",
                strategy="s",
                final_answer="a",
                correct=rng.random() < 0.5,
                backend_calls=1,
            )
            for i in range(total)
        ]
        assert score_run(results) == recount_oracle(results)


def test_score_run_bounds_and_monotone():
    assert 0.0 <= score_run(_results(3, 7)) <= 100.0
    assert score_run(_results(3, 10)) < score_run(_results(4, 10))


def test_mean_backend_calls():
    assert mean_backend_calls(_results(1, 3)) == round((1 + 2 + 3) / 3, 2)


# ---------------------------------------------------------------------------
# sweep and ablation


def _sweep_fixture():
    item = BenchmarkItem(
        id="sweep-1",
        task="toy",
        question="What is six plus six?",
        reference="Six plus six is 12. The answer is 12.",
        gold_answer="12",
        answer_type="numeric",
    )
    # Corrections improve stepwise: first try 10, second 11, then the right 12.
    backend = MockBackend(
        rules=[
            MockRule.of(["So the correct answer is: ", "First try gives 10."], "Second try gives 11."),
            MockRule.of(["So the correct answer is: ", "Second try gives 11."], "The answer is 12."),
            MockRule.of(["Do you make similar", "First try gives 10."], VERDICT_YES),
            MockRule.of(["Do you make similar", "Second try gives 11."], VERDICT_YES),
            MockRule.of(["Do you make similar", "The answer is 12."], VERDICT_NO),
            MockRule.of("Let's think step by step.", "First try gives 10."),
        ]
    )
    return item, backend


def test_sweep_k_accuracy_non_decreasing_then_flat(tmp_path):
    item, backend = _sweep_fixture()
    points = sweep_k(
        [item],
        backend,
        [],
        [1, 2, 3],
        params=GenParams(),
        base_config=RethinkConfig(seed=3),
        out_dir=tmp_path / "sweep",
    )
    assert [(k, acc) for k, acc, _ in points] == [(1, 0.0), (2, 100.0), (3, 100.0)]
    calls = [calls for _, _, calls in points]
    assert calls == [3.0, 5.0, 6.0]
    curve = (tmp_path / "sweep" / "curve.csv").read_text(encoding="utf-8")
    assert curve.splitlines()[0] == "k,accuracy,mean_backend_calls"
    assert "2,100.00,5.00" in curve
    # Every sweep point is a complete, reportable run dir.
    assert (tmp_path / "sweep" / "k1" / "manifest.json").exists()
    assert (tmp_path / "sweep" / "k1" / "traces").exists()


def test_sweep_k_single_point():
    item, backend = _sweep_fixture()
    points = sweep_k([item], backend, [], [1], params=GenParams())
    assert len(points) == 1


def test_sweep_k_validates_ks():
    item, backend = _sweep_fixture()
    with pytest.raises(ConfigError):
        sweep_k([item], backend, [], [], params=GenParams())
    with pytest.raises(ConfigError):
        sweep_k([item], backend, [], [0, 1], params=GenParams())


def test_sweep_curve_renders_reported_growth(tmp_path):
    # Rendering fixture: a curve whose endpoint sits 8.11 points above k=1.
    lines = ["k,accuracy,mean_backend_calls", "1,57.02,2.41", "24,65.13,40.00"]
    path = tmp_path / "curve.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    rows = [line.split(",") for line in path.read_text(encoding="utf-8").splitlines()[1:]]
    growth = float(rows[-1][1]) - float(rows[0][1])
    assert round(growth, 2) == 8.11


def test_ablation_runs_per_subset(tmp_path):
    item, backend = _sweep_fixture()
    rows = ablation_run(
        [item],
        backend,
        [],
        [("CAT",), ("CAT", "DEM", "COR", "INC")],
        params=GenParams(),
        base_config=RethinkConfig(k=1),
        out_dir=tmp_path / "ablate",
    )
    assert [flags for flags, _ in rows] == [("CAT",), ("CAT", "DEM", "COR", "INC")]
    # Same verdict script either way: identical call-count formula, so both
    # runs completed with the same accuracy here.
    assert rows[0][1] == rows[1][1]
    table = (tmp_path / "ablate" / "ablation.md").read_text(encoding="utf-8")
    assert "| CAT | " in table
    assert "| CAT,DEM,COR,INC | " in table


def test_ablation_rejects_empty_subset():
    item, backend = _sweep_fixture()
    with pytest.raises(ConfigError):
        ablation_run([item], backend, [], [()], params=GenParams())
    with pytest.raises(ConfigError):
        ablation_run([item], backend, [], [], params=GenParams())
    with pytest.raises(ConfigError):
        ablation_run([item], backend, [], [("BOGUS",)], params=GenParams())


# ---------------------------------------------------------------------------
# reports


def _write_run(tmp_path, strategy, task, correct, total):
    results = [
        RunResult(
            item_id=f"{task}-{i}",
            strategy=strategy,
            final_answer="1",
            correct=i < correct,
            backend_calls=1,
        )
        for i in range(total)
    ]
    run_dir = tmp_path / f"{strategy}-{task}"
    write_results(results, run_dir, strategy=strategy, task=task)
    return run_dir


def test_render_report_single_run(tmp_path):
    run = _write_run(tmp_path, "cot", "gsm8k", 4, 5)
    table = render_report([run])
    assert "| Strategy | gsm8k |" in table
    assert "| cot | **80.00** |" in table


def test_render_report_bolds_best_per_column(tmp_path):
    runs = [
        _write_run(tmp_path, "cot", "gsm8k", 1, 4),
        _write_run(tmp_path, "self-rethinking", "gsm8k", 3, 4),
    ]
    table = render_report(runs)
    assert "| cot | 25.00 |" in table
    assert "| self-rethinking | **75.00** |" in table


def test_render_report_missing_manifest(tmp_path):
    with pytest.raises(MissingManifest):
        render_report([tmp_path / "nope"])


def test_render_report_is_pure_rerender(tmp_path):
    run = _write_run(tmp_path, "cot", "gsm8k", 2, 4)
    assert render_report([run]) == render_report([run])


def test_render_tuning_report_fixture():
    rows = [{"model": "flan-t5-large", "task": "gsm8k", "standard": 14.28, "mistake": 18.36}]
    table = render_tuning_report(rows)
    assert "| Standard finetuning | Mistake tuning |" in table
    assert "| flan-t5-large | gsm8k | 14.28 | **18.36** |" in table
