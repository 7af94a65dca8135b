"""Shared fixtures: the clips problem transcript and small scripted backends."""

from __future__ import annotations

import pytest

from rethinklab.backends import GenParams, MockBackend, MockRule
from rethinklab.core import BenchmarkItem, MistakeRecord

NATALIA_QUESTION = (
    "Natalia sold clips to 48 of her friends in April, and then she sold half as "
    "many clips in May. How many clips did Natalia sell altogether in April and May?"
)
NATALIA_CORRECT = (
    "Natalia sold 48/2 = 24 clips in May. "
    "Natalia sold 48+24 = 72 clips altogether in April and May."
)
NATALIA_INCORRECT = (
    "Natalia sold 48 * 2 = 96 clips in May. "
    "Natalia sold 48+96 = 144 clips altogether in April and May."
)

CHICKEN_QUESTION = (
    "The chicken crossed the road to get to the other side twice for the thrill of "
    "it. The first time, it had to dodge 23 speeding cars. The second time, a person "
    "tried to catch it and accidentally pulled out twice as many feathers as the "
    "number of cars the chicken had dodged. The chicken had 5263 feathers before its "
    "thrill-seeking road crossings. How many feathers did it have afterward?"
)
CHICKEN_CORRECT = (
    "The chicken lost 23 * 2 = <<23*2=46>>46 feathers on its second road crossing. "
    "Thus, it had 5263 - 46 = <<5263-46=5217>>5217 feathers after crossing the road twice."
)
CHICKEN_INCORRECT = (
    "The chicken lost 23 * 2 = <<23*2=46>>46 feathers on its second road crossing. "
    "Thus, it had 5263 - 46 = <<5263-52=5211>>5211 feathers after crossing the road twice."
)
CHICKEN_INTROSPECTION = (
    "1. The correct answer is 5217, while your answer is 5211. "
    "2. Your answer is wrong because you subtracted 52 instead of 46. "
    "3. The type name of the incorrect answer is numerical."
)

VERDICT_YES = "Yes, I make a mistake."
VERDICT_NO = "No."


@pytest.fixture
def natalia() -> BenchmarkItem:
    return BenchmarkItem(
        id="gsm8k-natalia",
        task="gsm8k",
        question=NATALIA_QUESTION,
        reference=NATALIA_CORRECT,
        gold_answer="72",
        answer_type="numeric",
    )


@pytest.fixture
def natalia_mistake(natalia) -> MistakeRecord:
    return MistakeRecord(
        item_id=natalia.id,
        question=natalia.question,
        reference=natalia.reference,
        target=natalia.gold_answer,
        incorrect_rationale=NATALIA_INCORRECT,
        error_causes="Mistaking multiplication for division led to an overestimate.",
        error_keywords=["misread operation"],
        error_category="Misapplication of Algebraic Identities",
    )


@pytest.fixture
def chicken() -> BenchmarkItem:
    return BenchmarkItem(
        id="gsm8k-chicken",
        task="gsm8k",
        question=CHICKEN_QUESTION,
        reference=CHICKEN_CORRECT,
        gold_answer="5217",
        answer_type="numeric",
    )


@pytest.fixture
def chicken_mistake(chicken) -> MistakeRecord:
    return MistakeRecord(
        item_id=chicken.id,
        question=chicken.question,
        reference=chicken.reference,
        target=chicken.gold_answer,
        incorrect_rationale=CHICKEN_INCORRECT,
    )


@pytest.fixture
def params() -> GenParams:
    return GenParams()


def queue_backend(*replies: str) -> MockBackend:
    return MockBackend(queue=replies)


def rule_backend(*rules: tuple) -> MockBackend:
    return MockBackend(rules=[MockRule.of(contains, response) for contains, response in rules])


def make_items(count: int, *, task: str = "toy") -> list[BenchmarkItem]:
    """Synthetic numeric items: 'What is i plus i?' with gold 2i."""
    return [
        BenchmarkItem(
            id=f"{task}-{i}",
            task=task,
            question=f"What is {i} plus {i}?",
            reference=f"{i} plus {i} makes {2 * i}. The answer is {2 * i}.",
            gold_answer=str(2 * i),
            answer_type="numeric",
        )
        for i in range(1, count + 1)
    ]
