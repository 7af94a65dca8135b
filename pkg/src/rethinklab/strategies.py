"""The five reasoning procedures, each producing a full ReasoningTrace.

Every strategy performs a bounded, config-derivable number of backend calls:
standard and step-by-step prompting make 1, consistency voting makes n,
self-refine at most 1 + 2m, and self-rethinking at most 1 + 2k. A trace
records one stage per completion, so backend_calls always equals the stage
count.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .backends import Backend, GenParams
from .core import BenchmarkItem, MistakeRecord
from .errors import ConfigError, NoAnswerFound, NotNumeric
from .evaluate import extract_and_normalize, majority_vote
from .prompts import (
    COMPONENT_FLAGS,
    NO_ISSUES_SENTINEL,
    build_exemplar_block,
    render_correction_prompt,
    render_cot_prompt,
    render_feedback_prompt,
    render_refine_prompt,
    render_rethink_prompt,
    render_standard_prompt,
)

TRACE_SCHEMA = "trace-v1"

STAGE_KINDS = ("cot", "rethink", "correction", "feedback", "refine", "sample")
VERDICTS = ("yes", "no", "unparseable")

Fewshot = Sequence[tuple[str, str]]


@dataclass(frozen=True)
class Stage:
    kind: str
    prompt: str
    completion: str


@dataclass(frozen=True)
class VerdictEntry:
    round: int
    verdict: str


@dataclass
class ReasoningTrace:
    """Transcript of one strategy run: stages, verdicts, and the extract."""

    item_id: str
    strategy: str
    stages: list[Stage] = field(default_factory=list)
    verdicts: list[VerdictEntry] = field(default_factory=list)
    corrections: int = 0
    backend_calls: int = 0
    final_rationale: str = ""
    final_answer: str = ""

    def to_json(self) -> str:
        payload = {
            "schema": TRACE_SCHEMA,
            "item_id": self.item_id,
            "strategy": self.strategy,
            "stages": [vars(s) for s in self.stages],
            "verdicts": [vars(v) for v in self.verdicts],
            "corrections": self.corrections,
            "backend_calls": self.backend_calls,
            "final_rationale": self.final_rationale,
            "final_answer": self.final_answer,
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ReasoningTrace":
        data = json.loads(text)
        return cls(
            item_id=data["item_id"],
            strategy=data["strategy"],
            stages=[Stage(**s) for s in data["stages"]],
            verdicts=[VerdictEntry(**v) for v in data["verdicts"]],
            corrections=data["corrections"],
            backend_calls=data["backend_calls"],
            final_rationale=data["final_rationale"],
            final_answer=data["final_answer"],
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path


@dataclass(frozen=True)
class RethinkConfig:
    """Budget and exemplar settings for self-rethinking."""

    k: int = 1
    exemplar_components: frozenset[str] = field(
        default_factory=lambda: frozenset(COMPONENT_FLAGS)
    )
    exemplar_count: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("rethink budget k must be >= 1")
        if self.exemplar_count < 1:
            raise ConfigError("exemplar_count must be >= 1")
        unknown = set(self.exemplar_components) - set(COMPONENT_FLAGS)
        if unknown:
            raise ConfigError(f"unknown exemplar components: {sorted(unknown)}")


def parse_verdict(text: str) -> str:
    """Leading-token verdict parse, case-insensitive: yes / no / unparseable."""
    stripped = text.lstrip()
    token = ""
    for char in stripped:
        if char.isalpha():
            token += char
        else:
            break
    token = token.lower()
    if token == "yes":
        return "yes"
    if token == "no":
        return "no"
    return "unparseable"


def _safe_extract(text: str, answer_type: str) -> str:
    """Abstention policy: unextractable answers become "" and score incorrect."""
    try:
        return extract_and_normalize(text, answer_type)
    except (NoAnswerFound, NotNumeric):
        return ""


def _single(backend: Backend, prompt: str, params: GenParams) -> str:
    completions = backend.generate(prompt, params)
    return completions[0].text


def run_standard(item: BenchmarkItem, backend: Backend, params: GenParams) -> ReasoningTrace:
    """Plain question/answer prompting: one call, no rationale elicitation."""
    prompt = render_standard_prompt(item)
    completion = _single(backend, prompt, params)
    return ReasoningTrace(
        item_id=item.id,
        strategy="standard",
        stages=[Stage("cot", prompt, completion)],
        backend_calls=1,
        final_rationale=completion,
        final_answer=_safe_extract(completion, item.answer_type),
    )


def run_cot(
    item: BenchmarkItem,
    backend: Backend,
    params: GenParams,
    fewshot: Fewshot | None = None,
) -> ReasoningTrace:
    """Single step-by-step completion, optionally few-shot."""
    prompt = render_cot_prompt(item, fewshot)
    completion = _single(backend, prompt, params)
    return ReasoningTrace(
        item_id=item.id,
        strategy="cot",
        stages=[Stage("cot", prompt, completion)],
        backend_calls=1,
        final_rationale=completion,
        final_answer=_safe_extract(completion, item.answer_type),
    )


def run_self_consistency(
    item: BenchmarkItem,
    backend: Backend,
    params: GenParams,
    n: int = 3,
    fewshot: Fewshot | None = None,
) -> ReasoningTrace:
    """Sample n step-by-step paths and adopt the modal extracted answer.

    Abstaining samples do not vote; if every sample abstains the run abstains.
    The final rationale is the first sample that produced the winning answer.
    """
    if n < 1:
        raise ConfigError("self-consistency sample count n must be >= 1")
    prompt = render_cot_prompt(item, fewshot)
    sampled = backend.generate(prompt, dataclasses.replace(params, n_samples=n))
    stages = [Stage("sample", prompt, c.text) for c in sampled]
    answers = [_safe_extract(c.text, item.answer_type) for c in sampled]
    ballot = [a for a in answers if a]
    final_answer = majority_vote(ballot) if ballot else ""
    final_rationale = sampled[0].text
    if final_answer:
        final_rationale = next(
            c.text for c, a in zip(sampled, answers) if a == final_answer
        )
    return ReasoningTrace(
        item_id=item.id,
        strategy="sc",
        stages=stages,
        backend_calls=n,
        final_rationale=final_rationale,
        final_answer=final_answer,
    )


def run_self_refine(
    item: BenchmarkItem,
    backend: Backend,
    params: GenParams,
    m: int = 1,
) -> ReasoningTrace:
    """Initial answer, then up to m feedback/refine rounds on its own output.

    Feedback exactly equal to the no-issues sentinel stops refinement early,
    skipping that round's refine call.
    """
    if m < 1:
        raise ConfigError("self-refine round count m must be >= 1")
    cot_prompt = render_cot_prompt(item)
    current = _single(backend, cot_prompt, params)
    stages = [Stage("cot", cot_prompt, current)]
    for _ in range(m):
        if not current:
            break
        feedback_prompt = render_feedback_prompt(item, current)
        feedback = _single(backend, feedback_prompt, params)
        stages.append(Stage("feedback", feedback_prompt, feedback))
        if feedback.strip() == NO_ISSUES_SENTINEL:
            break
        refine_prompt = render_refine_prompt(item, current, feedback)
        current = _single(backend, refine_prompt, params)
        stages.append(Stage("refine", refine_prompt, current))
    return ReasoningTrace(
        item_id=item.id,
        strategy="self-refine",
        stages=stages,
        backend_calls=len(stages),
        final_rationale=current,
        final_answer=_safe_extract(current, item.answer_type),
    )


def run_self_rethinking(
    item: BenchmarkItem,
    backend: Backend,
    params: GenParams,
    mistakes: Sequence[MistakeRecord] = (),
    config: RethinkConfig | None = None,
    fewshot: Fewshot | None = None,
) -> ReasoningTrace:
    """Initial step-by-step answer, then bounded mistake-aware rechecking.

    Loop: show the current output next to sampled prior-mistake exemplars and
    ask whether the same kind of mistake recurs. A "no" (or unintelligible)
    verdict keeps the current rationale and stops. A "yes" triggers one
    correction call, appended to the full prior exchange, and the new
    rationale is rechecked, until the correction budget k is spent, at which
    point the last correction is adopted as-is.

    Unparseable verdicts never spend correction budget; they are recorded on
    the trace and treated as "no".
    """
    cfg = config if config is not None else RethinkConfig()
    block = build_exemplar_block(
        mistakes,
        components=cfg.exemplar_components,
        count=cfg.exemplar_count,
        seed=cfg.seed,
        salt=item.id,
    )

    cot_prompt = render_cot_prompt(item, fewshot)
    current = _single(backend, cot_prompt, params)
    stages = [Stage("cot", cot_prompt, current)]
    verdicts: list[VerdictEntry] = []
    corrections = 0

    round_no = 0
    while current:
        round_no += 1
        rethink_prompt = render_rethink_prompt(item, current, block)
        reply = _single(backend, rethink_prompt, params)
        stages.append(Stage("rethink", rethink_prompt, reply))
        verdict = parse_verdict(reply)
        verdicts.append(VerdictEntry(round=round_no, verdict=verdict))
        if verdict != "yes":
            break
        # Correction continues the conversation: prior exchange plus the cue.
        correction_prompt = f"{rethink_prompt}\n{reply}\n{render_correction_prompt()}"
        current = _single(backend, correction_prompt, params)
        stages.append(Stage("correction", correction_prompt, current))
        corrections += 1
        if corrections >= cfg.k:
            break

    return ReasoningTrace(
        item_id=item.id,
        strategy="self-rethinking",
        stages=stages,
        verdicts=verdicts,
        corrections=corrections,
        backend_calls=len(stages),
        final_rationale=current,
        final_answer=_safe_extract(current, item.answer_type),
    )
