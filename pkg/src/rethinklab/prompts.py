"""Byte-exact assembly of every prompt used by the strategies and pipelines.

All renderers are pure: identical inputs produce byte-identical output, which
both the replay cache and the golden tests rely on. Whitespace discipline:
single "\\n" between labeled lines, "\\n\\n" between few-shot blocks, no
trailing newline. Placeholder substitution is plain string replacement, so
braces inside questions or rationales never break rendering.

Templates are compiled in and versioned; ``dump_templates`` (surfaced as the
``dump-prompts`` CLI command) emits all of them for audit. The two *_alt
variants are retained alternatives for the rethink question and correction
cue; the defaults follow the conversational transcript shape.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .errors import EmptyField, EmptyKeywords, EmptyOutput

if TYPE_CHECKING:  # pragma: no cover - types only
    from .core import BenchmarkItem, MistakeRecord

PROMPT_VERSION = "1"

# Exemplar-block component flags: category name, demonstration (the written
# reason for the mistake), correct example, incorrect example.
COMPONENT_FLAGS = ("CAT", "DEM", "COR", "INC")

TEMPLATES: dict[str, str] = {
    "standard": "Question: {question}\nAnswer:",
    "cot": "Question: {question}\nAnswer: Let's think step by step.",
    "fewshot_demo": "Question: {question}\nAnswer: {reference}\n\n",
    "rethink": (
        "Question: {question}\n"
        "Your output: {model_output}\n"
        "Do you make similar mistakes with the following examples:{examples}"
    ),
    "rethink_alt": "Do you make the same mistakes in Mistakes?",
    "exemplar_entry": "###Error Type {index}: {body}",
    "correction": "So the correct answer is: ",
    "correction_alt": "So the final answer is: ",
    "introspection": (
        "Question: {question}\n"
        "Correct reference: {reference}\n"
        "Incorrect rationale: {incorrect_rationale}\n"
        "Explain the mistake in exactly three numbered parts:\n"
        "1. State the correct answer and the answer given by the incorrect rationale.\n"
        "2. Explain why the given answer is wrong.\n"
        "3. Name the type of the incorrect answer."
    ),
    "cluster": (
        "Please generate several keywords to cover all the following error types, "
        "and assign each keyword to an error type category. "
        "Output in the following format:\n"
        "[Specific Error Category1]: [keyword1], [keyword2]\n"
        "[Specific Error Category2]: [keyword3], [keyword4]\n"
        "Keywords: {keywords}"
    ),
    "keyword_extraction": "List 1-5 short keywords naming the error in: {error_causes}",
    "feedback": (
        "Question: {question}\n"
        "Your answer: {model_output}\n"
        "Review your answer for mistakes. If it is correct, reply exactly "
        '"No issues found." Otherwise describe what is wrong.'
    ),
    "refine": (
        "Question: {question}\n"
        "Your answer: {model_output}\n"
        "Feedback: {feedback}\n"
        "Rewrite your answer applying the feedback."
    ),
}

# Feedback reply that stops self-refine early.
NO_ISSUES_SENTINEL = "No issues found."


def _fill(template_name: str, **values: str) -> str:
    text = TEMPLATES[template_name]
    for key, value in values.items():
        text = text.replace("{" + key + "}", value)
    return text


@dataclass(frozen=True)
class ExemplarEntry:
    """One prior-mistake exemplar; fields render only when their flag is on."""

    category_name: str | None = None
    demonstration: str | None = None
    correct_example: str | None = None
    incorrect_example: str | None = None


@dataclass(frozen=True)
class ExemplarBlock:
    """The set of prior-mistake examples shown during the rethink stage.

    ``components`` selects which entry fields render: CAT (type name), DEM
    (reason for the mistake), COR / INC (correct and incorrect rationales).
    Adding a flag only ever adds text to the rendering.
    """

    entries: tuple[ExemplarEntry, ...] = ()
    components: frozenset[str] = field(default_factory=lambda: frozenset(COMPONENT_FLAGS))

    def __post_init__(self):
        unknown = set(self.components) - set(COMPONENT_FLAGS)
        if unknown:
            raise ValueError(f"unknown exemplar components: {sorted(unknown)}")

    def render(self) -> str:
        lines = []
        for index, entry in enumerate(self.entries, start=1):
            head = entry.category_name if "CAT" in self.components else None
            tail_parts = []
            if "DEM" in self.components and entry.demonstration:
                tail_parts.append(entry.demonstration)
            if "COR" in self.components and entry.correct_example:
                tail_parts.append(f"Correct example: {entry.correct_example}")
            if "INC" in self.components and entry.incorrect_example:
                tail_parts.append(f"Incorrect example: {entry.incorrect_example}")
            tail = " ".join(tail_parts)
            if head and tail:
                body = f"{head}: {tail}"
            else:
                body = head or tail
            lines.append(_fill("exemplar_entry", index=str(index), body=body).rstrip())
        return "\n".join(lines)


def build_exemplar_block(
    mistakes: Sequence["MistakeRecord"],
    *,
    components: Iterable[str] = COMPONENT_FLAGS,
    count: int = 4,
    seed: int = 0,
    salt: str = "",
) -> ExemplarBlock:
    """Sample up to ``count`` mistakes without replacement into an ExemplarBlock.

    Sampling is seeded (``salt`` folds in, e.g., the item id) so exemplar
    choice is stable regardless of worker scheduling.
    """
    if count < 1:
        raise ValueError("exemplar count must be >= 1")
    pool = list(mistakes)
    if len(pool) > count:
        rng = random.Random(f"{seed}:{salt}")
        pool = rng.sample(pool, count)
    entries = tuple(
        ExemplarEntry(
            category_name=m.error_category,
            demonstration=m.error_causes or None,
            correct_example=m.reference or None,
            incorrect_example=m.incorrect_rationale or None,
        )
        for m in pool
    )
    return ExemplarBlock(entries=entries, components=frozenset(components))


# ---------------------------------------------------------------------------
# renderers


def render_standard_prompt(item: "BenchmarkItem") -> str:
    return _fill("standard", question=item.question)


def render_cot_prompt(
    item: "BenchmarkItem", fewshot: Sequence[tuple[str, str]] | None = None
) -> str:
    """Step-by-step prompt, optionally preceded by demonstration blocks.

    Each demonstration renders as "Question: {q}\\nAnswer: {reference}" and is
    separated from what follows by a blank line, in list order.
    """
    parts = []
    for question, reference in fewshot or ():
        parts.append(_fill("fewshot_demo", question=question, reference=reference))
    parts.append(_fill("cot", question=item.question))
    return "".join(parts)


def render_rethink_prompt(item: "BenchmarkItem", model_output: str, block: ExemplarBlock) -> str:
    """The rethink-stage prompt: question, current output, exemplar section.

    The exemplar section is separated from the question sentence by a single
    space and omitted entirely (along with the space) when the block renders
    empty.
    """
    if not model_output:
        raise EmptyOutput("rethink prompt requires a nonempty model output")
    rendered = block.render()
    examples = f" {rendered}" if rendered else ""
    return _fill(
        "rethink", question=item.question, model_output=model_output, examples=examples
    )


def render_correction_prompt() -> str:
    return TEMPLATES["correction"]


def render_introspection_prompt(question: str, reference: str, incorrect_rationale: str) -> str:
    """Ask the backend why an incorrect rationale is wrong, in three parts."""
    for name, value in (
        ("question", question),
        ("reference", reference),
        ("incorrect_rationale", incorrect_rationale),
    ):
        if not value:
            raise EmptyField(name)
    return _fill(
        "introspection",
        question=question,
        reference=reference,
        incorrect_rationale=incorrect_rationale,
    )


def render_cluster_prompt(keywords: Sequence[str]) -> str:
    """The clustering request, with the comma-joined keyword list filled in."""
    if not keywords:
        raise EmptyKeywords("cluster prompt requires at least one keyword")
    return _fill("cluster", keywords=", ".join(keywords))


def render_keyword_prompt(error_causes: str) -> str:
    if not error_causes:
        raise EmptyField("error_causes")
    return _fill("keyword_extraction", error_causes=error_causes)


def render_feedback_prompt(item: "BenchmarkItem", model_output: str) -> str:
    if not model_output:
        raise EmptyOutput("feedback prompt requires a nonempty model output")
    return _fill("feedback", question=item.question, model_output=model_output)


def render_refine_prompt(item: "BenchmarkItem", model_output: str, feedback: str) -> str:
    if not model_output:
        raise EmptyOutput("refine prompt requires a nonempty model output")
    if not feedback:
        raise EmptyField("feedback")
    return _fill(
        "refine", question=item.question, model_output=model_output, feedback=feedback
    )


def dump_templates() -> str:
    """All compiled-in templates, labeled, for the dump-prompts command."""
    sections = [f"prompt templates, version {PROMPT_VERSION}"]
    for name, text in TEMPLATES.items():
        sections.append(f"--- {name} ---\n{text}")
    return "\n\n".join(sections)
