"""Answer extraction, normalization, scoring, sweeps, ablations, and reports.

Extraction follows a "last candidate wins" rule: step-by-step rationales state
their conclusion last, so the final number / label / yes-no token in the text
is taken as the answer. The rules live here, and only here, so alternates can
be swapped without touching the strategies.
"""

from __future__ import annotations

import dataclasses
import re
from collections import Counter
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

from .errors import (
    ConfigError,
    EmptyBallot,
    EmptyRun,
    MissingManifest,
    NoAnswerFound,
    NotNumeric,
)

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, types only
    from .backends import Backend, GenParams
    from .core import BenchmarkItem, MistakeRecord, RunResult
    from .strategies import RethinkConfig

ANSWER_TYPES = ("numeric", "choice", "boolean", "freeform")

# Comma-grouped or plain integers, optional sign and fraction. The sign must
# be adjacent to the digits, so "5263 - 46" yields 46, not -46.
_NUMBER_RE = re.compile(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?")
# A choice label is a standalone letter A-E, bare or parenthesized.
_CHOICE_RE = re.compile(r"\(([A-Ea-e])\)|(?<![A-Za-z])([A-Ea-e])(?![A-Za-z])")
_BOOLEAN_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def extract_answer(text: str, answer_type: str) -> str:
    """Pull the final answer of the given type out of free text.

    numeric  -> last number token (sign and decimal point allowed, commas kept
                for normalization to strip)
    choice   -> last standalone A-E label, bare or parenthesized, any case
    boolean  -> last yes/no token, any case
    freeform -> the whole trimmed text

    Raises NoAnswerFound when no candidate exists.
    """
    if answer_type not in ANSWER_TYPES:
        raise ConfigError(f"unknown answer_type {answer_type!r}")
    if answer_type == "freeform":
        stripped = text.strip()
        if not stripped:
            raise NoAnswerFound("empty freeform text")
        return stripped
    if answer_type == "numeric":
        matches = _NUMBER_RE.findall(text)
        if not matches:
            raise NoAnswerFound("no number token in text")
        return matches[-1]
    if answer_type == "choice":
        hits = [(a or b) for a, b in _CHOICE_RE.findall(text)]
        if not hits:
            raise NoAnswerFound("no choice label in text")
        return hits[-1]
    hits = _BOOLEAN_RE.findall(text)
    if not hits:
        raise NoAnswerFound("no yes/no token in text")
    return hits[-1]


def normalize_answer(answer: str, answer_type: str) -> str:
    """Canonicalize an extracted answer; idempotent by construction.

    numeric answers become a canonical decimal string: commas removed, no
    leading zeros, no trailing fractional zeros, no explicit plus sign, and
    negative zero collapses to "0". Choice labels uppercase, booleans
    lowercase, freeform is trimmed.
    """
    if answer_type not in ANSWER_TYPES:
        raise ConfigError(f"unknown answer_type {answer_type!r}")
    if answer_type == "numeric":
        compact = answer.strip().replace(",", "")
        try:
            value = Decimal(compact)
        except (InvalidOperation, ValueError):
            raise NotNumeric(answer) from None
        if not value.is_finite():
            raise NotNumeric(answer)
        if value == 0:
            return "0"
        text = format(value, "f")
        if "." in text:
            text = text.rstrip("0").rstrip(".")
        return text
    if answer_type == "choice":
        return answer.strip().upper()
    if answer_type == "boolean":
        return answer.strip().lower()
    return answer.strip()


def extract_and_normalize(text: str, answer_type: str) -> str:
    return normalize_answer(extract_answer(text, answer_type), answer_type)


def infer_answer_type(target: str) -> str:
    """Best-effort answer type for records that do not carry one.

    Used when validating mistake files, whose schema stores only the target.
    """
    compact = target.strip().replace(",", "")
    try:
        Decimal(compact)
        return "numeric"
    except (InvalidOperation, ValueError):
        pass
    lowered = target.strip().lower()
    if lowered in ("yes", "no"):
        return "boolean"
    if re.fullmatch(r"[A-Ea-e]", target.strip()):
        return "choice"
    return "freeform"


def majority_vote(answers: Sequence[str]) -> str:
    """Modal answer; ties broken by earliest first occurrence in the ballot."""
    if not answers:
        raise EmptyBallot("no answers to vote over")
    counts = Counter(answers)
    best = max(counts.values())
    for answer in answers:
        if counts[answer] == best:
            return answer
    raise AssertionError("unreachable")  # pragma: no cover


def score_run(results: Sequence["RunResult"]) -> float:
    """Accuracy as a percentage, rounded to two decimals."""
    if not results:
        raise EmptyRun("no results to score")
    correct = sum(1 for r in results if r.correct)
    return round(100.0 * correct / len(results), 2)


def mean_backend_calls(results: Sequence["RunResult"]) -> float:
    if not results:
        raise EmptyRun("no results to average")
    return round(sum(r.backend_calls for r in results) / len(results), 2)


# ---------------------------------------------------------------------------
# sweeps and ablations


def sweep_k(
    dataset: Sequence["BenchmarkItem"],
    backend: "Backend",
    mistakes: Sequence["MistakeRecord"],
    ks: Sequence[int],
    *,
    params: "GenParams",
    base_config: "RethinkConfig | None" = None,
    fewshot: Sequence[tuple[str, str]] | None = None,
    out_dir: str | Path | None = None,
    max_concurrency: int = 4,
) -> list[tuple[int, float, float]]:
    """Run one full self-rethinking pass per rethink budget k.

    All points share the seed carried by ``base_config`` so only k varies.
    Points run sequentially to keep replay-cache behavior reproducible; each
    point is internally item-parallel. Returns (k, accuracy, mean_calls)
    tuples and, when ``out_dir`` is given, writes per-k run dirs plus a
    ``curve.csv`` with one line per point.
    """
    from .core import write_results  # local import cycle guard
    from .harness import run_strategy  # local import: harness depends on this module
    from .strategies import RethinkConfig

    if not ks:
        raise ConfigError("sweep requires at least one k")
    if any(k < 1 for k in ks):
        raise ConfigError("every swept k must be >= 1")
    cfg = base_config if base_config is not None else RethinkConfig()

    points: list[tuple[int, float, float]] = []
    root = Path(out_dir) if out_dir is not None else None
    for k in ks:
        run_dir = root / f"k{k}" if root is not None else None
        results = run_strategy(
            dataset,
            backend,
            params,
            strategy="self-rethinking",
            mistakes=mistakes,
            rethink_config=dataclasses.replace(cfg, k=k),
            fewshot=fewshot,
            out_dir=run_dir,
            max_concurrency=max_concurrency,
        )
        if run_dir is not None:
            write_results(
                results,
                run_dir,
                strategy="self-rethinking",
                task=dataset[0].task if dataset else "",
                config={"k": k, "seed": cfg.seed},
            )
        points.append((k, score_run(results), mean_backend_calls(results)))

    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        lines = ["k,accuracy,mean_backend_calls"]
        lines += [f"{k},{acc:.2f},{calls:.2f}" for k, acc, calls in points]
        (root / "curve.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return points


def ablation_run(
    dataset: Sequence["BenchmarkItem"],
    backend: "Backend",
    mistakes: Sequence["MistakeRecord"],
    component_sets: Sequence[Iterable[str]],
    *,
    params: "GenParams",
    base_config: "RethinkConfig | None" = None,
    out_dir: str | Path | None = None,
    max_concurrency: int = 4,
) -> list[tuple[tuple[str, ...], float]]:
    """One self-rethinking run per exemplar-component subset.

    Each subset filters which fields of the exemplar block are shown during
    the rethink stage. Subsets must be nonempty.
    """
    from .core import write_results  # local import cycle guard
    from .harness import run_strategy  # local import: harness depends on this module
    from .prompts import COMPONENT_FLAGS
    from .strategies import RethinkConfig

    if not component_sets:
        raise ConfigError("ablation requires at least one component subset")
    normalized: list[tuple[str, ...]] = []
    for subset in component_sets:
        flags = tuple(subset)
        if not flags:
            raise ConfigError("ablation component subsets must be nonempty")
        unknown = [f for f in flags if f not in COMPONENT_FLAGS]
        if unknown:
            raise ConfigError(f"unknown exemplar components: {unknown}")
        normalized.append(flags)
    cfg = base_config if base_config is not None else RethinkConfig()

    rows: list[tuple[tuple[str, ...], float]] = []
    root = Path(out_dir) if out_dir is not None else None
    for flags in normalized:
        run_dir = root / "_".join(f.lower() for f in flags) if root is not None else None
        results = run_strategy(
            dataset,
            backend,
            params,
            strategy="self-rethinking",
            mistakes=mistakes,
            rethink_config=dataclasses.replace(cfg, exemplar_components=frozenset(flags)),
            out_dir=run_dir,
            max_concurrency=max_concurrency,
        )
        if run_dir is not None:
            write_results(
                results,
                run_dir,
                strategy="self-rethinking",
                task=dataset[0].task if dataset else "",
                config={"components": list(flags), "k": cfg.k, "seed": cfg.seed},
            )
        rows.append((flags, score_run(results)))

    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        lines = ["| Components | Accuracy |", "| :--- | ---: |"]
        lines += [f"| {','.join(flags)} | {acc:.2f} |" for flags, acc in rows]
        (root / "ablation.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


# ---------------------------------------------------------------------------
# reports


def render_report(run_dirs: Sequence[str | Path]) -> str:
    """Markdown accuracy table over stored runs: strategies x tasks.

    Pure function of the stored manifests and per-item result files; nothing
    here ever talks to a backend. The best value in each column is bolded.
    Accuracy is recomputed from the per-item results, to two decimals.
    """
    from .core import load_manifest, load_results  # local import cycle guard

    cells: dict[tuple[str, str], float] = {}
    strategies: list[str] = []
    tasks: list[str] = []
    for run_dir in run_dirs:
        run_path = Path(run_dir)
        manifest = load_manifest(run_path)
        results_file = run_path / manifest.get("results_file", "results.jsonl")
        if not results_file.exists():
            raise MissingManifest(str(run_dir))
        results = load_results(results_file)
        strategy = manifest.get("strategy", "unknown")
        task = manifest.get("task", "unknown")
        if strategy not in strategies:
            strategies.append(strategy)
        if task not in tasks:
            tasks.append(task)
        cells[(strategy, task)] = score_run(results)

    best: dict[str, float] = {}
    for task in tasks:
        values = [cells[(s, task)] for s in strategies if (s, task) in cells]
        best[task] = max(values)

    lines = ["| Strategy | " + " | ".join(tasks) + " |"]
    lines.append("| :--- |" + " ---: |" * len(tasks))
    for strategy in strategies:
        row = [strategy]
        for task in tasks:
            if (strategy, task) not in cells:
                row.append("n/a")
                continue
            value = cells[(strategy, task)]
            text = f"{value:.2f}"
            row.append(f"**{text}**" if value == best[task] else text)
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def render_tuning_report(rows: Sequence[dict]) -> str:
    """Markdown table comparing standard finetuning vs mistake tuning.

    ``rows`` holds dicts with keys model, task, standard, mistake (accuracies
    measured by an external trainer; this artifact only renders them). The
    better of the two accuracy columns is bolded per row.
    """
    lines = [
        "| Model | Task | Standard finetuning | Mistake tuning |",
        "| :--- | :--- | ---: | ---: |",
    ]
    for row in rows:
        standard = float(row["standard"])
        mistake = float(row["mistake"])
        std_text = f"{standard:.2f}"
        mis_text = f"{mistake:.2f}"
        if standard > mistake:
            std_text = f"**{std_text}**"
        elif mistake > standard:
            mis_text = f"**{mis_text}**"
        lines.append(f"| {row['model']} | {row['task']} | {std_text} | {mis_text} |")
    return "\n".join(lines)
