"""LLM-driven error clustering with human review overrides and distributions.

The pipeline: extract short error keywords per mistake record, send the
deduplicated keyword list to a backend in one clustering call, parse the
category lines it returns, then apply reviewer overrides. Keywords the reply
missed land in the "Uncategorized" bucket so the assignment stays total.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .backends import Backend, GenParams
from .core import MistakeRecord
from .errors import (
    DuplicateKeyword,
    EmptyField,
    EmptyKeywords,
    MalformedOverride,
    UncoveredRecord,
    UnparseableReply,
)
from .prompts import render_cluster_prompt, render_keyword_prompt

logger = logging.getLogger(__name__)

# Ready-made six-category taxonomy reviewers can snap clusters onto.
CANONICAL_CATEGORIES = (
    "Calculation",
    "Numeric",
    "Logical",
    "Linguistics",
    "Commonsense",
    "Context",
)
UNCATEGORIZED = "Uncategorized"

MAX_KEYWORDS_PER_RECORD = 5


@dataclass
class ErrorCategoryMap:
    """Keyword-to-category assignment plus reviewer overrides (applied last)."""

    assignments: dict[str, str] = field(default_factory=dict)
    categories: list[str] = field(default_factory=list)
    review_overrides: dict[str, str] = field(default_factory=dict)

    def resolved(self) -> dict[str, str]:
        """Assignments with overrides applied; total and single-valued."""
        merged = dict(self.assignments)
        merged.update(self.review_overrides)
        return merged

    def category_of(self, keyword: str) -> str | None:
        return self.resolved().get(keyword)

    def to_json(self) -> str:
        payload = {
            "assignments": self.assignments,
            "categories": self.categories,
            "review_overrides": self.review_overrides,
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ErrorCategoryMap":
        data = json.loads(text)
        return cls(
            assignments=dict(data.get("assignments", {})),
            categories=list(data.get("categories", [])),
            review_overrides=dict(data.get("review_overrides", {})),
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "ErrorCategoryMap":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _split_keywords(reply: str) -> list[str]:
    parts = reply.replace("\n", ",").split(",")
    keywords = []
    for part in parts:
        cleaned = part.strip().strip(".")
        if cleaned and cleaned not in keywords:
            keywords.append(cleaned)
    return keywords


def extract_keywords(
    record: MistakeRecord, backend: Backend, params: GenParams
) -> list[str]:
    """Ask the backend for 1-5 short keyword phrases naming the error.

    The comma-separated reply is split, trimmed, deduplicated, and capped at
    five entries; the result is stored on the record.
    """
    if not record.error_causes:
        raise EmptyField("error_causes")
    prompt = render_keyword_prompt(record.error_causes)
    reply = backend.generate(prompt, params)[0].text
    keywords = _split_keywords(reply)[:MAX_KEYWORDS_PER_RECORD]
    if not keywords:
        raise UnparseableReply(f"no keywords in reply {reply!r}")
    record.error_keywords = keywords
    return keywords


def extract_keywords_all(
    records: Sequence[MistakeRecord],
    backend: Backend,
    params: GenParams,
    *,
    max_concurrency: int = 4,
) -> list[MistakeRecord]:
    """Keyword extraction over many records, skipping already-keyworded ones."""

    def enrich(record: MistakeRecord) -> MistakeRecord:
        if record.error_keywords:
            return record
        try:
            extract_keywords(record, backend, params)
        except UnparseableReply as exc:
            logger.warning("keyword extraction failed for %s: %s", record.item_id, exc)
        return record

    if max_concurrency == 1 or len(records) <= 1:
        return [enrich(r) for r in records]
    with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
        return list(pool.map(enrich, records))


def _strip_brackets(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == "[" and token[-1] == "]":
        token = token[1:-1].strip()
    return token


def parse_cluster_output(text: str) -> dict[str, list[str]]:
    """Parse "Category: kw1, kw2" lines, preserving category line order.

    Surrounding square brackets on categories or keywords are tolerated (the
    instruction format shows them). A keyword listed under two categories
    keeps its first assignment. Raises UnparseableReply when no line matches.
    """
    parsed: dict[str, list[str]] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or ":" not in line:
            continue
        raw_category, raw_keywords = line.split(":", 1)
        category = _strip_brackets(raw_category)
        keywords = [_strip_brackets(k) for k in raw_keywords.split(",")]
        keywords = [k for k in keywords if k]
        if not category or not keywords:
            continue
        bucket = parsed.setdefault(category, [])
        bucket.extend(k for k in keywords if k not in bucket)
    if not parsed:
        raise UnparseableReply("no 'Category: keywords' line found")
    return parsed


def format_cluster_output(mapping: Mapping[str, Sequence[str]]) -> str:
    """Inverse of parse_cluster_output for well-formed maps."""
    return "\n".join(f"{cat}: {', '.join(kws)}" for cat, kws in mapping.items())


def cluster_keywords(
    keywords: Sequence[str], backend: Backend, params: GenParams
) -> ErrorCategoryMap:
    """One clustering call over a deduplicated keyword list.

    Keywords the reply does not mention are assigned to "Uncategorized".
    A keyword claimed by several categories keeps the first claim.
    """
    if not keywords:
        raise EmptyKeywords("cluster_keywords requires at least one keyword")
    seen: set[str] = set()
    for keyword in keywords:
        if keyword in seen:
            raise DuplicateKeyword(keyword)
        seen.add(keyword)

    prompt = render_cluster_prompt(keywords)
    reply = backend.generate(prompt, params)[0].text
    parsed = parse_cluster_output(reply)

    assignments: dict[str, str] = {}
    categories: list[str] = []
    for category, clustered in parsed.items():
        if category not in categories:
            categories.append(category)
        for keyword in clustered:
            assignments.setdefault(keyword, category)
    for keyword in keywords:
        if keyword not in assignments:
            assignments[keyword] = UNCATEGORIZED
            if UNCATEGORIZED not in categories:
                categories.append(UNCATEGORIZED)
    return ErrorCategoryMap(assignments=assignments, categories=categories)


def parse_override_line(line: str) -> tuple[str, str]:
    if "->" not in line:
        raise MalformedOverride(line)
    keyword, _, category = line.partition("->")
    keyword = keyword.strip()
    category = category.strip()
    if not keyword or not category:
        raise MalformedOverride(line)
    return keyword, category


def apply_review(category_map: ErrorCategoryMap, overrides_file: str | Path) -> ErrorCategoryMap:
    """Apply reviewer overrides from a UTF-8 file of "keyword -> Category" lines.

    Overrides replace assignments and may introduce new category names, but an
    override naming a keyword the clustering never saw is an error: review
    files are validated against the map they amend.
    """
    overrides = dict(category_map.review_overrides)
    categories = list(category_map.categories)
    for line in Path(overrides_file).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        keyword, category = parse_override_line(line)
        if keyword not in category_map.assignments:
            raise MalformedOverride(line, reason=f"unknown keyword {keyword!r}")
        overrides[keyword] = category
        if category not in categories:
            categories.append(category)
    return ErrorCategoryMap(
        assignments=dict(category_map.assignments),
        categories=categories,
        review_overrides=overrides,
    )


def distribution(
    records: Sequence[MistakeRecord], category_map: ErrorCategoryMap
) -> dict[str, float]:
    """Percentage of records per category, one decimal place.

    A record counts once, by the first of its keywords that the map covers.
    Shares are apportioned on a 0.1 grid by largest remainder, so each value
    stays within 0.1 of its exact share and the values sum to exactly 100.0
    (independent per-value rounding can drift to 100.2 with six near-equal
    categories). Ordered by descending share, then category name.
    """
    if not records:
        raise UncoveredRecord("(empty record list)")
    resolved = category_map.resolved()
    counts: dict[str, int] = {}
    for record in records:
        category = None
        for keyword in record.error_keywords or ():
            category = resolved.get(keyword)
            if category is not None:
                break
        if category is None:
            raise UncoveredRecord(record.item_id)
        counts[category] = counts.get(category, 0) + 1

    total = len(records)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    tenths: dict[str, int] = {}
    remainders: list[tuple[int, int, str]] = []
    for position, (category, count) in enumerate(ordered):
        whole, remainder = divmod(count * 1000, total)
        tenths[category] = whole
        remainders.append((remainder, position, category))
    deficit = 1000 - sum(tenths.values())
    for _, _, category in sorted(remainders, key=lambda r: (-r[0], r[1]))[:deficit]:
        tenths[category] += 1
    return {category: tenths[category] / 10 for category, _ in ordered}


def save_distribution(dist: Mapping[str, float], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(dict(dist), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return path
