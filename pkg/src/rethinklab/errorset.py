"""Build mistake corpora: collect incorrect rationales, then introspect them.

Collection runs one step-by-step attempt per item and keeps the rationale
only when its extracted answer misses the gold answer; there is no
resampling to fish for errors. Introspection then asks a backend (by default
the same one that erred) why each kept rationale is wrong.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from .backends import Backend, GenParams
from .core import BenchmarkItem, MistakeRecord
from .errors import BackendUnavailable, ConfigError, NotNumeric
from .evaluate import normalize_answer
from .prompts import render_introspection_prompt
from .strategies import run_cot

logger = logging.getLogger(__name__)


def collect_mistakes(
    dataset: Sequence[BenchmarkItem],
    backend: Backend,
    params: GenParams,
    *,
    max_concurrency: int = 4,
) -> list[MistakeRecord]:
    """One step-by-step attempt per item; keep a record iff the answer misses.

    Records carry the raw rationale verbatim and empty error causes. Per-item
    backend failures are logged and skipped; the batch continues. Items whose
    gold answer cannot be normalized are skipped with a warning. Output order
    follows dataset order regardless of completion order.
    """
    if not dataset:
        raise ConfigError("collect_mistakes requires a nonempty dataset")

    def attempt(item: BenchmarkItem) -> MistakeRecord | None:
        try:
            normalize_answer(item.gold_answer, item.answer_type)
        except NotNumeric:
            logger.warning("skipping %s: gold answer %r not normalizable", item.id, item.gold_answer)
            return None
        try:
            trace = run_cot(item, backend, params)
        except BackendUnavailable as exc:
            logger.warning("skipping %s: backend failure: %s", item.id, exc)
            return None
        if trace.final_answer == item.gold_answer:
            return None
        return MistakeRecord(
            item_id=item.id,
            question=item.question,
            reference=item.reference,
            target=item.gold_answer,
            incorrect_rationale=trace.final_rationale,
            error_causes="",
        )

    if max_concurrency == 1 or len(dataset) <= 1:
        outcomes = [attempt(item) for item in dataset]
    else:
        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            outcomes = list(pool.map(attempt, dataset))
    return [record for record in outcomes if record is not None]


def introspect(record: MistakeRecord, backend: Backend, params: GenParams) -> MistakeRecord:
    """Fill error_causes with the backend's explanation of the mistake.

    Idempotent: a record that already has causes is returned unchanged, as is
    a record whose introspection call fails (the failure is logged).
    """
    if record.error_causes:
        return record
    prompt = render_introspection_prompt(
        record.question, record.reference, record.incorrect_rationale
    )
    try:
        completions = backend.generate(prompt, params)
    except BackendUnavailable as exc:
        logger.warning("introspection failed for %s: %s", record.item_id, exc)
        return record
    record.error_causes = completions[0].text
    return record


def introspect_all(
    records: Sequence[MistakeRecord],
    backend: Backend,
    params: GenParams,
    *,
    max_concurrency: int = 4,
) -> list[MistakeRecord]:
    """Introspect every record, preserving input order."""
    if max_concurrency == 1 or len(records) <= 1:
        return [introspect(record, backend, params) for record in records]
    with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
        return list(pool.map(lambda r: introspect(r, backend, params), records))
