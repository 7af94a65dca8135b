"""Run a strategy over a dataset with bounded item-level concurrency.

Each item's trace is produced by a single sequential worker; distinct items
run in parallel up to ``max_concurrency``. Results always come back in
dataset order, and trace files are written with run-dir-relative paths so
runs compare byte-for-byte across output locations.
"""

from __future__ import annotations

import urllib.parse
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

from .backends import Backend, GenParams
from .core import BenchmarkItem, MistakeRecord, RunResult
from .errors import ConfigError
from .strategies import (
    Fewshot,
    ReasoningTrace,
    RethinkConfig,
    run_cot,
    run_self_consistency,
    run_self_refine,
    run_self_rethinking,
    run_standard,
)

STRATEGY_NAMES = ("standard", "cot", "sc", "self-refine", "self-rethinking")


def _trace_filename(item_id: str) -> str:
    return urllib.parse.quote(item_id, safe="") + ".json"


def make_runner(
    strategy: str,
    *,
    n: int = 3,
    m: int = 1,
    mistakes: Sequence[MistakeRecord] = (),
    rethink_config: RethinkConfig | None = None,
    fewshot: Fewshot | None = None,
) -> Callable[[BenchmarkItem, Backend, GenParams], ReasoningTrace]:
    """Bind strategy-specific arguments into an (item, backend, params) callable."""
    if strategy == "standard":
        return run_standard
    if strategy == "cot":
        return lambda item, backend, params: run_cot(item, backend, params, fewshot)
    if strategy == "sc":
        return lambda item, backend, params: run_self_consistency(
            item, backend, params, n=n, fewshot=fewshot
        )
    if strategy == "self-refine":
        return lambda item, backend, params: run_self_refine(item, backend, params, m=m)
    if strategy == "self-rethinking":
        return lambda item, backend, params: run_self_rethinking(
            item, backend, params, mistakes=mistakes, config=rethink_config, fewshot=fewshot
        )
    raise ConfigError(f"unknown strategy {strategy!r}")


def run_strategy(
    items: Sequence[BenchmarkItem],
    backend: Backend,
    params: GenParams,
    *,
    strategy: str,
    n: int = 3,
    m: int = 1,
    mistakes: Sequence[MistakeRecord] = (),
    rethink_config: RethinkConfig | None = None,
    fewshot: Fewshot | None = None,
    out_dir: str | Path | None = None,
    max_concurrency: int = 4,
) -> list[RunResult]:
    """Produce one RunResult per item, in dataset order.

    When ``out_dir`` is given, each trace is saved under ``<out>/traces/`` and
    the result's trace_path points there, relative to the run dir.
    """
    if max_concurrency < 1:
        raise ConfigError("max_concurrency must be >= 1")
    runner = make_runner(
        strategy,
        n=n,
        m=m,
        mistakes=mistakes,
        rethink_config=rethink_config,
        fewshot=fewshot,
    )

    if max_concurrency == 1 or len(items) <= 1:
        traces = [runner(item, backend, params) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            traces = list(pool.map(lambda it: runner(it, backend, params), items))

    run_dir = Path(out_dir) if out_dir is not None else None
    results: list[RunResult] = []
    for item, trace in zip(items, traces):
        trace_path = ""
        if run_dir is not None:
            rel = Path("traces") / _trace_filename(item.id)
            trace.save(run_dir / rel)
            trace_path = rel.as_posix()
        # Abstentions ("" answers) always score incorrect.
        correct = bool(trace.final_answer) and trace.final_answer == item.gold_answer
        results.append(
            RunResult(
                item_id=item.id,
                strategy=strategy,
                final_answer=trace.final_answer,
                correct=correct,
                backend_calls=trace.backend_calls,
                trace_path=trace_path,
            )
        )
    return results
