"""Mistake-aware LLM reasoning harness.

Builds mistake corpora with introspected error causes, runs reasoning
strategies (standard, step-by-step, consistency voting, self-refine,
self-rethinking) against pluggable backends, clusters error types, emits
prefix-tagged tuning corpora, and renders evaluation reports.
"""

from .backends import (
    Backend,
    Completion,
    GenParams,
    HttpBackend,
    HttpBackendConfig,
    MockBackend,
    MockRule,
    ReplayBackend,
    cache_key,
)
from .clustering import (
    CANONICAL_CATEGORIES,
    ErrorCategoryMap,
    apply_review,
    cluster_keywords,
    distribution,
    extract_keywords,
    parse_cluster_output,
)
from .core import (
    BenchmarkItem,
    MistakeRecord,
    RunResult,
    dataset_hash,
    load_dataset,
    load_mistakes,
    load_results,
    save_dataset,
    save_mistakes,
    write_results,
)
from .corpus import TuningExample, build_tuning_examples, serialize
from .errorset import collect_mistakes, introspect
from .evaluate import (
    ablation_run,
    extract_answer,
    majority_vote,
    normalize_answer,
    render_report,
    score_run,
    sweep_k,
)
from .harness import run_strategy
from .strategies import (
    ReasoningTrace,
    RethinkConfig,
    parse_verdict,
    run_cot,
    run_self_consistency,
    run_self_refine,
    run_self_rethinking,
    run_standard,
)

__version__ = "0.1.0"
