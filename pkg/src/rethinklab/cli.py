"""Command-line surface: eval, build-errorset, cluster, corpus, sweep-k,
ablate, report, dump-prompts.

Exit codes: 0 success, 1 domain error, 2 usage error. An optional JSON config
file merges under the flags (flags win); API keys are only ever read from the
environment variable named in the config, never from arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import backends, clustering, corpus, errorset, evaluate, harness, prompts
from .core import (
    dataset_hash,
    load_dataset,
    load_mistakes,
    save_mistakes,
    timestamp,
    write_results,
)
from .errors import ConfigError, RethinklabError
from .strategies import RethinkConfig

DEFAULT_K = 1
DEFAULT_N = 3  # self-consistency inference budget
DEFAULT_M = 1
DEFAULT_MAX_CONCURRENCY = 4
DEFAULT_SC_TEMPERATURE = 0.7


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config file must hold a JSON object")
    return config


def _setting(args_value, config: dict, key: str, fallback):
    """Flags win over the config file's defaults section."""
    if args_value is not None:
        return args_value
    defaults = config.get("defaults", {})
    return defaults.get(key, fallback)


def _build_backend(args, config: dict) -> backends.Backend:
    if args.backend == "mock":
        if not args.script:
            raise ConfigError("mock backend requires --script")
        inner: backends.Backend = backends.load_mock_script(args.script)
    else:
        http_cfg = config.get("backend", {})
        inner = backends.HttpBackend(
            backends.HttpBackendConfig(
                base_url=http_cfg.get("base_url", ""),
                provider=http_cfg.get("provider", "openai-compatible"),
                api_key_env=http_cfg.get("api_key_env", ""),
                max_retries=int(http_cfg.get("max_retries", 3)),
                timeout=float(http_cfg.get("timeout", 60.0)),
            )
        )
    if getattr(args, "cache", None):
        return backends.ReplayBackend(inner, args.cache)
    return inner


def _gen_params(args, config: dict, *, strategy: str | None = None) -> backends.GenParams:
    temperature = args.temperature
    if temperature is None:
        fallback = DEFAULT_SC_TEMPERATURE if strategy == "sc" else 0.0
        temperature = _setting(None, config, "temperature", fallback)
    return backends.GenParams(
        model=_setting(args.model, config, "model", "mock"),
        temperature=float(temperature),
        max_tokens=int(_setting(args.max_tokens, config, "max_tokens", 512)),
        n_samples=1,
    )


def _report_cache_stats(backend) -> None:
    if isinstance(backend, backends.ReplayBackend):
        print(
            f"replay cache: hits={backend.cache_hits} inner_calls={backend.inner_calls}",
            file=sys.stderr,
        )


def _parse_components(text: str) -> tuple[str, ...]:
    flags = tuple(part.strip().upper() for part in text.split(",") if part.strip())
    if not flags:
        raise ConfigError("component set must be nonempty")
    return flags


def _add_backend_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("mock", "http"), default="mock")
    parser.add_argument("--script", help="mock script JSON (rules/queue/default)")
    parser.add_argument("--cache", help="replay cache directory")
    parser.add_argument("--config", help="JSON config file; flags win over it")
    parser.add_argument("--model", help="model name sent to the backend")
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--max-tokens", type=int, dest="max_tokens")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--max-concurrency", type=int, dest="max_concurrency", default=None
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rethinklab",
        description="Mistake-aware reasoning harness: run strategies, build "
        "mistake corpora, cluster error types, emit tuning corpora, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="run one strategy over a dataset")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument(
        "--strategy",
        required=True,
        choices=harness.STRATEGY_NAMES,
    )
    p_eval.add_argument("--k", type=int, default=None, help="rethink budget")
    p_eval.add_argument("--n", type=int, default=None, help="self-consistency samples")
    p_eval.add_argument("--m", type=int, default=None, help="self-refine rounds")
    p_eval.add_argument("--exemplars", help="mistake file for the rethink stage")
    p_eval.add_argument("--fewshot", help="dataset file whose items become demonstrations")
    p_eval.add_argument("--components", help="exemplar components, e.g. CAT,DEM")
    p_eval.add_argument("--exemplar-count", type=int, dest="exemplar_count", default=None)
    p_eval.add_argument("--out", required=True)
    _add_backend_options(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_err = sub.add_parser("build-errorset", help="collect and introspect mistakes")
    p_err.add_argument("--dataset", required=True)
    p_err.add_argument("--out", required=True)
    p_err.add_argument("--skip-introspection", action="store_true")
    p_err.add_argument(
        "--introspect-backend",
        choices=("mock", "http"),
        help="introspect with a different backend (default: same backend)",
    )
    p_err.add_argument("--introspect-script", help="mock script for --introspect-backend mock")
    _add_backend_options(p_err)
    p_err.set_defaults(func=cmd_build_errorset)

    p_cluster = sub.add_parser("cluster", help="cluster error keywords into categories")
    p_cluster.add_argument("--errorset", required=True)
    p_cluster.add_argument("--review", help="overrides file: 'keyword -> Category' lines")
    p_cluster.add_argument("--out", required=True, help="category map JSON")
    p_cluster.add_argument("--annotated-out", dest="annotated_out", help="errorset with categories filled")
    p_cluster.add_argument("--distribution-out", dest="distribution_out", help="category percentage JSON")
    _add_backend_options(p_cluster)
    p_cluster.set_defaults(func=cmd_cluster)

    p_corpus = sub.add_parser("corpus", help="emit a tuning corpus from an errorset")
    p_corpus.add_argument("--errorset", required=True)
    p_corpus.add_argument("--dataset", required=True)
    p_corpus.add_argument("--format", choices=corpus.FORMATS, default="concat")
    p_corpus.add_argument("--out", required=True)
    p_corpus.add_argument("--include-clean", action="store_true", dest="include_clean")
    p_corpus.add_argument("--limit", type=int, default=None)
    p_corpus.add_argument("--seed", type=int, default=0)
    p_corpus.set_defaults(func=cmd_corpus)

    p_sweep = sub.add_parser("sweep-k", help="self-rethinking accuracy across budgets")
    p_sweep.add_argument("--dataset", required=True)
    p_sweep.add_argument("--exemplars")
    p_sweep.add_argument("--ks", required=True, help="comma list, e.g. 1,2,4,8,16,24")
    p_sweep.add_argument("--components")
    p_sweep.add_argument("--exemplar-count", type=int, dest="exemplar_count", default=None)
    p_sweep.add_argument("--out", required=True)
    _add_backend_options(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep_k)

    p_ablate = sub.add_parser("ablate", help="exemplar-component ablation")
    p_ablate.add_argument("--dataset", required=True)
    p_ablate.add_argument("--exemplars")
    p_ablate.add_argument(
        "--components",
        required=True,
        help="semicolon-separated subsets, e.g. CAT;CAT,DEM;CAT,DEM,COR,INC",
    )
    p_ablate.add_argument("--k", type=int, default=None)
    p_ablate.add_argument("--exemplar-count", type=int, dest="exemplar_count", default=None)
    p_ablate.add_argument("--out", required=True)
    _add_backend_options(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    p_report = sub.add_parser("report", help="markdown accuracy table over stored runs")
    p_report.add_argument("--runs", required=True, help="comma list of run dirs")
    p_report.add_argument("--out", help="write markdown here instead of stdout")
    p_report.add_argument(
        "--tuning-summary",
        dest="tuning_summary",
        help="JSON rows {model,task,standard,mistake} appended as a tuning table",
    )
    p_report.set_defaults(func=cmd_report)

    p_dump = sub.add_parser("dump-prompts", help="emit all prompt templates for audit")
    p_dump.set_defaults(func=cmd_dump_prompts)

    return parser


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    items = load_dataset(args.dataset)
    mistakes = load_mistakes(args.exemplars) if args.exemplars else []
    fewshot = None
    if args.fewshot:
        fewshot = [(it.question, it.reference) for it in load_dataset(args.fewshot)]

    backend = _build_backend(args, config)
    params = _gen_params(args, config, strategy=args.strategy)
    k = int(_setting(args.k, config, "k", DEFAULT_K))
    n = int(_setting(args.n, config, "n", DEFAULT_N))
    m = int(_setting(args.m, config, "m", DEFAULT_M))
    seed = int(_setting(args.seed, config, "seed", 0))
    max_concurrency = int(
        _setting(args.max_concurrency, config, "max_concurrency", DEFAULT_MAX_CONCURRENCY)
    )
    components = _parse_components(args.components) if args.components else prompts.COMPONENT_FLAGS
    exemplar_count = int(_setting(args.exemplar_count, config, "exemplar_count", 4))
    rethink_config = RethinkConfig(
        k=k,
        exemplar_components=frozenset(components),
        exemplar_count=exemplar_count,
        seed=seed,
    )

    started = timestamp()
    results = harness.run_strategy(
        items,
        backend,
        params,
        strategy=args.strategy,
        n=n,
        m=m,
        mistakes=mistakes,
        rethink_config=rethink_config,
        fewshot=fewshot,
        out_dir=args.out,
        max_concurrency=max_concurrency,
    )

    tasks = {item.task for item in items}
    snapshot = {
        "strategy": args.strategy,
        "dataset": args.dataset,
        "exemplars": args.exemplars or "",
        "fewshot": args.fewshot or "",
        "backend": args.backend,
        "model": params.model,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "k": k,
        "n": n,
        "m": m,
        "seed": seed,
        "exemplar_components": list(components),
        "exemplar_count": exemplar_count,
        "max_concurrency": max_concurrency,
        "prompt_version": prompts.PROMPT_VERSION,
    }
    write_results(
        results,
        args.out,
        strategy=args.strategy,
        task=tasks.pop() if len(tasks) == 1 else "mixed",
        config=snapshot,
        dataset_digest=dataset_hash(items),
        started_at=started,
    )
    accuracy = evaluate.score_run(results)
    calls = evaluate.mean_backend_calls(results)
    print(
        f"strategy={args.strategy} items={len(results)} accuracy={accuracy:.2f} "
        f"mean_backend_calls={calls:.2f}"
    )
    _report_cache_stats(backend)
    return 0


def cmd_build_errorset(args) -> int:
    config = _load_config(args.config)
    items = load_dataset(args.dataset)
    backend = _build_backend(args, config)
    params = _gen_params(args, config)
    max_concurrency = int(
        _setting(args.max_concurrency, config, "max_concurrency", DEFAULT_MAX_CONCURRENCY)
    )

    records = errorset.collect_mistakes(
        items, backend, params, max_concurrency=max_concurrency
    )
    if not args.skip_introspection:
        intro_backend = backend
        if args.introspect_backend:
            intro_args = argparse.Namespace(
                backend=args.introspect_backend,
                script=args.introspect_script or args.script,
                cache=args.cache,
            )
            intro_backend = _build_backend(intro_args, config)
        records = errorset.introspect_all(
            records, intro_backend, params, max_concurrency=max_concurrency
        )
    save_mistakes(records, args.out)
    print(f"collected {len(records)} mistakes from {len(items)} items -> {args.out}")
    _report_cache_stats(backend)
    return 0


def cmd_cluster(args) -> int:
    config = _load_config(args.config)
    records = load_mistakes(args.errorset)
    backend = _build_backend(args, config)
    params = _gen_params(args, config)
    max_concurrency = int(
        _setting(args.max_concurrency, config, "max_concurrency", DEFAULT_MAX_CONCURRENCY)
    )

    records = clustering.extract_keywords_all(
        records, backend, params, max_concurrency=max_concurrency
    )
    keywords: list[str] = []
    for record in records:
        for keyword in record.error_keywords or ():
            if keyword not in keywords:
                keywords.append(keyword)
    category_map = clustering.cluster_keywords(keywords, backend, params)
    if args.review:
        category_map = clustering.apply_review(category_map, args.review)
    category_map.save(args.out)

    resolved = category_map.resolved()
    for record in records:
        for keyword in record.error_keywords or ():
            if keyword in resolved:
                record.error_category = resolved[keyword]
                break
    if args.annotated_out:
        save_mistakes(records, args.annotated_out)
    if args.distribution_out:
        dist = clustering.distribution(records, category_map)
        clustering.save_distribution(dist, args.distribution_out)
    print(
        f"clustered {len(keywords)} keywords into {len(category_map.categories)} "
        f"categories -> {args.out}"
    )
    _report_cache_stats(backend)
    return 0


def cmd_corpus(args) -> int:
    records = load_mistakes(args.errorset)
    items = load_dataset(args.dataset)
    examples = corpus.build_tuning_examples(
        records,
        items,
        include_clean=args.include_clean,
        limit=args.limit,
        seed=args.seed,
    )
    corpus.serialize(examples, args.out, format=args.format)
    corpus.write_corpus_manifest(
        args.out, mistakes=records, format=args.format, examples=examples
    )
    print(f"wrote {len(examples)} tuning examples ({args.format}) -> {args.out}")
    return 0


def cmd_sweep_k(args) -> int:
    config = _load_config(args.config)
    items = load_dataset(args.dataset)
    mistakes = load_mistakes(args.exemplars) if args.exemplars else []
    backend = _build_backend(args, config)
    params = _gen_params(args, config)
    try:
        ks = [int(part) for part in args.ks.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse --ks {args.ks!r}") from None
    seed = int(_setting(args.seed, config, "seed", 0))
    components = _parse_components(args.components) if args.components else prompts.COMPONENT_FLAGS
    exemplar_count = int(_setting(args.exemplar_count, config, "exemplar_count", 4))
    max_concurrency = int(
        _setting(args.max_concurrency, config, "max_concurrency", DEFAULT_MAX_CONCURRENCY)
    )
    points = evaluate.sweep_k(
        items,
        backend,
        mistakes,
        ks,
        params=params,
        base_config=RethinkConfig(
            exemplar_components=frozenset(components),
            exemplar_count=exemplar_count,
            seed=seed,
        ),
        out_dir=args.out,
        max_concurrency=max_concurrency,
    )
    for k, accuracy, calls in points:
        print(f"k={k} accuracy={accuracy:.2f} mean_backend_calls={calls:.2f}")
    _report_cache_stats(backend)
    return 0


def cmd_ablate(args) -> int:
    config = _load_config(args.config)
    items = load_dataset(args.dataset)
    mistakes = load_mistakes(args.exemplars) if args.exemplars else []
    backend = _build_backend(args, config)
    params = _gen_params(args, config)
    component_sets = [
        _parse_components(part) for part in args.components.split(";") if part.strip()
    ]
    seed = int(_setting(args.seed, config, "seed", 0))
    k = int(_setting(args.k, config, "k", DEFAULT_K))
    exemplar_count = int(_setting(args.exemplar_count, config, "exemplar_count", 4))
    max_concurrency = int(
        _setting(args.max_concurrency, config, "max_concurrency", DEFAULT_MAX_CONCURRENCY)
    )
    rows = evaluate.ablation_run(
        items,
        backend,
        mistakes,
        component_sets,
        params=params,
        base_config=RethinkConfig(k=k, exemplar_count=exemplar_count, seed=seed),
        out_dir=args.out,
        max_concurrency=max_concurrency,
    )
    for flags, accuracy in rows:
        print(f"components={','.join(flags)} accuracy={accuracy:.2f}")
    _report_cache_stats(backend)
    return 0


def cmd_report(args) -> int:
    run_dirs = [part.strip() for part in args.runs.split(",") if part.strip()]
    text = evaluate.render_report(run_dirs)
    if args.tuning_summary:
        rows = json.loads(Path(args.tuning_summary).read_text(encoding="utf-8"))
        text = text + "\n\n" + evaluate.render_tuning_report(rows)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_dump_prompts(args) -> int:
    print(prompts.dump_templates())
    return 0


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Parse and run; returns the process exit code instead of raising."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args) or 0)
    except RethinklabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
