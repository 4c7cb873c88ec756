"""Task-level speed benchmark for streaming chat endpoints.

Speed has two faces: the per-token streaming rate and the wall-clock time to
finish a whole task. This package exposes the benchmark core -- suite
building, endpoint driving, metric aggregation, rank comparison, and the
deterministic mock endpoint -- for scripted use.
"""

from ._core import (
    MergeTable,
    MockServer,
    __version__,
    analyze_runs,
    approx_token_count,
    build_suite_file,
    count_tokens,
    detect_task_tag,
    estimate_model_memory_bytes,
    estimate_model_memory_gb,
    load_summaries,
    rank_values,
    render_reports,
    run_benchmark,
    spearman_rho,
    task_kind_names,
    validate_dataset_file,
)

__all__ = [
    "MergeTable",
    "MockServer",
    "__version__",
    "analyze_runs",
    "approx_token_count",
    "build_suite_file",
    "count_tokens",
    "detect_task_tag",
    "estimate_model_memory_bytes",
    "estimate_model_memory_gb",
    "load_summaries",
    "rank_values",
    "render_reports",
    "run_benchmark",
    "spearman_rho",
    "task_kind_names",
    "validate_dataset_file",
]
