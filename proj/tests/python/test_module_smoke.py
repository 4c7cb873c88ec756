"""Smoke tests for the python extension module."""

import json
import os
import xml.etree.ElementTree as ET

import pytest

import ttcbench

DATA = os.environ.get("TTC_DATA", "")
REPO_DATA = os.environ.get("TTC_REPO_DATA", "")


def write_dataset(path, n=3):
    with open(path, "w", encoding="utf-8") as f:
        for i in range(1, n + 1):
            record = {
                "id": f"q{i}",
                "stem": f"What is item number {i} in the catalogue?",
                "choices": [
                    {"label": "a", "text": f"candidate {i}-1"},
                    {"label": "b", "text": f"candidate {i}-2"},
                    {"label": "c", "text": f"candidate {i}-3"},
                ],
                "answer": "a",
            }
            f.write(json.dumps(record) + "\n")
    return str(path)


def test_version_is_nonempty():
    assert ttcbench.__version__
    assert ttcbench.__version__.count(".") == 2


def test_approx_token_count_boundaries():
    assert ttcbench.approx_token_count("") == 0
    assert ttcbench.approx_token_count("a") == 1
    assert ttcbench.approx_token_count("abcd") == 1
    assert ttcbench.approx_token_count("abcde") == 2


def test_memory_estimates_are_exact():
    assert ttcbench.estimate_model_memory_gb(7e9, 16) == 14.0
    assert ttcbench.estimate_model_memory_gb(70e9, 16) == 140.0
    assert ttcbench.estimate_model_memory_gb(70e9, 4) == 35.0
    assert ttcbench.estimate_model_memory_bytes(7e9, 16) == 14e9
    with pytest.raises(ValueError):
        ttcbench.estimate_model_memory_bytes(0, 16)


def test_rank_values_average_ties():
    assert ttcbench.rank_values([2.0, 2.0, 5.0]) == [1.5, 1.5, 3.0]
    assert ttcbench.rank_values([1.0, 2.0], ascending=False) == [2.0, 1.0]


def test_spearman_worked_example():
    ranks_a = ttcbench.rank_values([1.0, 2.0, 3.0, 4.0])
    ranks_b = ttcbench.rank_values([2.0, 1.0, 4.0, 3.0])
    rho, note = ttcbench.spearman_rho(ranks_a, ranks_b)
    assert note == ""
    assert abs(rho - 0.6) <= 1e-12

    rho, _ = ttcbench.spearman_rho([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert rho == 1.0
    rho, _ = ttcbench.spearman_rho([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
    assert rho == -1.0

    rho, note = ttcbench.spearman_rho([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    assert rho is None
    assert "zero variance" in note


def test_merge_table_segmentation():
    table = ttcbench.MergeTable.parse("a b\nab c\n", "inline")
    assert len(table) == 2
    assert table.name == "inline"
    assert table.segment("abc") == [b"abc"]
    assert table.segment("abab") == [b"ab", b"ab"]
    assert table.count("xaby") == 3
    assert b"".join(table.segment("xabyabc")) == b"xabyabc"


def test_merge_table_load_from_file():
    table = ttcbench.MergeTable.load(os.path.join(DATA, "toy_merges.txt"))
    assert len(table) > 0
    pieces = table.segment("the cat sat")
    assert b"".join(pieces) == b"the cat sat"


def test_count_tokens_precedence():
    table = ttcbench.MergeTable.parse("a b\n", "inline")
    count, source = ttcbench.count_tokens(
        "abab", ["server_usage", "client_bpe", "approximate"], server_count=9, table=table
    )
    assert (count, source) == (9, "server_usage")
    count, source = ttcbench.count_tokens(
        "abab", ["server_usage", "client_bpe", "approximate"], table=table
    )
    assert (count, source) == (2, "client_bpe")
    count, source = ttcbench.count_tokens("abab", ["approximate"])
    assert (count, source) == (1, "approximate")
    with pytest.raises(ValueError):
        ttcbench.count_tokens("abab", [])


def test_task_tag_detection():
    assert (
        ttcbench.detect_task_tag("Answer only with the letter of the selected choice.")
        == "answer_choice"
    )
    assert ttcbench.detect_task_tag("tell me a story") == "default"


def test_task_kind_names():
    assert ttcbench.task_kind_names() == ["answer_choice", "paraphrase", "open_answer"]


def test_build_suite_file_cardinality(tmp_path):
    dataset = os.path.join(DATA, "questions_660.jsonl")
    out = str(tmp_path / "suite.json")
    info = ttcbench.build_suite_file(dataset, out, created_at="2026-01-01T00:00:00Z")
    assert info["n_questions"] == 660
    assert info["total_cases"] == 1980
    assert info["suite_id"]
    assert os.path.exists(out)


def test_validate_dataset_file(tmp_path):
    dataset = write_dataset(tmp_path / "data.jsonl")
    report = ttcbench.validate_dataset_file(dataset)
    assert report["n_questions"] == 3
    assert report["total_issues"] == 0
    assert report["counts"] == {}


def test_missing_dataset_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        ttcbench.build_suite_file(str(tmp_path / "absent.jsonl"), str(tmp_path / "out.json"))


def test_auth_env_rejects_key_material(tmp_path):
    dataset = write_dataset(tmp_path / "data.jsonl")
    suite = str(tmp_path / "suite.json")
    ttcbench.build_suite_file(dataset, suite, tasks=["answer_choice"])
    with pytest.raises(ValueError, match="never pass key material"):
        ttcbench.run_benchmark(
            suite,
            "http://127.0.0.1:1",
            ["m"],
            str(tmp_path / "runs"),
            auth_env="sk-abc123-not-a-name",
        )


def test_full_pipeline_against_mock(tmp_path):
    dataset = write_dataset(tmp_path / "data.jsonl")
    suite = str(tmp_path / "suite.json")
    ttcbench.build_suite_file(dataset, suite, tasks=["answer_choice"])

    profiles = os.path.join(REPO_DATA, "profiles", "sample.json")
    models = ["Meta-Llama-3-8B-Instruct", "Yi-6B-Chat"]
    runs_dir = str(tmp_path / "runs")
    with ttcbench.MockServer(profiles, time_scale=0.05) as server:
        assert server.port > 0
        assert server.url.startswith("http://127.0.0.1:")
        written = ttcbench.run_benchmark(suite, server.url, models, runs_dir)
        stats = server.stats()
    assert len(written) == 2
    assert all(os.path.exists(path) for path in written)
    assert stats["served"] == 6
    assert stats["active"] == 0

    summary = str(tmp_path / "summary.json")
    assert ttcbench.analyze_runs(runs_dir, summary) == 2

    rows = ttcbench.load_summaries(summary)
    assert {row["model_id"] for row in rows} == set(models)
    for row in rows:
        assert row["completed"] == 3
        assert row["failed"] == 0
        assert row["wall_time_s"] > 0.0
        assert row["mean_time_per_output_token_s"] > 0.0

    csv_paths = ttcbench.render_reports(summary, "csv", str(tmp_path / "rep"))
    md_paths = ttcbench.render_reports(summary, "md", str(tmp_path / "rep"))
    svg_paths = ttcbench.render_reports(summary, "svg", str(tmp_path / "rep"))
    with open(csv_paths[0], encoding="utf-8") as f:
        header = f.readline().strip()
    assert header.startswith("model,task,batch,wall_time_s")
    with open(md_paths[0], encoding="utf-8") as f:
        md = f.read()
    assert "Meta-Llama-3-8B-Instruct" in md
    for path in svg_paths:
        root = ET.parse(path).getroot()
        assert root.tag.endswith("svg")


def test_analyze_empty_dir_raises(tmp_path):
    empty = tmp_path / "runs"
    empty.mkdir()
    with pytest.raises(ValueError, match="no run records found"):
        ttcbench.analyze_runs(str(empty), str(tmp_path / "summary.json"))
