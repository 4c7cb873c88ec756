#pragma once

#include "ttc/errors.hpp"
#include "ttc/metrics.hpp"
#include "ttc/runner.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ttc::report {

/// Identity of one run record, kept so summaries stay traceable to the
/// traces they came from.
struct RunMeta {
    std::string run_id;
    std::string model_id;
    suite::TaskKind task_kind = suite::TaskKind::answer_choice;
    int batch_size = 1;
    std::int64_t wall_start = 0;
    std::int64_t wall_end = 0;
    std::size_t n_traces = 0;
    std::string tool_version;

    bool operator==(const RunMeta &) const = default;
};

RunMeta run_meta_of(const runner::TaskRunRecord &record);

/// One ranking comparison scoped to the task and batch size it was computed
/// over (model ids must be unique within that scope).
struct ComparisonEntry {
    suite::TaskKind task_kind = suite::TaskKind::answer_choice;
    int batch_size = 1;
    metrics::RankingComparison comparison;

    bool operator==(const ComparisonEntry &) const = default;
};

struct ReportBundle {
    std::string tool_version;
    std::vector<RunMeta> runs;
    std::vector<metrics::TaskSummary> summaries;
    std::vector<ComparisonEntry> comparisons;

    bool operator==(const ReportBundle &) const = default;
};

/// Summaries and per-(task, batch) discordance comparisons for a set of run
/// records. Rows are ordered by (model, task, batch); groups with fewer than
/// two comparable models yield no comparison entry.
ReportBundle build_bundle(const std::vector<runner::TaskRunRecord> &records);

/// Every summary must reference a run id present in `runs`.
void validate_bundle(const ReportBundle &bundle);

/// Versioned "report/v1" document; identical bundles serialize to identical
/// bytes.
std::string summary_document_bytes(const ReportBundle &bundle);
void emit_summary_document(const ReportBundle &bundle, const std::string &path);
ReportBundle load_summary_document(const std::string &path);

/// Fixed column order: model, task, batch, wall_time_s,
/// mean_time_per_output_token_s, decode_tpot_s, throughput_tok_s, total_in,
/// total_out, completed, failed. Null aggregates become empty cells.
std::string csv_bytes(const std::vector<metrics::TaskSummary> &summaries);
void emit_csv(const std::vector<metrics::TaskSummary> &summaries, const std::string &path);

std::string markdown_bytes(const ReportBundle &bundle);
void emit_markdown(const ReportBundle &bundle, const std::string &path);

/// Three bar panels over the models of a single task: time per output
/// token, task wall time, grouped input/output token counts.
std::string panel_svg_bytes(const std::vector<metrics::TaskSummary> &summaries);
void emit_panel_svg(const std::vector<metrics::TaskSummary> &summaries, const std::string &path);

/// Fixed-point second formatting shared by all emitters: 6 decimals,
/// locale-independent.
std::string format_seconds(double seconds);

} // namespace ttc::report
