#pragma once

#include "ttc/errors.hpp"
#include "ttc/runner.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ttc::metrics {

/// Per-request quantities in seconds. Error traces carry excluded=true and
/// null durations; they never enter per-token aggregates.
struct RequestMetrics {
    std::string case_id;
    bool excluded = false;
    std::optional<double> ttft_s;
    std::optional<double> e2e_s;
    std::optional<double> decode_time_s;
    std::optional<double> per_token_e2e_s; // e2e / n_out, null if n_out = 0
    std::optional<double> decode_tpot_s;   // decode_time / (n_out - 1), null if n_out <= 1
    std::optional<tokenize::TokenCountRecord> n_in;
    std::optional<tokenize::TokenCountRecord> n_out;

    bool operator==(const RequestMetrics &) const = default;
};

RequestMetrics request_metrics(const client::RequestTrace &trace);

/// Aggregates over one task run. Token totals sum over included requests
/// only. Aggregates over an empty included set are null, never zero: a zero
/// is a legal measurement and must not stand in for absence.
struct TaskSummary {
    std::string run_id;
    std::string model_id;
    suite::TaskKind task_kind = suite::TaskKind::answer_choice;
    int batch_size = 1;
    double wall_time_s = 0.0;
    std::int64_t total_in = 0;
    std::int64_t total_out = 0;
    std::optional<double> mean_time_per_output_token_s; // sum e2e / sum n_out
    std::optional<double> decode_tpot_mean_s;           // mean over requests with n_out >= 2
    std::optional<double> throughput_tok_s;             // total_out / wall_time
    std::int64_t completed = 0;
    std::int64_t failed = 0;

    bool operator==(const TaskSummary &) const = default;
};

TaskSummary summarize_task(const runner::TaskRunRecord &record,
                           const std::vector<RequestMetrics> &per_request);
TaskSummary summarize_task(const runner::TaskRunRecord &record);

/// Summary-level metric lookup by stable identifier: wall_time,
/// mean_time_per_output_token, decode_tpot, throughput, total_in, total_out.
std::optional<double> metric_value(const TaskSummary &summary, std::string_view metric);
std::vector<std::string> summary_metric_names();

enum class Direction { ascending, descending }; // ascending: smaller is better

/// Rank 1 = best under the direction; ties receive the average of the
/// positions they span.
std::vector<double> rank_values(const std::vector<double> &values,
                                Direction direction = Direction::ascending);

struct ModelRank {
    std::string model_id;
    double value = 0.0;
    double rank = 0.0;

    bool operator==(const ModelRank &) const = default;
};

/// One summary per model. A null metric value is an error naming the
/// offending models.
std::vector<ModelRank> rank_by(const std::vector<TaskSummary> &summaries, std::string_view metric,
                               Direction direction = Direction::ascending);

struct SpearmanResult {
    std::optional<double> rho;
    std::string note; // reason when rho is null

    bool operator==(const SpearmanResult &) const = default;
};

/// Pearson correlation of two aligned rank vectors (exact under ties).
/// Identical rankings give exactly 1, exactly reversed rankings exactly -1.
/// Zero variance in either vector yields a null rho with a reason.
SpearmanResult spearman_rho(const std::vector<double> &ranks_a,
                            const std::vector<double> &ranks_b);

struct ModelScore {
    std::string model_id;
    double value_a = 0.0;
    double rank_a = 0.0;
    double value_b = 0.0;
    double rank_b = 0.0;

    bool operator==(const ModelScore &) const = default;
};

struct RankingComparison {
    std::string metric_a;
    std::string metric_b;
    std::vector<ModelScore> models;
    SpearmanResult spearman;
    // Unordered model pairs ranked oppositely by the two metrics; each pair
    // sorted lexicographically, pair list sorted.
    std::vector<std::pair<std::string, std::string>> discordant_pairs;

    bool operator==(const RankingComparison &) const = default;
};

/// Pairs of models whose order inverts between per-token speed and task
/// completion. Both metrics are smaller-is-better.
RankingComparison discordance_report(const std::vector<TaskSummary> &summaries,
                                     std::string_view metric_a = "mean_time_per_output_token",
                                     std::string_view metric_b = "wall_time");

/// bytes = n_params * bits_per_param / 8; GB is decimal (1e9 bytes).
double estimate_model_memory_bytes(double n_params, double bits_per_param);
double estimate_model_memory_gb(double n_params, double bits_per_param);

} // namespace ttc::metrics
