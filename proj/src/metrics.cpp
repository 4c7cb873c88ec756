#include "ttc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ttc::metrics {

RequestMetrics request_metrics(const client::RequestTrace &trace) {
    RequestMetrics m;
    m.case_id = trace.case_id;
    m.n_in = trace.input_tokens;
    m.n_out = trace.output_tokens;
    if (!trace.ok()) {
        m.excluded = true;
        return m;
    }
    // A successful zero-token stream has no first delta; only the durations
    // whose endpoints exist are defined.
    if (trace.ts_first_delta) {
        m.ttft_s = static_cast<double>(*trace.ts_first_delta - trace.ts_dispatch) / 1e9;
    }
    if (trace.ts_done) {
        m.e2e_s = static_cast<double>(*trace.ts_done - trace.ts_dispatch) / 1e9;
    }
    if (trace.ts_first_delta && trace.ts_done) {
        m.decode_time_s = static_cast<double>(*trace.ts_done - *trace.ts_first_delta) / 1e9;
    }
    const std::int64_t n_out = m.n_out ? m.n_out->count : 0;
    if (n_out > 0 && m.e2e_s) {
        m.per_token_e2e_s = *m.e2e_s / static_cast<double>(n_out);
    }
    if (n_out > 1 && m.decode_time_s) {
        m.decode_tpot_s = *m.decode_time_s / static_cast<double>(n_out - 1);
    }
    return m;
}

TaskSummary summarize_task(const runner::TaskRunRecord &record,
                           const std::vector<RequestMetrics> &per_request) {
    if (per_request.size() != record.traces.size()) {
        throw ValidationError("summarize_task: " + std::to_string(per_request.size()) +
                              " metrics for " + std::to_string(record.traces.size()) + " traces");
    }
    TaskSummary s;
    s.run_id = record.run_id;
    s.model_id = record.model_id;
    s.task_kind = record.task_kind;
    s.batch_size = record.config.batch_size;
    s.wall_time_s = static_cast<double>(record.wall_end - record.wall_start) / 1e9;

    double e2e_sum = 0.0;
    double tpot_sum = 0.0;
    std::int64_t tpot_count = 0;
    for (const RequestMetrics &m : per_request) {
        if (m.excluded) {
            ++s.failed;
            continue;
        }
        ++s.completed;
        if (m.n_in) s.total_in += m.n_in->count;
        if (m.n_out) s.total_out += m.n_out->count;
        e2e_sum += m.e2e_s.value_or(0.0);
        if (m.decode_tpot_s) {
            tpot_sum += *m.decode_tpot_s;
            ++tpot_count;
        }
    }
    if (s.total_out > 0) {
        s.mean_time_per_output_token_s = e2e_sum / static_cast<double>(s.total_out);
    }
    if (tpot_count > 0) {
        s.decode_tpot_mean_s = tpot_sum / static_cast<double>(tpot_count);
    }
    if (s.wall_time_s > 0.0) {
        s.throughput_tok_s = static_cast<double>(s.total_out) / s.wall_time_s;
    }
    return s;
}

TaskSummary summarize_task(const runner::TaskRunRecord &record) {
    std::vector<RequestMetrics> per_request;
    per_request.reserve(record.traces.size());
    for (const client::RequestTrace &t : record.traces) {
        per_request.push_back(request_metrics(t));
    }
    return summarize_task(record, per_request);
}

std::vector<std::string> summary_metric_names() {
    return {"wall_time", "mean_time_per_output_token", "decode_tpot",
            "throughput", "total_in",                  "total_out"};
}

std::optional<double> metric_value(const TaskSummary &summary, std::string_view metric) {
    if (metric == "wall_time") return summary.wall_time_s;
    if (metric == "mean_time_per_output_token") return summary.mean_time_per_output_token_s;
    if (metric == "decode_tpot") return summary.decode_tpot_mean_s;
    if (metric == "throughput") return summary.throughput_tok_s;
    if (metric == "total_in") return static_cast<double>(summary.total_in);
    if (metric == "total_out") return static_cast<double>(summary.total_out);
    std::ostringstream os;
    os << "unknown summary metric \"" << metric << "\" (supported:";
    for (const std::string &name : summary_metric_names()) {
        os << " " << name;
    }
    os << ")";
    throw ValidationError(os.str());
}

std::vector<double> rank_values(const std::vector<double> &values, Direction direction) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return direction == Direction::ascending ? values[a] < values[b] : values[a] > values[b];
    });

    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        // Positions i+1 .. j+1 share one value; all get the average position.
        const double rank = static_cast<double>(i + j + 2) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

std::vector<ModelRank> rank_by(const std::vector<TaskSummary> &summaries, std::string_view metric,
                               Direction direction) {
    if (summaries.empty()) {
        throw ValidationError("rank_by: no summaries");
    }
    std::vector<double> values;
    values.reserve(summaries.size());
    std::vector<std::string> null_models;
    for (const TaskSummary &s : summaries) {
        const std::optional<double> v = metric_value(s, metric);
        if (!v) {
            null_models.push_back(s.model_id);
            values.push_back(0.0);
        } else {
            values.push_back(*v);
        }
    }
    if (!null_models.empty()) {
        std::ostringstream os;
        os << "rank_by: metric \"" << metric << "\" is null for:";
        for (const std::string &m : null_models) {
            os << " " << m;
        }
        throw ValidationError(os.str());
    }
    const std::vector<double> ranks = rank_values(values, direction);
    std::vector<ModelRank> out;
    out.reserve(summaries.size());
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        out.push_back({summaries[i].model_id, values[i], ranks[i]});
    }
    return out;
}

SpearmanResult spearman_rho(const std::vector<double> &ranks_a,
                            const std::vector<double> &ranks_b) {
    if (ranks_a.size() != ranks_b.size()) {
        throw ValidationError("spearman_rho: length mismatch (" + std::to_string(ranks_a.size()) +
                              " vs " + std::to_string(ranks_b.size()) + ")");
    }
    const std::size_t n = ranks_a.size();
    if (n < 2) {
        throw ValidationError("spearman_rho: need at least 2 entries, got " + std::to_string(n));
    }

    const auto constant = [](const std::vector<double> &v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(ranks_a) || constant(ranks_b)) {
        return {std::nullopt, std::string("zero variance in ") +
                                  (constant(ranks_a) ? "first" : "second") + " rank vector"};
    }

    bool identical = true;
    bool reversed = true;
    for (std::size_t i = 0; i < n; ++i) {
        identical = identical && ranks_a[i] == ranks_b[i];
        // A reversal of a rank vector on n items maps rank r to n + 1 - r.
        reversed = reversed && ranks_b[i] == static_cast<double>(n + 1) - ranks_a[i];
    }
    if (identical) return {1.0, ""};
    if (reversed) return {-1.0, ""};

    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += ranks_a[i];
        mean_b += ranks_b[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);

    double cov = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = ranks_a[i] - mean_a;
        const double db = ranks_b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    const double rho = cov / std::sqrt(var_a * var_b);
    return {std::clamp(rho, -1.0, 1.0), ""};
}

RankingComparison discordance_report(const std::vector<TaskSummary> &summaries,
                                     std::string_view metric_a, std::string_view metric_b) {
    std::vector<TaskSummary> usable;
    for (const TaskSummary &s : summaries) {
        if (metric_value(s, metric_a) && metric_value(s, metric_b)) {
            usable.push_back(s);
        }
    }
    if (usable.size() < 2) {
        throw ValidationError("discordance_report: need at least 2 models with non-null \"" +
                              std::string(metric_a) + "\" and \"" + std::string(metric_b) +
                              "\", got " + std::to_string(usable.size()));
    }
    for (std::size_t i = 0; i < usable.size(); ++i) {
        for (std::size_t j = i + 1; j < usable.size(); ++j) {
            if (usable[i].model_id == usable[j].model_id) {
                throw ValidationError("discordance_report: duplicate model id " +
                                      usable[i].model_id);
            }
        }
    }

    const std::vector<ModelRank> by_a = rank_by(usable, metric_a, Direction::ascending);
    const std::vector<ModelRank> by_b = rank_by(usable, metric_b, Direction::ascending);

    RankingComparison cmp;
    cmp.metric_a = std::string(metric_a);
    cmp.metric_b = std::string(metric_b);
    std::vector<double> ra;
    std::vector<double> rb;
    for (std::size_t i = 0; i < usable.size(); ++i) {
        cmp.models.push_back(
            {usable[i].model_id, by_a[i].value, by_a[i].rank, by_b[i].value, by_b[i].rank});
        ra.push_back(by_a[i].rank);
        rb.push_back(by_b[i].rank);
    }
    cmp.spearman = spearman_rho(ra, rb);

    for (std::size_t i = 0; i < cmp.models.size(); ++i) {
        for (std::size_t j = i + 1; j < cmp.models.size(); ++j) {
            const double da = cmp.models[i].rank_a - cmp.models[j].rank_a;
            const double db = cmp.models[i].rank_b - cmp.models[j].rank_b;
            if (da * db < 0.0) {
                std::string first = cmp.models[i].model_id;
                std::string second = cmp.models[j].model_id;
                if (second < first) {
                    std::swap(first, second);
                }
                cmp.discordant_pairs.emplace_back(std::move(first), std::move(second));
            }
        }
    }
    std::sort(cmp.discordant_pairs.begin(), cmp.discordant_pairs.end());
    return cmp;
}

double estimate_model_memory_bytes(double n_params, double bits_per_param) {
    if (!(n_params > 0.0)) {
        throw ValidationError("estimate_model_memory: n_params must be positive");
    }
    if (!(bits_per_param > 0.0)) {
        throw ValidationError("estimate_model_memory: bits_per_param must be positive");
    }
    return n_params * bits_per_param / 8.0;
}

double estimate_model_memory_gb(double n_params, double bits_per_param) {
    return estimate_model_memory_bytes(n_params, bits_per_param) / 1e9;
}

} // namespace ttc::metrics
