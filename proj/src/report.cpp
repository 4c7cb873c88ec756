#include "ttc/report.hpp"

#include "ttc/version.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using nlohmann::json;

namespace ttc::report {

namespace {

void write_file(const std::string &path, const std::string &bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write file: " + path);
    }
    out << bytes;
    if (!out) {
        throw IoError("failed writing file: " + path);
    }
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::string csv_escape(const std::string &field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out += c;
        }
    }
    out += "\"";
    return out;
}

std::string opt_seconds_cell(const std::optional<double> &v) {
    return v ? format_seconds(*v) : std::string();
}

json opt_to_json(const std::optional<double> &v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<double> json_to_opt(const json &j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json summary_to_json(const metrics::TaskSummary &s) {
    return {{"run_id", s.run_id},
            {"model", s.model_id},
            {"task", suite::to_string(s.task_kind)},
            {"batch", s.batch_size},
            {"wall_time_s", s.wall_time_s},
            {"mean_time_per_output_token_s", opt_to_json(s.mean_time_per_output_token_s)},
            {"decode_tpot_s", opt_to_json(s.decode_tpot_mean_s)},
            {"throughput_tok_s", opt_to_json(s.throughput_tok_s)},
            {"total_in", s.total_in},
            {"total_out", s.total_out},
            {"completed", s.completed},
            {"failed", s.failed}};
}

metrics::TaskSummary summary_from_json(const json &j) {
    metrics::TaskSummary s;
    s.run_id = j.at("run_id").get<std::string>();
    s.model_id = j.at("model").get<std::string>();
    s.task_kind = suite::task_kind_from_string(j.at("task").get<std::string>());
    s.batch_size = j.at("batch").get<int>();
    s.wall_time_s = j.at("wall_time_s").get<double>();
    s.mean_time_per_output_token_s = json_to_opt(j.at("mean_time_per_output_token_s"));
    s.decode_tpot_mean_s = json_to_opt(j.at("decode_tpot_s"));
    s.throughput_tok_s = json_to_opt(j.at("throughput_tok_s"));
    s.total_in = j.at("total_in").get<std::int64_t>();
    s.total_out = j.at("total_out").get<std::int64_t>();
    s.completed = j.at("completed").get<std::int64_t>();
    s.failed = j.at("failed").get<std::int64_t>();
    return s;
}

json run_to_json(const RunMeta &r) {
    return {{"run_id", r.run_id},
            {"model", r.model_id},
            {"task", suite::to_string(r.task_kind)},
            {"batch", r.batch_size},
            {"wall_start", r.wall_start},
            {"wall_end", r.wall_end},
            {"n_traces", r.n_traces},
            {"tool_version", r.tool_version}};
}

RunMeta run_from_json(const json &j) {
    RunMeta r;
    r.run_id = j.at("run_id").get<std::string>();
    r.model_id = j.at("model").get<std::string>();
    r.task_kind = suite::task_kind_from_string(j.at("task").get<std::string>());
    r.batch_size = j.at("batch").get<int>();
    r.wall_start = j.at("wall_start").get<std::int64_t>();
    r.wall_end = j.at("wall_end").get<std::int64_t>();
    r.n_traces = j.at("n_traces").get<std::size_t>();
    r.tool_version = j.at("tool_version").get<std::string>();
    return r;
}

json comparison_to_json(const ComparisonEntry &e) {
    json models = json::array();
    for (const metrics::ModelScore &m : e.comparison.models) {
        models.push_back({{"model", m.model_id},
                          {"value_a", m.value_a},
                          {"rank_a", m.rank_a},
                          {"value_b", m.value_b},
                          {"rank_b", m.rank_b}});
    }
    json pairs = json::array();
    for (const auto &[a, b] : e.comparison.discordant_pairs) {
        pairs.push_back(json::array({a, b}));
    }
    return {{"task", suite::to_string(e.task_kind)},
            {"batch", e.batch_size},
            {"metric_a", e.comparison.metric_a},
            {"metric_b", e.comparison.metric_b},
            {"models", models},
            {"spearman_rho", opt_to_json(e.comparison.spearman.rho)},
            {"rho_note", e.comparison.spearman.note},
            {"discordant_pairs", pairs}};
}

ComparisonEntry comparison_from_json(const json &j) {
    ComparisonEntry e;
    e.task_kind = suite::task_kind_from_string(j.at("task").get<std::string>());
    e.batch_size = j.at("batch").get<int>();
    e.comparison.metric_a = j.at("metric_a").get<std::string>();
    e.comparison.metric_b = j.at("metric_b").get<std::string>();
    for (const json &m : j.at("models")) {
        e.comparison.models.push_back({m.at("model").get<std::string>(),
                                       m.at("value_a").get<double>(),
                                       m.at("rank_a").get<double>(),
                                       m.at("value_b").get<double>(),
                                       m.at("rank_b").get<double>()});
    }
    e.comparison.spearman.rho = json_to_opt(j.at("spearman_rho"));
    e.comparison.spearman.note = j.at("rho_note").get<std::string>();
    for (const json &p : j.at("discordant_pairs")) {
        e.comparison.discordant_pairs.emplace_back(p.at(0).get<std::string>(),
                                                   p.at(1).get<std::string>());
    }
    return e;
}

} // namespace

std::string format_seconds(double seconds) {
    return format_fixed(seconds, 6);
}

RunMeta run_meta_of(const runner::TaskRunRecord &record) {
    RunMeta r;
    r.run_id = record.run_id;
    r.model_id = record.model_id;
    r.task_kind = record.task_kind;
    r.batch_size = record.config.batch_size;
    r.wall_start = record.wall_start;
    r.wall_end = record.wall_end;
    r.n_traces = record.traces.size();
    r.tool_version = record.tool_version;
    return r;
}

ReportBundle build_bundle(const std::vector<runner::TaskRunRecord> &records) {
    ReportBundle bundle;
    bundle.tool_version = kVersion;
    for (const runner::TaskRunRecord &record : records) {
        bundle.runs.push_back(run_meta_of(record));
        bundle.summaries.push_back(metrics::summarize_task(record));
    }
    const auto key = [](const metrics::TaskSummary &s) {
        return std::make_tuple(s.model_id, std::string(suite::to_string(s.task_kind)),
                               s.batch_size);
    };
    std::sort(bundle.summaries.begin(), bundle.summaries.end(),
              [&](const auto &a, const auto &b) { return key(a) < key(b); });
    std::sort(bundle.runs.begin(), bundle.runs.end(), [](const RunMeta &a, const RunMeta &b) {
        return std::make_tuple(a.model_id, std::string(suite::to_string(a.task_kind)),
                               a.batch_size) <
               std::make_tuple(b.model_id, std::string(suite::to_string(b.task_kind)),
                               b.batch_size);
    });

    std::map<std::pair<std::string, int>, std::vector<metrics::TaskSummary>> groups;
    for (const metrics::TaskSummary &s : bundle.summaries) {
        groups[{suite::to_string(s.task_kind), s.batch_size}].push_back(s);
    }
    for (const auto &[group_key, group] : groups) {
        const auto comparable = std::count_if(group.begin(), group.end(), [](const auto &s) {
            return s.mean_time_per_output_token_s.has_value();
        });
        if (comparable < 2) {
            continue;
        }
        ComparisonEntry entry;
        entry.task_kind = suite::task_kind_from_string(group_key.first);
        entry.batch_size = group_key.second;
        entry.comparison = metrics::discordance_report(group);
        bundle.comparisons.push_back(std::move(entry));
    }
    validate_bundle(bundle);
    return bundle;
}

void validate_bundle(const ReportBundle &bundle) {
    std::set<std::string> run_ids;
    for (const RunMeta &r : bundle.runs) {
        run_ids.insert(r.run_id);
    }
    for (const metrics::TaskSummary &s : bundle.summaries) {
        if (run_ids.find(s.run_id) == run_ids.end()) {
            throw ValidationError("report bundle: summary references unknown run id \"" +
                                  s.run_id + "\"");
        }
    }
}

std::string summary_document_bytes(const ReportBundle &bundle) {
    validate_bundle(bundle);
    json runs = json::array();
    for (const RunMeta &r : bundle.runs) {
        runs.push_back(run_to_json(r));
    }
    json summaries = json::array();
    for (const metrics::TaskSummary &s : bundle.summaries) {
        summaries.push_back(summary_to_json(s));
    }
    json comparisons = json::array();
    for (const ComparisonEntry &e : bundle.comparisons) {
        comparisons.push_back(comparison_to_json(e));
    }
    const json doc = {{"schema", "report/v1"},
                      {"tool_version", bundle.tool_version},
                      {"runs", runs},
                      {"summaries", summaries},
                      {"comparisons", comparisons}};
    return doc.dump(2) + "\n";
}

void emit_summary_document(const ReportBundle &bundle, const std::string &path) {
    write_file(path, summary_document_bytes(bundle));
}

ReportBundle load_summary_document(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open summary document: " + path);
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw ValidationError(path + ": malformed summary document");
    }
    const std::string schema = doc.value("schema", "");
    if (schema != "report/v1") {
        throw ValidationError(path + ": unsupported schema \"" + schema +
                              "\" (supported: report/v1)");
    }
    ReportBundle bundle;
    bundle.tool_version = doc.at("tool_version").get<std::string>();
    for (const json &r : doc.at("runs")) {
        bundle.runs.push_back(run_from_json(r));
    }
    for (const json &s : doc.at("summaries")) {
        bundle.summaries.push_back(summary_from_json(s));
    }
    for (const json &e : doc.at("comparisons")) {
        bundle.comparisons.push_back(comparison_from_json(e));
    }
    validate_bundle(bundle);
    return bundle;
}

std::string csv_bytes(const std::vector<metrics::TaskSummary> &summaries) {
    std::ostringstream out;
    out << "model,task,batch,wall_time_s,mean_time_per_output_token_s,decode_tpot_s,"
           "throughput_tok_s,total_in,total_out,completed,failed\r\n";
    for (const metrics::TaskSummary &s : summaries) {
        out << csv_escape(s.model_id) << "," << suite::to_string(s.task_kind) << ","
            << s.batch_size << "," << format_seconds(s.wall_time_s) << ","
            << opt_seconds_cell(s.mean_time_per_output_token_s) << ","
            << opt_seconds_cell(s.decode_tpot_mean_s) << ","
            << opt_seconds_cell(s.throughput_tok_s) << "," << s.total_in << "," << s.total_out
            << "," << s.completed << "," << s.failed << "\r\n";
    }
    return out.str();
}

void emit_csv(const std::vector<metrics::TaskSummary> &summaries, const std::string &path) {
    write_file(path, csv_bytes(summaries));
}

namespace {

std::string md_cell(const std::optional<double> &v) {
    return v ? format_seconds(*v) : std::string("n/a");
}

} // namespace

std::string markdown_bytes(const ReportBundle &bundle) {
    validate_bundle(bundle);
    std::ostringstream out;
    out << "# Speed benchmark report\n\n";
    out << "Tool version: " << bundle.tool_version << "\n\n";

    std::map<std::string, std::vector<const metrics::TaskSummary *>> by_task;
    for (const metrics::TaskSummary &s : bundle.summaries) {
        by_task[suite::to_string(s.task_kind)].push_back(&s);
    }
    for (const auto &[task, rows] : by_task) {
        out << "## Task: " << task << "\n\n";
        out << "| model | batch | wall_time_s | mean_time_per_output_token_s | decode_tpot_s | "
               "throughput_tok_s | total_in | total_out | completed | failed |\n";
        out << "|---|---|---|---|---|---|---|---|---|---|\n";
        for (const metrics::TaskSummary *s : rows) {
            out << "| " << s->model_id << " | " << s->batch_size << " | "
                << format_seconds(s->wall_time_s) << " | "
                << md_cell(s->mean_time_per_output_token_s) << " | "
                << md_cell(s->decode_tpot_mean_s) << " | " << md_cell(s->throughput_tok_s)
                << " | " << s->total_in << " | " << s->total_out << " | " << s->completed
                << " | " << s->failed << " |\n";
        }
        out << "\n";
    }

    out << "## Ranking discordance\n\n";
    if (bundle.comparisons.empty()) {
        out << "No comparisons available (fewer than two comparable models).\n";
        return out.str();
    }
    for (const ComparisonEntry &e : bundle.comparisons) {
        out << "### " << suite::to_string(e.task_kind) << ", batch " << e.batch_size << "\n\n";
        if (e.comparison.spearman.rho) {
            out << "Spearman rho (" << e.comparison.metric_a << " vs " << e.comparison.metric_b
                << "): " << format_seconds(*e.comparison.spearman.rho) << "\n\n";
        } else {
            out << "Spearman rho (" << e.comparison.metric_a << " vs " << e.comparison.metric_b
                << "): n/a, " << e.comparison.spearman.note << "\n\n";
        }
        if (e.comparison.discordant_pairs.empty()) {
            out << "No inversions: the per-token and task-completion rankings agree.\n\n";
            continue;
        }
        for (const auto &[a, b] : e.comparison.discordant_pairs) {
            // Within the pair, the member ranked better by metric_a is the
            // one the inversion is about.
            std::string fast = a;
            std::string slow = b;
            const auto find = [&](const std::string &id) {
                for (const metrics::ModelScore &ms : e.comparison.models) {
                    if (ms.model_id == id) return ms;
                }
                throw ValidationError("comparison pair references unknown model " + id);
            };
            const metrics::ModelScore sa = find(a);
            const metrics::ModelScore sb = find(b);
            if (sb.rank_a < sa.rank_a) {
                std::swap(fast, slow);
            }
            out << "- `" << fast << "` is fastest per token but not fastest to complete the task "
                << "when compared with `" << slow << "`.\n";
        }
        out << "\n";
    }
    std::string text = out.str();
    while (!text.empty() && text.back() == '\n') {
        text.pop_back();
    }
    return text + "\n";
}

void emit_markdown(const ReportBundle &bundle, const std::string &path) {
    write_file(path, markdown_bytes(bundle));
}

namespace {

constexpr double kPanelPlotW = 320.0;
constexpr double kPanelPlotH = 200.0;
constexpr double kPlotTop = 70.0;
constexpr double kPlotBottom = 270.0;

std::string coord(double v) {
    return format_fixed(v, 2);
}

void svg_text(std::ostringstream &out, double x, double y, const std::string &body,
              const char *anchor = "middle", int size = 10) {
    out << "<text x=\"" << coord(x) << "\" y=\"" << coord(y) << "\" font-family=\"sans-serif\""
        << " font-size=\"" << size << "\" text-anchor=\"" << anchor << "\">" << body
        << "</text>\n";
}

void svg_bar(std::ostringstream &out, double x, double w, double value, double max_value,
             const char *fill) {
    const double h = max_value > 0.0 ? value / max_value * kPanelPlotH : 0.0;
    out << "<rect x=\"" << coord(x) << "\" y=\"" << coord(kPlotBottom - h) << "\" width=\""
        << coord(w) << "\" height=\"" << coord(h) << "\" fill=\"" << fill << "\"/>\n";
}

void svg_axes(std::ostringstream &out, double x0, const std::string &title,
              const std::string &max_label) {
    svg_text(out, x0 + kPanelPlotW / 2.0, 30.0, title, "middle", 13);
    out << "<line x1=\"" << coord(x0) << "\" y1=\"" << coord(kPlotTop) << "\" x2=\"" << coord(x0)
        << "\" y2=\"" << coord(kPlotBottom) << "\" stroke=\"#333333\"/>\n";
    out << "<line x1=\"" << coord(x0) << "\" y1=\"" << coord(kPlotBottom) << "\" x2=\""
        << coord(x0 + kPanelPlotW) << "\" y2=\"" << coord(kPlotBottom)
        << "\" stroke=\"#333333\"/>\n";
    svg_text(out, x0 - 4.0, kPlotTop + 4.0, max_label, "end", 9);
    svg_text(out, x0 - 4.0, kPlotBottom, "0", "end", 9);
}

std::string bar_label(const std::string &model_id, int batch, bool batches_differ) {
    std::string label = model_id;
    if (batches_differ) {
        label += " b" + std::to_string(batch);
    }
    if (label.size() > 20) {
        label = label.substr(0, 19) + "~";
    }
    return label;
}

std::string xml_escape(const std::string &text) {
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string panel_svg_bytes(const std::vector<metrics::TaskSummary> &summaries) {
    if (summaries.empty()) {
        throw ValidationError("panel: no summaries to draw");
    }
    for (const metrics::TaskSummary &s : summaries) {
        if (s.task_kind != summaries.front().task_kind) {
            throw ValidationError(std::string("panel: mixed tasks (") +
                                  suite::to_string(summaries.front().task_kind) + " vs " +
                                  suite::to_string(s.task_kind) + ")");
        }
    }
    const std::size_t n = summaries.size();
    const bool batches_differ =
        std::any_of(summaries.begin(), summaries.end(),
                    [&](const auto &s) { return s.batch_size != summaries.front().batch_size; });

    double max_pt = 0.0;
    double max_wall = 0.0;
    double max_tok = 0.0;
    for (const metrics::TaskSummary &s : summaries) {
        if (s.mean_time_per_output_token_s) {
            max_pt = std::max(max_pt, *s.mean_time_per_output_token_s);
        }
        max_wall = std::max(max_wall, s.wall_time_s);
        max_tok = std::max({max_tok, static_cast<double>(s.total_in),
                            static_cast<double>(s.total_out)});
    }

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1240\" height=\"340\" "
           "viewBox=\"0 0 1240 340\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"1240\" height=\"340\" fill=\"#ffffff\"/>\n";
    svg_text(out, 620.0, 14.0,
             std::string("Task: ") + suite::to_string(summaries.front().task_kind), "middle", 12);

    const double origins[3] = {50.0, 450.0, 850.0};
    svg_axes(out, origins[0], "Time per output token (s)",
             max_pt > 0.0 ? format_seconds(max_pt) : "0");
    svg_axes(out, origins[1], "Task wall time (s)",
             max_wall > 0.0 ? format_seconds(max_wall) : "0");
    svg_axes(out, origins[2], "Input and output tokens",
             std::to_string(static_cast<std::int64_t>(max_tok)));

    // Panel 3 legend.
    out << "<rect x=\"" << coord(origins[2] + kPanelPlotW - 70.0)
        << "\" y=\"44\" width=\"10\" height=\"10\" fill=\"#70ad47\"/>\n";
    svg_text(out, origins[2] + kPanelPlotW - 56.0, 53.0, "in", "start", 9);
    out << "<rect x=\"" << coord(origins[2] + kPanelPlotW - 36.0)
        << "\" y=\"44\" width=\"10\" height=\"10\" fill=\"#ffc000\"/>\n";
    svg_text(out, origins[2] + kPanelPlotW - 22.0, 53.0, "out", "start", 9);

    const double slot = kPanelPlotW / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const metrics::TaskSummary &s = summaries[i];
        const double center0 = origins[0] + (static_cast<double>(i) + 0.5) * slot;
        const double center1 = origins[1] + (static_cast<double>(i) + 0.5) * slot;
        const double center2 = origins[2] + (static_cast<double>(i) + 0.5) * slot;
        const double bar_w = slot * 0.6;

        if (s.mean_time_per_output_token_s) {
            svg_bar(out, center0 - bar_w / 2.0, bar_w, *s.mean_time_per_output_token_s, max_pt,
                    "#4472c4");
        } else {
            svg_text(out, center0, kPlotBottom - 6.0, "n/a", "middle", 9);
        }
        svg_bar(out, center1 - bar_w / 2.0, bar_w, s.wall_time_s, max_wall, "#ed7d31");

        const double pair_w = slot * 0.3;
        svg_bar(out, center2 - pair_w, pair_w, static_cast<double>(s.total_in), max_tok,
                "#70ad47");
        svg_bar(out, center2, pair_w, static_cast<double>(s.total_out), max_tok, "#ffc000");

        const std::string label =
            xml_escape(bar_label(s.model_id, s.batch_size, batches_differ));
        svg_text(out, center0, kPlotBottom + 14.0, label, "middle", 9);
        svg_text(out, center1, kPlotBottom + 14.0, label, "middle", 9);
        svg_text(out, center2, kPlotBottom + 14.0, label, "middle", 9);
    }
    out << "</svg>\n";
    return out.str();
}

void emit_panel_svg(const std::vector<metrics::TaskSummary> &summaries, const std::string &path) {
    write_file(path, panel_svg_bytes(summaries));
}

} // namespace ttc::report
