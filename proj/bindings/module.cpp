#include "ttc/client.hpp"
#include "ttc/clock.hpp"
#include "ttc/errors.hpp"
#include "ttc/hash.hpp"
#include "ttc/metrics.hpp"
#include "ttc/mockserver.hpp"
#include "ttc/report.hpp"
#include "ttc/runner.hpp"
#include "ttc/suite.hpp"
#include "ttc/tokenize.hpp"
#include "ttc/version.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace py = pybind11;
namespace fs = std::filesystem;

namespace {

bool valid_env_var_name(const std::string &name) {
    if (name.empty()) {
        return false;
    }
    const auto head = [](char c) { return c == '_' || std::isalpha(static_cast<unsigned char>(c)); };
    const auto tail = [](char c) { return c == '_' || std::isalnum(static_cast<unsigned char>(c)); };
    if (!head(name.front())) {
        return false;
    }
    return std::all_of(name.begin() + 1, name.end(), tail);
}

ttc::metrics::Direction direction_of(bool ascending) {
    return ascending ? ttc::metrics::Direction::ascending : ttc::metrics::Direction::descending;
}

py::list to_byte_list(const std::vector<std::string> &pieces) {
    py::list out;
    for (const std::string &piece : pieces) {
        out.append(py::bytes(piece));
    }
    return out;
}

py::dict summary_dict(const ttc::metrics::TaskSummary &s) {
    py::dict d;
    d["run_id"] = s.run_id;
    d["model_id"] = s.model_id;
    d["task_kind"] = std::string(ttc::suite::to_string(s.task_kind));
    d["batch_size"] = s.batch_size;
    d["wall_time_s"] = s.wall_time_s;
    d["total_in"] = s.total_in;
    d["total_out"] = s.total_out;
    d["mean_time_per_output_token_s"] = s.mean_time_per_output_token_s;
    d["decode_tpot_mean_s"] = s.decode_tpot_mean_s;
    d["throughput_tok_s"] = s.throughput_tok_s;
    d["completed"] = s.completed;
    d["failed"] = s.failed;
    return d;
}

py::dict build_suite_file(const std::string &dataset, const std::string &out,
                          const std::vector<std::string> &tasks, const std::string &templates,
                          const std::string &created_at) {
    std::set<ttc::suite::TaskKind> kinds;
    for (const std::string &name : tasks) {
        kinds.insert(ttc::suite::task_kind_from_string(name));
    }
    const auto questions = ttc::suite::load_questions(dataset);
    const auto tpls = templates.empty() ? ttc::suite::default_templates()
                                        : ttc::suite::load_templates(templates);
    const std::string digest = ttc::digest_file(dataset);
    const ttc::suite::TaskSuite s =
        ttc::suite::build_suite(questions, kinds, tpls, digest, created_at);
    ttc::suite::save_suite(s, out);
    py::dict d;
    d["suite_id"] = s.suite_id;
    d["total_cases"] = s.total_cases();
    d["n_questions"] = questions.size();
    d["path"] = out;
    return d;
}

py::dict validate_dataset_file(const std::string &dataset) {
    const auto questions = ttc::suite::load_questions(dataset);
    const auto report = ttc::suite::validate_dataset(questions);
    py::dict counts;
    for (const auto &[category, n] : report.counts_by_category()) {
        counts[py::str(category)] = n;
    }
    py::list issues;
    for (const auto &issue : report.issues) {
        py::dict row;
        row["category"] = issue.category;
        row["question_id"] = issue.question_id;
        row["detail"] = issue.detail;
        issues.append(row);
    }
    py::dict d;
    d["n_questions"] = questions.size();
    d["total_issues"] = report.total();
    d["counts"] = counts;
    d["issues"] = issues;
    return d;
}

std::vector<std::string> run_benchmark(const std::string &suite, const std::string &endpoint,
                                       const std::vector<std::string> &models,
                                       const std::string &out_dir, std::vector<int> batches,
                                       const std::string &mode, int reps, int warmup,
                                       int max_tokens, double temperature,
                                       std::optional<std::int64_t> seed, int timeout_ms,
                                       const std::string &auth_env, const std::string &merges) {
    if (!auth_env.empty() && !valid_env_var_name(auth_env)) {
        throw ttc::ValidationError(
            "auth_env expects the NAME of an environment variable (letters, digits, "
            "underscore); never pass key material as an argument");
    }
    const ttc::suite::TaskSuite s = ttc::suite::load_suite(suite);

    std::vector<ttc::client::ModelTarget> targets;
    for (const std::string &model : models) {
        ttc::client::ModelTarget t;
        t.base_url = endpoint;
        t.model_id = model;
        if (!auth_env.empty()) {
            t.auth_env = auth_env;
        }
        t.temperature = temperature;
        t.max_output_tokens = max_tokens;
        t.seed = seed;
        targets.push_back(std::move(t));
    }

    if (batches.empty()) {
        batches.push_back(1);
    }
    std::vector<ttc::runner::RunConfig> configs;
    for (const int batch : batches) {
        ttc::runner::RunConfig config;
        config.batch_size = batch;
        config.mode = ttc::runner::batch_mode_from_string(mode);
        config.repetitions = reps;
        config.warmup_count = warmup;
        config.timeout_ms = timeout_ms;
        config.out_dir = out_dir;
        configs.push_back(config);
    }

    std::optional<ttc::tokenize::MergeTable> table;
    ttc::client::TokenCountConfig counting;
    if (!merges.empty()) {
        table = ttc::tokenize::load_merges(merges);
        counting.table = &*table;
    }

    fs::create_directories(out_dir);
    std::vector<std::string> written;
    {
        py::gil_scoped_release release;
        const auto records = ttc::runner::run_matrix(s, targets, configs,
                                                     ttc::steady_clock_instance(), counting,
                                                     &std::cerr);
        for (const ttc::runner::TaskRunRecord &record : records) {
            written.push_back((fs::path(out_dir) / (record.run_id + ".jsonl")).string());
        }
    }
    return written;
}

std::size_t analyze_runs(const std::string &runs_dir, const std::string &out) {
    if (!fs::exists(runs_dir) || !fs::is_directory(runs_dir)) {
        throw ttc::IoError("runs directory not found: " + runs_dir);
    }
    std::vector<std::string> files;
    for (const auto &entry : fs::directory_iterator(runs_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
            files.push_back(entry.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw ttc::ValidationError("no run records found in " + runs_dir);
    }
    std::vector<ttc::runner::TaskRunRecord> records;
    records.reserve(files.size());
    for (const std::string &file : files) {
        records.push_back(ttc::runner::load_traces(file));
    }
    const ttc::report::ReportBundle bundle = ttc::report::build_bundle(records);
    ttc::report::emit_summary_document(bundle, out);
    return records.size();
}

std::vector<std::string> render_reports(const std::string &summary, const std::string &format,
                                        const std::string &out_dir) {
    const ttc::report::ReportBundle bundle = ttc::report::load_summary_document(summary);
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    if (format == "csv") {
        const std::string path = (fs::path(out_dir) / "summary.csv").string();
        ttc::report::emit_csv(bundle.summaries, path);
        written.push_back(path);
    } else if (format == "md") {
        const std::string path = (fs::path(out_dir) / "report.md").string();
        ttc::report::emit_markdown(bundle, path);
        written.push_back(path);
    } else if (format == "svg") {
        std::map<std::string, std::vector<ttc::metrics::TaskSummary>> by_task;
        for (const ttc::metrics::TaskSummary &summary_row : bundle.summaries) {
            by_task[ttc::suite::to_string(summary_row.task_kind)].push_back(summary_row);
        }
        if (by_task.empty()) {
            throw ttc::ValidationError("summary document has no summaries to draw");
        }
        for (const auto &[task, summaries] : by_task) {
            const std::string path = (fs::path(out_dir) / ("panel_" + task + ".svg")).string();
            ttc::report::emit_panel_svg(summaries, path);
            written.push_back(path);
        }
    } else {
        throw ttc::ValidationError("unknown report format \"" + format +
                                   "\" (allowed: csv, md, svg)");
    }
    return written;
}

py::list load_summaries(const std::string &summary) {
    const ttc::report::ReportBundle bundle = ttc::report::load_summary_document(summary);
    py::list out;
    for (const auto &s : bundle.summaries) {
        out.append(summary_dict(s));
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Task-level speed benchmark for streaming chat endpoints";
    m.attr("__version__") = ttc::kVersion;

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const ttc::IoError &e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const ttc::ValidationError &e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    // ---- tokenization ----
    m.def("approx_token_count", [](const std::string &text) {
        return ttc::tokenize::approx_token_count(text);
    }, py::arg("text"), "Byte-length fallback estimate: ceil(len/4).");

    py::class_<ttc::tokenize::MergeTable>(m, "MergeTable")
        .def_static("load", &ttc::tokenize::load_merges, py::arg("path"),
                    "Load a merge file: one \"left right\" pair per line, rank = order.")
        .def_static("parse",
                    [](const std::string &text, const std::string &source_name) {
                        std::istringstream in(text);
                        return ttc::tokenize::parse_merges(in, source_name);
                    },
                    py::arg("text"), py::arg("source_name") = "<string>")
        .def_property_readonly("name", &ttc::tokenize::MergeTable::name)
        .def("__len__", &ttc::tokenize::MergeTable::size)
        .def("segment",
             [](const ttc::tokenize::MergeTable &table, const std::string &text) {
                 return to_byte_list(ttc::tokenize::bpe_segment(text, table));
             },
             py::arg("text"), "Greedy lowest-rank segmentation; pieces concatenate to the input.")
        .def("count",
             [](const ttc::tokenize::MergeTable &table, const std::string &text) {
                 return ttc::tokenize::bpe_segment(text, table).size();
             },
             py::arg("text"));

    m.def("count_tokens",
          [](const std::string &text, const std::vector<std::string> &strategies,
             std::optional<std::int64_t> server_count,
             const ttc::tokenize::MergeTable *table) {
              std::vector<ttc::tokenize::TokenSource> order;
              for (const std::string &name : strategies) {
                  order.push_back(ttc::tokenize::token_source_from_string(name));
              }
              ttc::tokenize::TokenCountContext context;
              context.server_count = server_count;
              context.table = table;
              const auto record = ttc::tokenize::count_tokens(text, order, context);
              return py::make_tuple(record.count,
                                    std::string(ttc::tokenize::to_string(record.source)));
          },
          py::arg("text"), py::arg("strategies"), py::arg("server_count") = py::none(),
          py::arg("table") = nullptr,
          "First applicable strategy wins; returns (count, source).");

    // ---- metrics ----
    m.def("rank_values",
          [](const std::vector<double> &values, bool ascending) {
              return ttc::metrics::rank_values(values, direction_of(ascending));
          },
          py::arg("values"), py::arg("ascending") = true,
          "Rank 1 = best; ties get the average of the spanned positions.");

    m.def("spearman_rho",
          [](const std::vector<double> &ranks_a, const std::vector<double> &ranks_b) {
              const auto r = ttc::metrics::spearman_rho(ranks_a, ranks_b);
              return py::make_tuple(r.rho, r.note);
          },
          py::arg("ranks_a"), py::arg("ranks_b"),
          "Pearson correlation of two aligned rank vectors; (rho | None, note).");

    m.def("estimate_model_memory_bytes", &ttc::metrics::estimate_model_memory_bytes,
          py::arg("n_params"), py::arg("bits_per_param"));
    m.def("estimate_model_memory_gb", &ttc::metrics::estimate_model_memory_gb,
          py::arg("n_params"), py::arg("bits_per_param"));

    // ---- suite ----
    m.def("task_kind_names", &ttc::suite::task_kind_names);
    m.def("build_suite_file", &build_suite_file, py::arg("dataset"), py::arg("out"),
          py::arg("tasks") =
              std::vector<std::string>{"answer_choice", "paraphrase", "open_answer"},
          py::arg("templates") = "", py::arg("created_at") = "",
          "Render prompt cases from a JSONL dataset into a suite file.");
    m.def("validate_dataset_file", &validate_dataset_file, py::arg("dataset"),
          "Report-only dataset check; returns issue counts by category.");

    // ---- running and analysis ----
    m.def("run_benchmark", &run_benchmark, py::arg("suite"), py::arg("endpoint"),
          py::arg("models"), py::arg("out_dir"), py::arg("batches") = std::vector<int>{1},
          py::arg("mode") = "wave", py::arg("reps") = 1, py::arg("warmup") = 0,
          py::arg("max_tokens") = 1024, py::arg("temperature") = 0.0,
          py::arg("seed") = py::none(), py::arg("timeout_ms") = 30000, py::arg("auth_env") = "",
          py::arg("merges") = "",
          "Execute every model x task x batch cell; returns the trace file paths.");
    m.def("analyze_runs", &analyze_runs, py::arg("runs_dir"), py::arg("out"),
          "Summarize a directory of trace files into a summary document.");
    m.def("render_reports", &render_reports, py::arg("summary"), py::arg("format"),
          py::arg("out_dir"), "Emit csv, md, or svg artifacts from a summary document.");
    m.def("load_summaries", &load_summaries, py::arg("summary"),
          "Rows of a summary document as dicts.");

    // ---- mock endpoint ----
    m.def("detect_task_tag",
          [](const std::string &prompt) { return ttc::mock::detect_task_tag(prompt); },
          py::arg("prompt"));

    py::class_<ttc::mock::MockServer>(m, "MockServer")
        .def(py::init([](const std::string &profiles, double time_scale) {
                 return std::make_unique<ttc::mock::MockServer>(
                     ttc::mock::load_profiles(profiles), time_scale);
             }),
             py::arg("profiles"), py::arg("time_scale") = 1.0,
             "Serve the profile document's models with delays scaled by time_scale.")
        .def("start", &ttc::mock::MockServer::start, py::arg("host") = "127.0.0.1",
             py::arg("port") = 0, py::call_guard<py::gil_scoped_release>())
        .def("stop", &ttc::mock::MockServer::stop, py::call_guard<py::gil_scoped_release>())
        .def("wait", &ttc::mock::MockServer::wait, py::call_guard<py::gil_scoped_release>())
        .def_property_readonly("port", &ttc::mock::MockServer::port)
        .def_property_readonly("url", &ttc::mock::MockServer::base_url)
        .def("stats",
             [](const ttc::mock::MockServer &server) {
                 const auto s = server.stats();
                 py::dict d;
                 d["active"] = s.active;
                 d["high_water"] = s.high_water;
                 d["served"] = s.served;
                 return d;
             })
        .def("__enter__",
             [](ttc::mock::MockServer &server) -> ttc::mock::MockServer & {
                 {
                     py::gil_scoped_release release;
                     server.start("127.0.0.1", 0);
                 }
                 return server;
             })
        .def("__exit__", [](ttc::mock::MockServer &server, const py::object &, const py::object &,
                            const py::object &) {
            py::gil_scoped_release release;
            server.stop();
            return false;
        });
}
