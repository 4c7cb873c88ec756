#include "ttc/client.hpp"
#include "ttc/errors.hpp"
#include "ttc/hash.hpp"
#include "ttc/metrics.hpp"
#include "ttc/mockserver.hpp"
#include "ttc/report.hpp"
#include "ttc/runner.hpp"
#include "ttc/suite.hpp"
#include "ttc/tokenize.hpp"
#include "ttc/version.hpp"

#include "CLI11.hpp"
#include "httplib.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 1 usage, 2 I/O or runtime, 3 validation.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;

struct SuiteBuildArgs {
    std::string dataset;
    std::vector<std::string> tasks;
    std::string templates;
    std::string out;
    std::string created_at;
};

struct RunArgs {
    std::string suite;
    std::string endpoint;
    std::vector<std::string> models;
    std::vector<int> batches;
    std::string mode = "wave";
    int reps = 1;
    int warmup = 0;
    int max_tokens = 1024;
    double temperature = 0.0;
    std::int64_t seed = 0;
    bool seed_set = false;
    int timeout_ms = 30000;
    std::string auth_env;
    std::string merges;
    std::string out;
};

struct AnalyzeArgs {
    std::string runs;
    std::string out;
};

struct ReportArgs {
    std::string summary;
    std::string format;
    std::string out;
};

struct MockServeArgs {
    std::string profiles;
    std::string host = "127.0.0.1";
    int port = 0;
    double time_scale = 1.0;
};

struct MemArgs {
    double params = 0.0;
    double bits = 0.0;
};

bool valid_env_var_name(const std::string &name) {
    if (name.empty()) {
        return false;
    }
    const auto head = [](char c) { return c == '_' || std::isalpha(static_cast<unsigned char>(c)); };
    const auto tail = [&](char c) {
        return c == '_' || std::isalnum(static_cast<unsigned char>(c));
    };
    if (!head(name.front())) {
        return false;
    }
    return std::all_of(name.begin() + 1, name.end(), tail);
}

std::string strip_trailing_slash(std::string url) {
    while (url.size() > 1 && url.back() == '/') {
        url.pop_back();
    }
    return url;
}

int cmd_suite_build(const SuiteBuildArgs &args) {
    std::set<ttc::suite::TaskKind> kinds;
    for (const std::string &name : args.tasks) {
        try {
            kinds.insert(ttc::suite::task_kind_from_string(name));
        } catch (const ttc::ValidationError &e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitUsage;
        }
    }
    const std::vector<ttc::suite::Question> questions = ttc::suite::load_questions(args.dataset);
    const auto templates = args.templates.empty() ? ttc::suite::default_templates()
                                                  : ttc::suite::load_templates(args.templates);
    const std::string digest = ttc::digest_file(args.dataset);
    const ttc::suite::TaskSuite s =
        ttc::suite::build_suite(questions, kinds, templates, digest, args.created_at);
    ttc::suite::save_suite(s, args.out);
    std::cout << s.total_cases() << " cases (" << questions.size() << " per task)\n";
    std::cout << "suite " << s.suite_id << " -> " << args.out << "\n";
    return kExitOk;
}

int cmd_run(const RunArgs &args) {
    if (!args.auth_env.empty() && !valid_env_var_name(args.auth_env)) {
        std::cerr << "error: --auth-env expects the NAME of an environment variable "
                     "(letters, digits, underscore); never pass key material on the "
                     "command line\n";
        return kExitUsage;
    }

    const ttc::suite::TaskSuite s = ttc::suite::load_suite(args.suite);
    const std::string endpoint = strip_trailing_slash(args.endpoint);

    {
        httplib::Client probe(endpoint);
        probe.set_connection_timeout(5, 0);
        probe.set_read_timeout(5, 0);
        const httplib::Result res = probe.Get("/v1/models");
        if (!res) {
            std::cerr << "error: endpoint unreachable at preflight: " << endpoint << "/v1/models ("
                      << httplib::to_string(res.error()) << ")\n";
            return kExitIo;
        }
    }

    std::vector<ttc::client::ModelTarget> targets;
    for (const std::string &model : args.models) {
        ttc::client::ModelTarget t;
        t.base_url = endpoint;
        t.model_id = model;
        if (!args.auth_env.empty()) {
            t.auth_env = args.auth_env;
        }
        t.temperature = args.temperature;
        t.max_output_tokens = args.max_tokens;
        if (args.seed_set) {
            t.seed = args.seed;
        }
        targets.push_back(std::move(t));
    }

    std::vector<ttc::runner::RunConfig> configs;
    for (const int batch : args.batches.empty() ? std::vector<int>{1} : args.batches) {
        ttc::runner::RunConfig config;
        config.batch_size = batch;
        config.mode = ttc::runner::batch_mode_from_string(args.mode);
        config.repetitions = args.reps;
        config.warmup_count = args.warmup;
        config.timeout_ms = args.timeout_ms;
        config.out_dir = args.out;
        configs.push_back(config);
    }

    std::optional<ttc::tokenize::MergeTable> table;
    ttc::client::TokenCountConfig counting;
    if (!args.merges.empty()) {
        table = ttc::tokenize::load_merges(args.merges);
        counting.table = &*table;
    }

    fs::create_directories(args.out);
    const auto records = ttc::runner::run_matrix(s, targets, configs, ttc::steady_clock_instance(),
                                                 counting, &std::cerr);
    for (const ttc::runner::TaskRunRecord &record : records) {
        std::cout << (fs::path(args.out) / (record.run_id + ".jsonl")).string() << "\n";
    }
    return kExitOk;
}

int cmd_analyze(const AnalyzeArgs &args) {
    if (!fs::exists(args.runs) || !fs::is_directory(args.runs)) {
        throw ttc::IoError("runs directory not found: " + args.runs);
    }
    std::vector<std::string> files;
    for (const auto &entry : fs::directory_iterator(args.runs)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
            files.push_back(entry.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw ttc::ValidationError("no run records found in " + args.runs);
    }
    std::vector<ttc::runner::TaskRunRecord> records;
    records.reserve(files.size());
    for (const std::string &file : files) {
        records.push_back(ttc::runner::load_traces(file));
    }
    const ttc::report::ReportBundle bundle = ttc::report::build_bundle(records);
    ttc::report::emit_summary_document(bundle, args.out);
    std::cout << "analyzed " << records.size() << " runs -> " << args.out << "\n";
    return kExitOk;
}

int cmd_report(const ReportArgs &args) {
    const ttc::report::ReportBundle bundle = ttc::report::load_summary_document(args.summary);
    fs::create_directories(args.out);
    std::vector<std::string> written;
    if (args.format == "csv") {
        const std::string path = (fs::path(args.out) / "summary.csv").string();
        ttc::report::emit_csv(bundle.summaries, path);
        written.push_back(path);
    } else if (args.format == "md") {
        const std::string path = (fs::path(args.out) / "report.md").string();
        ttc::report::emit_markdown(bundle, path);
        written.push_back(path);
    } else {
        std::map<std::string, std::vector<ttc::metrics::TaskSummary>> by_task;
        for (const ttc::metrics::TaskSummary &summary : bundle.summaries) {
            by_task[ttc::suite::to_string(summary.task_kind)].push_back(summary);
        }
        if (by_task.empty()) {
            throw ttc::ValidationError("summary document has no summaries to draw");
        }
        for (const auto &[task, summaries] : by_task) {
            const std::string path = (fs::path(args.out) / ("panel_" + task + ".svg")).string();
            ttc::report::emit_panel_svg(summaries, path);
            written.push_back(path);
        }
    }
    for (const std::string &path : written) {
        std::cout << path << "\n";
    }
    return kExitOk;
}

int cmd_mock_serve(const MockServeArgs &args) {
    const std::vector<ttc::mock::MockProfile> profiles = ttc::mock::load_profiles(args.profiles);
    ttc::mock::MockServer server(profiles, args.time_scale);
    server.start(args.host, args.port);
    std::cout << "listening on " << server.base_url() << " (" << profiles.size() << " models, "
              << "time scale " << args.time_scale << ")" << std::endl;
    server.wait();
    return kExitOk;
}

int cmd_mem(const MemArgs &args) {
    const double gb = ttc::metrics::estimate_model_memory_gb(args.params, args.bits);
    std::printf("%.2f GB\n", gb);
    return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Task-level speed benchmark for streaming chat endpoints"};
    app.set_version_flag("--version", std::string(ttc::kVersion));
    app.require_subcommand(1);

    SuiteBuildArgs sb;
    CLI::App *sb_cmd = app.add_subcommand("suite-build", "Render prompt cases from a dataset");
    sb_cmd->add_option("--dataset", sb.dataset, "Question dataset (JSONL)")->required();
    sb_cmd->add_option("--tasks", sb.tasks, "Task list (default: all)")
        ->delimiter(',')
        ->default_val(std::vector<std::string>{"answer_choice", "paraphrase", "open_answer"});
    sb_cmd->add_option("--templates", sb.templates, "Prompt template document (JSON)");
    sb_cmd->add_option("--out", sb.out, "Output suite file")->required();
    sb_cmd->add_option("--created-at", sb.created_at,
                       "Override the suite timestamp (RFC 3339) for reproducible builds");

    RunArgs run;
    CLI::App *run_cmd = app.add_subcommand("run", "Execute a suite against an endpoint");
    run_cmd->add_option("--suite", run.suite, "Suite file")->required();
    run_cmd->add_option("--endpoint", run.endpoint, "Base URL, e.g. http://127.0.0.1:8080")
        ->required();
    run_cmd->add_option("--model", run.models, "Model id (repeatable)")->required();
    run_cmd->add_option("--batch", run.batches, "Batch size (repeatable)")
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--mode", run.mode, "Batch mode")
        ->check(CLI::IsMember({"wave", "window"}));
    run_cmd->add_option("--reps", run.reps, "Repetitions")->check(CLI::PositiveNumber);
    run_cmd->add_option("--warmup", run.warmup, "Warmup requests per cell")
        ->check(CLI::NonNegativeNumber);
    run_cmd->add_option("--max-tokens", run.max_tokens, "Per-request output cap")
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--temperature", run.temperature, "Sampling temperature");
    CLI::Option *seed_opt = run_cmd->add_option("--seed", run.seed, "Sampling seed");
    run_cmd->add_option("--timeout-ms", run.timeout_ms, "Per-request read timeout")
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--auth-env", run.auth_env,
                        "NAME of the environment variable holding the API key");
    run_cmd->add_option("--merges", run.merges, "BPE merge table for client-side counting");
    run_cmd->add_option("--out", run.out, "Output directory for trace files")->required();

    AnalyzeArgs an;
    CLI::App *an_cmd = app.add_subcommand("analyze", "Summarize trace files");
    an_cmd->add_option("--runs", an.runs, "Directory of trace files")->required();
    an_cmd->add_option("--out", an.out, "Output summary document")->required();

    ReportArgs rp;
    CLI::App *rp_cmd = app.add_subcommand("report", "Emit reports from a summary document");
    rp_cmd->add_option("--summary", rp.summary, "Summary document")->required();
    rp_cmd->add_option("--format", rp.format, "Output format")
        ->required()
        ->check(CLI::IsMember({"csv", "md", "svg"}));
    rp_cmd->add_option("--out", rp.out, "Output directory")->required();

    MockServeArgs ms;
    CLI::App *ms_cmd = app.add_subcommand("mock-serve", "Serve deterministic mock models");
    ms_cmd->add_option("--profiles", ms.profiles, "Profile document")->required();
    ms_cmd->add_option("--host", ms.host, "Bind host");
    ms_cmd->add_option("--port", ms.port, "Port (0 picks a free one)")
        ->check(CLI::Range(0, 65535));
    ms_cmd->add_option("--time-scale", ms.time_scale, "Delay compression factor in (0, 1]");

    MemArgs mem;
    CLI::App *mem_cmd = app.add_subcommand("mem", "Estimate parameter memory");
    mem_cmd->add_option("--params", mem.params, "Parameter count (scientific notation ok)")
        ->required();
    mem_cmd->add_option("--bits", mem.bits, "Bits per parameter")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    run.seed_set = seed_opt->count() > 0;

    try {
        if (sb_cmd->parsed()) return cmd_suite_build(sb);
        if (run_cmd->parsed()) return cmd_run(run);
        if (an_cmd->parsed()) return cmd_analyze(an);
        if (rp_cmd->parsed()) return cmd_report(rp);
        if (ms_cmd->parsed()) return cmd_mock_serve(ms);
        if (mem_cmd->parsed()) return cmd_mem(mem);
    } catch (const ttc::ValidationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ttc::IoError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitUsage;
}
