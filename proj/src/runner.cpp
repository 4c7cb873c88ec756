#include "ttc/runner.hpp"

#include "ttc/version.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

using nlohmann::json;

namespace ttc::runner {

const char *to_string(BatchMode mode) {
    return mode == BatchMode::wave ? "wave" : "window";
}

BatchMode batch_mode_from_string(std::string_view name) {
    if (name == "wave") return BatchMode::wave;
    if (name == "window") return BatchMode::window;
    throw ValidationError("unknown batch mode: " + std::string(name) +
                          " (allowed: wave, window)");
}

void validate_config(const RunConfig &config) {
    if (config.batch_size < 1) {
        throw ValidationError("batch_size must be >= 1");
    }
    if (config.repetitions < 1) {
        throw ValidationError("repetitions must be >= 1");
    }
    if (config.warmup_count < 0) {
        throw ValidationError("warmup_count must be >= 0");
    }
    if (config.timeout_ms < 1) {
        throw ValidationError("timeout_ms must be >= 1");
    }
}

void warmup(const client::ModelTarget &target, int n, const Clock &clock,
            const client::Timeouts &timeouts, std::ostream *log) {
    client::RequestSpec spec;
    spec.messages = {{"user", "ping"}};
    spec.max_output_tokens = 8;
    spec.temperature = 0.0;
    for (int i = 0; i < n; ++i) {
        client::RequestTrace t = client::execute_request(target, spec, clock, timeouts);
        if (!t.ok() && log != nullptr) {
            (*log) << "warmup request " << (i + 1) << "/" << n << " against " << target.base_url
                   << " failed: " << t.error->message << "\n";
        }
    }
}

namespace {

struct SlotRunner {
    const std::vector<suite::PromptCase> &cases;
    const client::ModelTarget &target;
    const client::Timeouts timeouts;
    const Clock &clock;
    std::vector<client::RequestTrace> &slots;

    void run_one(std::size_t case_index, std::size_t slot) {
        const suite::PromptCase &pc = cases[case_index];
        client::RequestSpec spec = client::spec_for_case(pc, target);
        client::RequestTrace trace = client::execute_request(target, spec, clock, timeouts);
        trace.case_id = pc.case_id;
        slots[slot] = std::move(trace);
    }
};

void run_pass_wave(SlotRunner &runner, std::size_t n_cases, std::size_t batch,
                   std::size_t slot_base) {
    for (std::size_t group = 0; group < n_cases; group += batch) {
        const std::size_t end = std::min(group + batch, n_cases);
        std::vector<std::thread> threads;
        threads.reserve(end - group);
        for (std::size_t i = group; i < end; ++i) {
            threads.emplace_back([&runner, i, slot_base] { runner.run_one(i, slot_base + i); });
        }
        for (auto &t : threads) {
            t.join();
        }
    }
}

void run_pass_window(SlotRunner &runner, std::size_t n_cases, std::size_t batch,
                     std::size_t slot_base) {
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(batch, n_cases);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_cases) {
                    return;
                }
                runner.run_one(i, slot_base + i);
            }
        });
    }
    for (auto &t : threads) {
        t.join();
    }
}

} // namespace

TaskRunRecord execute_task_run(const std::vector<suite::PromptCase> &cases,
                               const client::ModelTarget &target, const RunConfig &config,
                               const Clock &clock, const client::TokenCountConfig &counting,
                               std::ostream *log) {
    validate_config(config);
    if (cases.empty()) {
        throw ValidationError("execute_task_run: case list is empty");
    }
    const suite::TaskKind task_kind = cases.front().task_kind;

    TaskRunRecord record;
    record.run_id = run_file_stem(target.model_id, task_kind, config.batch_size);
    record.model_id = target.model_id;
    record.task_kind = task_kind;
    record.config = config;
    record.tool_version = kVersion;

    const client::Timeouts timeouts{5000, config.timeout_ms};
    if (config.warmup_count > 0) {
        warmup(target, config.warmup_count, clock, timeouts, log);
    }

    const std::size_t n = cases.size();
    record.traces.resize(n * static_cast<std::size_t>(config.repetitions));
    SlotRunner runner{cases, target, timeouts, clock, record.traces};

    record.wall_start = clock.now_ns();
    for (int pass = 0; pass < config.repetitions; ++pass) {
        const std::size_t slot_base = static_cast<std::size_t>(pass) * n;
        if (config.mode == BatchMode::wave) {
            run_pass_wave(runner, n, static_cast<std::size_t>(config.batch_size), slot_base);
        } else {
            run_pass_window(runner, n, static_cast<std::size_t>(config.batch_size), slot_base);
        }
    }
    record.wall_end = clock.now_ns();

    for (std::size_t i = 0; i < record.traces.size(); ++i) {
        record.traces[i] =
            client::resolve_token_counts(std::move(record.traces[i]), cases[i % n], counting);
    }

    const auto failed = std::count_if(record.traces.begin(), record.traces.end(),
                                      [](const client::RequestTrace &t) { return !t.ok(); });
    if (log != nullptr) {
        (*log) << record.run_id << ": " << record.traces.size() - failed << " ok, " << failed
               << " failed, wall "
               << static_cast<double>(record.wall_end - record.wall_start) / 1e9 << " s\n";
    }
    return record;
}

std::string run_file_stem(const std::string &model_id, suite::TaskKind task_kind, int batch_size) {
    std::string model = model_id;
    for (char &c : model) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                          (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '_';
        if (!keep) {
            c = '_';
        }
    }
    return model + "__" + to_string(task_kind) + "__b" + std::to_string(batch_size);
}

std::vector<TaskRunRecord> run_matrix(const suite::TaskSuite &suite,
                                      const std::vector<client::ModelTarget> &targets,
                                      const std::vector<RunConfig> &configs, const Clock &clock,
                                      const client::TokenCountConfig &counting,
                                      std::ostream *log) {
    if (suite.cases.empty()) {
        throw ValidationError("run_matrix: suite has no cases");
    }
    if (targets.empty()) {
        throw ValidationError("run_matrix: target list is empty");
    }
    if (configs.empty()) {
        throw ValidationError("run_matrix: config list is empty");
    }

    std::vector<TaskRunRecord> records;
    for (const client::ModelTarget &target : targets) {
        for (const auto &[task_kind, cases] : suite.cases) {
            for (const RunConfig &config : configs) {
                TaskRunRecord record =
                    execute_task_run(cases, target, config, clock, counting, log);
                const bool all_failed =
                    std::all_of(record.traces.begin(), record.traces.end(),
                                [](const client::RequestTrace &t) { return !t.ok(); });
                if (all_failed && log != nullptr) {
                    (*log) << "warning: every request failed for " << record.run_id << "\n";
                }
                if (!config.out_dir.empty()) {
                    std::filesystem::create_directories(config.out_dir);
                    persist_traces(record, (std::filesystem::path(config.out_dir) /
                                            (record.run_id + ".jsonl"))
                                               .string());
                }
                records.push_back(std::move(record));
            }
        }
    }
    return records;
}

namespace {

json optional_i64(const std::optional<std::int64_t> &v) {
    return v ? json(*v) : json(nullptr);
}

json usage_to_json(const std::optional<client::Usage> &u) {
    if (!u) return nullptr;
    return {{"prompt_tokens", u->prompt_tokens}, {"completion_tokens", u->completion_tokens}};
}

json count_to_json(const std::optional<tokenize::TokenCountRecord> &c) {
    if (!c) return nullptr;
    return {{"count", c->count}, {"source", tokenize::to_string(c->source)}};
}

json error_to_json(const std::optional<client::RequestError> &e) {
    if (!e) return nullptr;
    return {{"kind", client::to_string(e->kind)},
            {"http_status", e->http_status},
            {"message", e->message}};
}

json trace_to_json(const client::RequestTrace &t) {
    return {{"schema", "trace/v1"},
            {"case_id", t.case_id},
            {"model_id", t.model_id},
            {"ts_dispatch", t.ts_dispatch},
            {"ts_first_delta", optional_i64(t.ts_first_delta)},
            {"delta_timestamps", t.delta_timestamps},
            {"ts_done", optional_i64(t.ts_done)},
            {"text", t.text},
            {"usage", usage_to_json(t.usage)},
            {"input_tokens", count_to_json(t.input_tokens)},
            {"output_tokens", count_to_json(t.output_tokens)},
            {"finish_reason", t.finish_reason ? json(*t.finish_reason) : json(nullptr)},
            {"error", error_to_json(t.error)},
            {"frame_errors", t.frame_errors}};
}

client::RequestTrace trace_from_json(const json &j) {
    client::RequestTrace t;
    t.case_id = j.at("case_id").get<std::string>();
    t.model_id = j.at("model_id").get<std::string>();
    t.ts_dispatch = j.at("ts_dispatch").get<std::int64_t>();
    if (!j.at("ts_first_delta").is_null()) {
        t.ts_first_delta = j.at("ts_first_delta").get<std::int64_t>();
    }
    t.delta_timestamps = j.at("delta_timestamps").get<std::vector<std::int64_t>>();
    if (!j.at("ts_done").is_null()) {
        t.ts_done = j.at("ts_done").get<std::int64_t>();
    }
    t.text = j.at("text").get<std::string>();
    if (!j.at("usage").is_null()) {
        t.usage = client::Usage{j["usage"].at("prompt_tokens").get<std::int64_t>(),
                                j["usage"].at("completion_tokens").get<std::int64_t>()};
    }
    for (const char *field : {"input_tokens", "output_tokens"}) {
        if (!j.at(field).is_null()) {
            tokenize::TokenCountRecord rec;
            rec.count = j[field].at("count").get<std::int64_t>();
            rec.source = tokenize::token_source_from_string(j[field].at("source").get<std::string>());
            if (std::string(field) == "input_tokens") {
                t.input_tokens = rec;
            } else {
                t.output_tokens = rec;
            }
        }
    }
    if (!j.at("finish_reason").is_null()) {
        t.finish_reason = j.at("finish_reason").get<std::string>();
    }
    if (!j.at("error").is_null()) {
        client::RequestError err;
        err.kind = client::request_error_kind_from_string(j["error"].at("kind").get<std::string>());
        err.http_status = j["error"].at("http_status").get<int>();
        err.message = j["error"].at("message").get<std::string>();
        t.error = err;
    }
    t.frame_errors = j.at("frame_errors").get<std::vector<std::string>>();
    return t;
}

json runmeta_to_json(const TaskRunRecord &r) {
    return {{"schema", "runmeta/v1"},
            {"run_id", r.run_id},
            {"model_id", r.model_id},
            {"task_kind", suite::to_string(r.task_kind)},
            {"config",
             {{"batch_size", r.config.batch_size},
              {"mode", to_string(r.config.mode)},
              {"repetitions", r.config.repetitions},
              {"warmup_count", r.config.warmup_count},
              {"timeout_ms", r.config.timeout_ms},
              {"out_dir", r.config.out_dir}}},
            {"wall_start", r.wall_start},
            {"wall_end", r.wall_end},
            {"n_traces", r.traces.size()},
            {"tool_version", r.tool_version}};
}

} // namespace

void persist_traces(const TaskRunRecord &record, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write trace file: " + path);
    }
    out << runmeta_to_json(record).dump() << "\n";
    for (const client::RequestTrace &t : record.traces) {
        out << trace_to_json(t).dump() << "\n";
    }
    if (!out) {
        throw IoError("failed writing trace file: " + path);
    }
}

TaskRunRecord load_traces(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open trace file: " + path);
    }
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) {
        throw TraceFileError(path + ": empty trace file", 0, nullptr);
    }
    ++line_no;
    json meta = json::parse(line, nullptr, false);
    if (meta.is_discarded()) {
        throw TraceFileError(path + ":1: malformed run metadata line", 1, nullptr);
    }
    const std::string schema = meta.value("schema", "");
    if (schema != "runmeta/v1") {
        throw ValidationError(path + ": unsupported schema \"" + schema +
                              "\" (supported: runmeta/v1)");
    }

    auto record = std::make_shared<TaskRunRecord>();
    record->run_id = meta.at("run_id").get<std::string>();
    record->model_id = meta.at("model_id").get<std::string>();
    record->task_kind = suite::task_kind_from_string(meta.at("task_kind").get<std::string>());
    const json &cfg = meta.at("config");
    record->config.batch_size = cfg.at("batch_size").get<int>();
    record->config.mode = batch_mode_from_string(cfg.at("mode").get<std::string>());
    record->config.repetitions = cfg.at("repetitions").get<int>();
    record->config.warmup_count = cfg.at("warmup_count").get<int>();
    record->config.timeout_ms = cfg.at("timeout_ms").get<int>();
    record->config.out_dir = cfg.at("out_dir").get<std::string>();
    record->wall_start = meta.at("wall_start").get<std::int64_t>();
    record->wall_end = meta.at("wall_end").get<std::int64_t>();
    record->tool_version = meta.at("tool_version").get<std::string>();
    const std::size_t expected = meta.at("n_traces").get<std::size_t>();

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw TraceFileError(path + ":" + std::to_string(line_no) +
                                     ": malformed trace line (last good line " +
                                     std::to_string(line_no - 1) + ")",
                                 line_no, record);
        }
        const std::string trace_schema = j.value("schema", "");
        if (trace_schema != "trace/v1") {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": unsupported schema \"" +
                                  trace_schema + "\" (supported: trace/v1)");
        }
        try {
            record->traces.push_back(trace_from_json(j));
        } catch (const json::exception &ex) {
            throw TraceFileError(path + ":" + std::to_string(line_no) +
                                     ": invalid trace record: " + ex.what(),
                                 line_no, record);
        }
    }
    if (record->traces.size() != expected) {
        throw TraceFileError(path + ": expected " + std::to_string(expected) + " traces, found " +
                                 std::to_string(record->traces.size()) + " (file truncated after line " +
                                 std::to_string(line_no) + ")",
                             line_no, record);
    }
    return *record;
}

} // namespace ttc::runner
