#pragma once

#include "ttc/client.hpp"
#include "ttc/clock.hpp"
#include "ttc/errors.hpp"
#include "ttc/suite.hpp"

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace ttc::runner {

enum class BatchMode { wave, window };

const char *to_string(BatchMode mode);
BatchMode batch_mode_from_string(std::string_view name);

struct RunConfig {
    int batch_size = 1;
    BatchMode mode = BatchMode::wave;
    int repetitions = 1;
    int warmup_count = 0;
    int timeout_ms = 30000;
    std::string out_dir;

    bool operator==(const RunConfig &) const = default;
};

void validate_config(const RunConfig &config);

/// One model x task x batch cell. The wall clock spans first dispatch to
/// last completion; suite building, warmup, token-count resolution and
/// reporting all happen outside it.
struct TaskRunRecord {
    std::string run_id;
    std::string model_id;
    suite::TaskKind task_kind = suite::TaskKind::answer_choice;
    RunConfig config;
    std::int64_t wall_start = 0;
    std::int64_t wall_end = 0;
    std::vector<client::RequestTrace> traces; // |cases| x repetitions, in case order per pass
    std::string tool_version;

    bool operator==(const TaskRunRecord &) const = default;
};

/// Issue n fixed short prompts and discard them. Failures are logged to
/// `log` (when given) and are never fatal.
void warmup(const client::ModelTarget &target, int n, const Clock &clock,
            const client::Timeouts &timeouts = {}, std::ostream *log = nullptr);

/// Drive one cell. Wave mode processes cases in consecutive groups of B,
/// each group fully completing before the next; window mode keeps at most B
/// requests in flight and admits the next case on every completion. Case
/// dispatch order follows suite order; every case yields a trace, error
/// traces included.
TaskRunRecord execute_task_run(const std::vector<suite::PromptCase> &cases,
                               const client::ModelTarget &target, const RunConfig &config,
                               const Clock &clock,
                               const client::TokenCountConfig &counting = {},
                               std::ostream *log = nullptr);

/// Deterministic file stem for a cell: "<model>__<task>__b<batch>".
std::string run_file_stem(const std::string &model_id, suite::TaskKind task_kind, int batch_size);

/// Cells execute strictly sequentially (model, then task, then batch size)
/// so they never contend for the endpoint. When config.out_dir is set each
/// record is persisted as soon as its cell finishes.
std::vector<TaskRunRecord> run_matrix(const suite::TaskSuite &suite,
                                      const std::vector<client::ModelTarget> &targets,
                                      const std::vector<RunConfig> &configs, const Clock &clock,
                                      const client::TokenCountConfig &counting = {},
                                      std::ostream *log = nullptr);

/// Trace file: one "runmeta/v1" line followed by one "trace/v1" line per
/// trace; timestamps as integer nanoseconds.
void persist_traces(const TaskRunRecord &record, const std::string &path);
TaskRunRecord load_traces(const std::string &path);

/// Truncated or corrupt trace file. Carries the 1-based line number of the
/// offending line and every trace read before it.
class TraceFileError : public ValidationError {
public:
    TraceFileError(const std::string &msg, std::size_t line,
                   std::shared_ptr<TaskRunRecord> partial)
        : ValidationError(msg), line(line), partial(std::move(partial)) {}

    std::size_t line = 0;
    std::shared_ptr<TaskRunRecord> partial;
};

} // namespace ttc::runner
