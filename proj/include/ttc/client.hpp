#pragma once

#include "ttc/clock.hpp"
#include "ttc/suite.hpp"
#include "ttc/tokenize.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ttc::client {

/// One registered endpoint + model. The API key is read from the environment
/// variable named by auth_env; key material never travels through flags or
/// config files.
struct ModelTarget {
    std::string base_url; // e.g. "http://127.0.0.1:8080"
    std::string model_id;
    std::optional<std::string> auth_env;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::optional<std::int64_t> seed;
};

struct RequestSpec {
    std::vector<suite::Message> messages;
    int max_output_tokens = 1024;
    double temperature = 0.0;
    std::optional<std::int64_t> seed;
    // Streaming with usage reporting is always requested; there is no flag.
};

RequestSpec spec_for_case(const suite::PromptCase &pc, const ModelTarget &target);

struct Timeouts {
    int connect_ms = 5000;
    int read_ms = 30000;
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    bool operator==(const Usage &) const = default;
};

enum class StreamEventKind { delta, usage, done, keep_alive, frame_error };

struct StreamEvent {
    StreamEventKind kind = StreamEventKind::keep_alive;
    std::string text;                         // delta only; may be empty
    std::optional<Usage> usage;               // usage only
    std::optional<std::string> finish_reason; // may ride along with any payload frame
    std::string error_detail;                 // frame_error only

    bool operator==(const StreamEvent &) const = default;
};

/// Parse one complete server-sent-event frame (without its terminating blank
/// line). Stateless: replaying recorded frames reproduces the identical
/// event sequence.
StreamEvent parse_sse_frame(std::string_view frame);

/// Splits a raw byte stream into SSE frames at blank-line boundaries.
/// Tolerates CRLF line endings.
class SseAssembler {
public:
    /// Feed received bytes; returns every frame completed by this chunk.
    std::vector<std::string> feed(const char *data, std::size_t len);

    /// Unconsumed partial frame, if any (stream ended mid-frame).
    std::string pending() const { return buffer_; }

private:
    std::string buffer_;
};

enum class RequestErrorKind { connect_failure, timeout, http_status, stream_truncated };

const char *to_string(RequestErrorKind kind);
RequestErrorKind request_error_kind_from_string(std::string_view name);

struct RequestError {
    RequestErrorKind kind = RequestErrorKind::connect_failure;
    int http_status = 0; // set for http_status only
    std::string message;

    bool operator==(const RequestError &) const = default;
};

/// Full streaming timeline of one request. All timestamps are nanoseconds on
/// the injected monotonic clock. On success:
///   ts_dispatch <= ts_first_delta <= each delta timestamp <= ts_done.
struct RequestTrace {
    std::string case_id;
    std::string model_id;
    std::int64_t ts_dispatch = 0;
    std::optional<std::int64_t> ts_first_delta;
    std::vector<std::int64_t> delta_timestamps;
    std::optional<std::int64_t> ts_done;
    std::string text; // concatenation of all delta fragments in order
    std::optional<Usage> usage;
    std::optional<tokenize::TokenCountRecord> input_tokens;
    std::optional<tokenize::TokenCountRecord> output_tokens;
    std::optional<std::string> finish_reason;
    std::optional<RequestError> error;
    std::vector<std::string> frame_errors;

    bool ok() const { return !error.has_value(); }
    bool operator==(const RequestTrace &) const = default;
};

/// POST {base_url}/v1/chat/completions with stream=true and
/// stream_options.include_usage=true, recording one timestamp per delta at
/// receipt. Never throws for endpoint failures: those come back as traces
/// with a classified error.
RequestTrace execute_request(const ModelTarget &target, const RequestSpec &spec,
                             const Clock &clock, const Timeouts &timeouts = {});

struct TokenCountConfig {
    const tokenize::MergeTable *table = nullptr;
};

/// Prompt text used for client-side counting: message contents joined with
/// a newline.
std::string prompt_text_of(const suite::PromptCase &pc);

/// Attach input/output token counts using the server_usage > client_bpe >
/// approximate precedence. Idempotent.
RequestTrace resolve_token_counts(RequestTrace trace, const suite::PromptCase &prompt,
                                  const TokenCountConfig &config);

} // namespace ttc::client
