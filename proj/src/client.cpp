#include "ttc/client.hpp"

#include "ttc/errors.hpp"

#include "httplib.h"
#include "json.hpp"

#include <cstdlib>
#include <utility>

using nlohmann::json;

namespace ttc::client {

RequestSpec spec_for_case(const suite::PromptCase &pc, const ModelTarget &target) {
    RequestSpec spec;
    spec.messages = pc.messages;
    spec.max_output_tokens = target.max_output_tokens;
    spec.temperature = target.temperature;
    spec.seed = target.seed;
    return spec;
}

namespace {

// Collect the payload of every "data:" line in the frame, joined with "\n"
// per the event-stream format. Returns false when the frame carries no data
// line (comment or empty frame).
bool extract_data(std::string_view frame, std::string &data_out) {
    bool has_data = false;
    std::size_t start = 0;
    while (start <= frame.size()) {
        std::size_t end = frame.find('\n', start);
        if (end == std::string_view::npos) {
            end = frame.size();
        }
        std::string_view line = frame.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.rfind("data:", 0) == 0) {
            std::string_view value = line.substr(5);
            if (!value.empty() && value.front() == ' ') {
                value.remove_prefix(1);
            }
            if (has_data) {
                data_out += '\n';
            }
            data_out += value;
            has_data = true;
        }
        if (end == frame.size()) {
            break;
        }
        start = end + 1;
    }
    return has_data;
}

} // namespace

StreamEvent parse_sse_frame(std::string_view frame) {
    StreamEvent ev;
    std::string data;
    if (!extract_data(frame, data)) {
        ev.kind = StreamEventKind::keep_alive;
        return ev;
    }
    if (data == "[DONE]") {
        ev.kind = StreamEventKind::done;
        return ev;
    }
    json payload = json::parse(data, nullptr, false);
    if (payload.is_discarded() || !payload.is_object()) {
        ev.kind = StreamEventKind::frame_error;
        ev.error_detail = "unparseable frame payload: " + data.substr(0, 120);
        return ev;
    }
    if (payload.contains("choices") && payload["choices"].is_array() &&
        !payload["choices"].empty()) {
        const auto &choice = payload["choices"][0];
        if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
            ev.finish_reason = choice["finish_reason"].get<std::string>();
        }
        if (choice.contains("delta") && choice["delta"].is_object() &&
            choice["delta"].contains("content") && choice["delta"]["content"].is_string()) {
            ev.kind = StreamEventKind::delta;
            ev.text = choice["delta"]["content"].get<std::string>();
            return ev;
        }
    }
    if (payload.contains("usage") && payload["usage"].is_object()) {
        const auto &usage = payload["usage"];
        ev.kind = StreamEventKind::usage;
        ev.usage = Usage{usage.value("prompt_tokens", std::int64_t{0}),
                         usage.value("completion_tokens", std::int64_t{0})};
        return ev;
    }
    ev.kind = StreamEventKind::keep_alive;
    return ev;
}

std::vector<std::string> SseAssembler::feed(const char *data, std::size_t len) {
    buffer_.append(data, len);
    std::vector<std::string> frames;
    for (;;) {
        std::size_t lf = buffer_.find("\n\n");
        std::size_t crlf = buffer_.find("\r\n\r\n");
        std::size_t at;
        std::size_t sep_len;
        if (lf == std::string::npos && crlf == std::string::npos) {
            break;
        }
        if (crlf != std::string::npos && (lf == std::string::npos || crlf + 1 < lf)) {
            at = crlf;
            sep_len = 4;
        } else {
            at = lf;
            sep_len = 2;
        }
        frames.push_back(buffer_.substr(0, at));
        buffer_.erase(0, at + sep_len);
    }
    return frames;
}

const char *to_string(RequestErrorKind kind) {
    switch (kind) {
    case RequestErrorKind::connect_failure: return "connect_failure";
    case RequestErrorKind::timeout: return "timeout";
    case RequestErrorKind::http_status: return "http_status";
    case RequestErrorKind::stream_truncated: return "stream_truncated";
    }
    return "connect_failure";
}

RequestErrorKind request_error_kind_from_string(std::string_view name) {
    if (name == "connect_failure") return RequestErrorKind::connect_failure;
    if (name == "timeout") return RequestErrorKind::timeout;
    if (name == "http_status") return RequestErrorKind::http_status;
    if (name == "stream_truncated") return RequestErrorKind::stream_truncated;
    throw ValidationError("unknown request error kind: " + std::string(name));
}

namespace {

json build_request_body(const ModelTarget &target, const RequestSpec &spec) {
    json messages = json::array();
    for (const suite::Message &m : spec.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    json body = {{"model", target.model_id},
                 {"messages", messages},
                 {"stream", true},
                 {"stream_options", {{"include_usage", true}}},
                 {"temperature", spec.temperature},
                 {"max_tokens", spec.max_output_tokens}};
    if (spec.seed) {
        body["seed"] = *spec.seed;
    }
    return body;
}

} // namespace

RequestTrace execute_request(const ModelTarget &target, const RequestSpec &spec,
                             const Clock &clock, const Timeouts &timeouts) {
    RequestTrace trace;
    trace.model_id = target.model_id;

    httplib::Client cli(target.base_url);
    cli.set_connection_timeout(std::chrono::milliseconds(timeouts.connect_ms));
    cli.set_read_timeout(std::chrono::milliseconds(timeouts.read_ms));

    httplib::Request req;
    req.method = "POST";
    req.path = "/v1/chat/completions";
    req.set_header("Content-Type", "application/json");
    req.set_header("Accept", "text/event-stream");
    if (target.auth_env) {
        const char *key = std::getenv(target.auth_env->c_str());
        if (key != nullptr && key[0] != '\0') {
            req.set_header("Authorization", std::string("Bearer ") + key);
        }
    }
    req.body = build_request_body(target, spec).dump();

    SseAssembler assembler;
    bool saw_done = false;
    auto handle_frame = [&](const std::string &frame, std::int64_t at) {
        StreamEvent ev = parse_sse_frame(frame);
        if (ev.finish_reason) {
            trace.finish_reason = ev.finish_reason;
        }
        switch (ev.kind) {
        case StreamEventKind::delta:
            if (!trace.ts_first_delta) {
                trace.ts_first_delta = at;
            }
            trace.delta_timestamps.push_back(at);
            trace.text += ev.text;
            break;
        case StreamEventKind::usage:
            trace.usage = ev.usage;
            break;
        case StreamEventKind::done:
            saw_done = true;
            trace.ts_done = at;
            break;
        case StreamEventKind::frame_error:
            trace.frame_errors.push_back(ev.error_detail);
            break;
        case StreamEventKind::keep_alive:
            break;
        }
    };

    req.content_receiver = [&](const char *data, std::size_t len, std::uint64_t, std::uint64_t) {
        const std::int64_t at = clock.now_ns();
        for (const std::string &frame : assembler.feed(data, len)) {
            handle_frame(frame, at);
        }
        return true;
    };

    trace.ts_dispatch = clock.now_ns();
    auto result = cli.send(req);

    if (result && result->status == 200) {
        if (!saw_done) {
            trace.error = RequestError{RequestErrorKind::stream_truncated, 0,
                                       "stream ended without a [DONE] frame"};
        }
        return trace;
    }

    if (result && result->status != 200) {
        // The receiver may have been fed an error body; none of it was ours.
        trace.ts_first_delta.reset();
        trace.delta_timestamps.clear();
        trace.ts_done.reset();
        trace.text.clear();
        trace.usage.reset();
        trace.frame_errors.clear();
        trace.error = RequestError{RequestErrorKind::http_status, result->status,
                                   "HTTP " + std::to_string(result->status)};
        return trace;
    }

    const httplib::Error err = result.error();
    switch (err) {
    case httplib::Error::Connection:
    case httplib::Error::ConnectionTimeout:
        trace.error = RequestError{err == httplib::Error::ConnectionTimeout
                                       ? RequestErrorKind::timeout
                                       : RequestErrorKind::connect_failure,
                                   0, httplib::to_string(err)};
        break;
    case httplib::Error::Read:
    case httplib::Error::Write:
        // Mid-stream drop counts as truncation once data was seen; a stall
        // with nothing received is a timeout.
        if (!trace.delta_timestamps.empty() || trace.usage || trace.ts_first_delta) {
            trace.error = RequestError{RequestErrorKind::stream_truncated, 0,
                                       std::string("stream interrupted: ") +
                                           httplib::to_string(err)};
        } else {
            trace.error = RequestError{RequestErrorKind::timeout, 0, httplib::to_string(err)};
        }
        break;
    default:
        trace.error =
            RequestError{RequestErrorKind::connect_failure, 0, httplib::to_string(err)};
        break;
    }
    if (trace.error && !saw_done) {
        trace.ts_done.reset();
    }
    return trace;
}

std::string prompt_text_of(const suite::PromptCase &pc) {
    std::string text;
    for (std::size_t i = 0; i < pc.messages.size(); ++i) {
        if (i > 0) {
            text += '\n';
        }
        text += pc.messages[i].content;
    }
    return text;
}

RequestTrace resolve_token_counts(RequestTrace trace, const suite::PromptCase &prompt,
                                  const TokenCountConfig &config) {
    const auto strategies = tokenize::default_strategies();

    tokenize::TokenCountContext in_ctx;
    in_ctx.table = config.table;
    if (trace.usage) {
        in_ctx.server_count = trace.usage->prompt_tokens;
    }
    trace.input_tokens = tokenize::count_tokens(prompt_text_of(prompt), strategies, in_ctx);

    tokenize::TokenCountContext out_ctx;
    out_ctx.table = config.table;
    if (trace.usage) {
        out_ctx.server_count = trace.usage->completion_tokens;
    }
    trace.output_tokens = tokenize::count_tokens(trace.text, strategies, out_ctx);
    return trace;
}

} // namespace ttc::client
