#include "ttc/mockserver.hpp"

#include "ttc/hash.hpp"
#include "ttc/suite.hpp"
#include "ttc/tokenize.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

using nlohmann::json;

namespace ttc::mock {

namespace {

const std::set<std::string> kKnownTags = {kTagAnswerChoice, kTagParaphrase, kTagOpenAnswer,
                                          kTagDefault};

} // namespace

void validate_profile(const MockProfile &profile) {
    if (profile.model_id.empty()) {
        throw ValidationError("mock profile: model_id is empty");
    }
    if (!(profile.ttft_ms > 0.0)) {
        throw ValidationError("mock profile " + profile.model_id + ": ttft_ms must be > 0");
    }
    if (!(profile.per_delta_ms > 0.0)) {
        throw ValidationError("mock profile " + profile.model_id + ": per_delta_ms must be > 0");
    }
    if (profile.granularity < 1) {
        throw ValidationError("mock profile " + profile.model_id + ": granularity must be >= 1");
    }
    for (const auto &[tag, rule] : profile.verbosity) {
        if (kKnownTags.find(tag) == kKnownTags.end()) {
            throw ValidationError("mock profile " + profile.model_id + ": unknown task tag \"" +
                                  tag + "\"");
        }
        (void)rule;
    }
    const bool has_default = profile.verbosity.count(kTagDefault) > 0;
    const bool covers_all = profile.verbosity.count(kTagAnswerChoice) > 0 &&
                            profile.verbosity.count(kTagParaphrase) > 0 &&
                            profile.verbosity.count(kTagOpenAnswer) > 0;
    if (!has_default && !covers_all) {
        throw ValidationError("mock profile " + profile.model_id +
                              ": verbosity needs a default entry or all three task tags");
    }
}

std::vector<MockProfile> parse_profiles(const std::string &text, const std::string &source) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        throw ValidationError(source + ": malformed profile document");
    }
    const std::string schema = doc.value("schema", "");
    if (schema != "mockprofiles/v1") {
        throw ValidationError(source + ": unsupported schema \"" + schema +
                              "\" (supported: mockprofiles/v1)");
    }
    if (!doc.contains("profiles") || !doc["profiles"].is_array()) {
        throw ValidationError(source + ": missing profiles array");
    }
    std::vector<MockProfile> profiles;
    std::set<std::string> ids;
    for (const json &entry : doc["profiles"]) {
        MockProfile p;
        try {
            p.model_id = entry.at("model_id").get<std::string>();
            p.ttft_ms = entry.at("ttft_ms").get<double>();
            p.per_delta_ms = entry.at("per_delta_ms").get<double>();
            p.granularity = entry.value("granularity", 1);
            p.seed = entry.value("seed", std::uint64_t{0});
            for (const auto &[tag, rule] : entry.at("verbosity").items()) {
                Verbosity v;
                if (rule.is_number()) {
                    v.base = rule.get<double>();
                } else {
                    v.base = rule.value("base", 0.0);
                    v.ratio = rule.value("ratio", 0.0);
                }
                p.verbosity[tag] = v;
            }
        } catch (const json::exception &ex) {
            throw ValidationError(source + ": invalid profile entry: " + ex.what());
        }
        validate_profile(p);
        if (!ids.insert(p.model_id).second) {
            throw ValidationError(source + ": duplicate model_id \"" + p.model_id + "\"");
        }
        profiles.push_back(std::move(p));
    }
    if (profiles.empty()) {
        throw ValidationError(source + ": no profiles defined");
    }
    return profiles;
}

std::vector<MockProfile> load_profiles(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open profile file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_profiles(buf.str(), path);
}

std::string profiles_document_bytes(const std::vector<MockProfile> &profiles) {
    json list = json::array();
    for (const MockProfile &p : profiles) {
        json verbosity = json::object();
        for (const auto &[tag, v] : p.verbosity) {
            verbosity[tag] = {{"base", v.base}, {"ratio", v.ratio}};
        }
        list.push_back({{"model_id", p.model_id},
                        {"ttft_ms", p.ttft_ms},
                        {"per_delta_ms", p.per_delta_ms},
                        {"granularity", p.granularity},
                        {"seed", p.seed},
                        {"verbosity", verbosity}});
    }
    const json doc = {{"schema", "mockprofiles/v1"}, {"profiles", list}};
    return doc.dump(2) + "\n";
}

std::string detect_task_tag(std::string_view prompt) {
    if (prompt.find(suite::kAnswerOnlyInstruction) != std::string_view::npos) {
        return kTagAnswerChoice;
    }
    if (prompt.find(suite::kParaphraseInstruction) != std::string_view::npos) {
        return kTagParaphrase;
    }
    if (prompt.find(suite::kExplainInstruction) != std::string_view::npos) {
        return kTagOpenAnswer;
    }
    return kTagDefault;
}

Verbosity resolve_verbosity(const MockProfile &profile, std::string_view task_tag) {
    const auto it = profile.verbosity.find(std::string(task_tag));
    if (it != profile.verbosity.end()) {
        return it->second;
    }
    const auto fallback = profile.verbosity.find(kTagDefault);
    if (fallback != profile.verbosity.end()) {
        return fallback->second;
    }
    throw ValidationError("mock profile " + profile.model_id + ": no verbosity rule for tag \"" +
                          std::string(task_tag) + "\" and no default");
}

MockResponse generate_mock_response(const MockProfile &profile, std::string_view task_tag,
                                    std::string_view prompt, std::int64_t max_tokens) {
    validate_profile(profile);
    MockResponse resp;
    resp.prompt_tokens = tokenize::approx_token_count(prompt);

    const Verbosity rule = resolve_verbosity(profile, task_tag);
    std::int64_t count = std::llround(rule.base + rule.ratio * static_cast<double>(resp.prompt_tokens));
    count = std::max<std::int64_t>(count, 0);
    resp.finish_reason = "stop";
    if (max_tokens > 0 && count > max_tokens) {
        count = max_tokens;
        resp.finish_reason = "length";
    }

    // The generator is keyed by (seed, task tag, prompt hash) and nothing
    // else, so replays stream identical bytes.
    const std::uint64_t tag_seed = fnv1a64(task_tag, profile.seed);
    std::mt19937_64 rng(fnv1a64(prompt, tag_seed));
    static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz ";
    constexpr std::size_t kAlphabetSize = sizeof(kAlphabet) - 1;

    resp.deltas.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        std::string delta;
        delta.reserve(static_cast<std::size_t>(profile.granularity));
        for (int c = 0; c < profile.granularity; ++c) {
            delta += kAlphabet[rng() % kAlphabetSize];
        }
        resp.deltas.push_back(std::move(delta));
    }
    resp.completion_tokens = static_cast<std::int64_t>(resp.deltas.size());
    return resp;
}

namespace {

json chunk_skeleton(const std::string &request_id, const std::string &model_id) {
    return {{"id", request_id},
            {"object", "chat.completion.chunk"},
            {"created", 0},
            {"model", model_id}};
}

std::string sse_frame(const json &payload) {
    return "data: " + payload.dump() + "\n\n";
}

struct ScheduledFrame {
    std::int64_t offset_ns = 0;
    std::string bytes;
};

/// Frame deadlines, relative to stream start: first content delta at
/// s*ttft, delta k at s*(ttft + k*per_delta); bookkeeping frames ride on
/// the last deadline without extra waits.
std::vector<ScheduledFrame> build_schedule(const MockProfile &profile, const MockResponse &resp,
                                           const std::string &request_id, double scale) {
    const auto at_ms = [scale](double ms) {
        return static_cast<std::int64_t>(std::llround(scale * ms * 1e6));
    };
    std::vector<ScheduledFrame> frames;

    json role = chunk_skeleton(request_id, profile.model_id);
    role["choices"] = json::array({{{"index", 0},
                                    {"delta", {{"role", "assistant"}}},
                                    {"finish_reason", nullptr}}});
    frames.push_back({0, sse_frame(role)});

    const std::size_t n = resp.deltas.size();
    for (std::size_t k = 0; k < n; ++k) {
        json chunk = chunk_skeleton(request_id, profile.model_id);
        chunk["choices"] = json::array({{{"index", 0},
                                         {"delta", {{"content", resp.deltas[k]}}},
                                         {"finish_reason", nullptr}}});
        frames.push_back(
            {at_ms(profile.ttft_ms + static_cast<double>(k) * profile.per_delta_ms),
             sse_frame(chunk)});
    }
    const std::int64_t tail =
        n > 0 ? at_ms(profile.ttft_ms + static_cast<double>(n - 1) * profile.per_delta_ms)
              : at_ms(profile.ttft_ms);

    json finish = chunk_skeleton(request_id, profile.model_id);
    finish["choices"] = json::array(
        {{{"index", 0}, {"delta", json::object()}, {"finish_reason", resp.finish_reason}}});
    frames.push_back({tail, sse_frame(finish)});

    json usage = chunk_skeleton(request_id, profile.model_id);
    usage["choices"] = json::array();
    usage["usage"] = {{"prompt_tokens", resp.prompt_tokens},
                      {"completion_tokens", resp.completion_tokens},
                      {"total_tokens", resp.prompt_tokens + resp.completion_tokens}};
    frames.push_back({tail, sse_frame(usage)});

    frames.push_back({tail, "data: [DONE]\n\n"});
    return frames;
}

json error_body(const std::string &message, const std::string &code) {
    return {{"error",
             {{"message", message}, {"type", "invalid_request_error"}, {"code", code}}}};
}

} // namespace

struct MockServer::Impl {
    std::vector<MockProfile> profiles;
    double scale = 1.0;
    httplib::Server svr;
    std::thread thread;
    std::string host;
    int port = -1;

    std::atomic<std::int64_t> active{0};
    std::atomic<std::int64_t> high_water{0};
    std::atomic<std::int64_t> served{0};

    const MockProfile *find(const std::string &model_id) const {
        for (const MockProfile &p : profiles) {
            if (p.model_id == model_id) {
                return &p;
            }
        }
        return nullptr;
    }

    std::string known_models() const {
        std::string out;
        for (const MockProfile &p : profiles) {
            if (!out.empty()) {
                out += ", ";
            }
            out += p.model_id;
        }
        return out;
    }

    /// Connection accounting from request arrival to the moment the final
    /// frame is handed to the sink. Ending at closure teardown instead
    /// would overlap with the next serial request and overstate
    /// concurrency.
    struct ActiveGuard {
        Impl &impl;
        std::atomic<bool> finished{false};

        explicit ActiveGuard(Impl &impl) : impl(impl) {
            const std::int64_t cur = impl.active.fetch_add(1) + 1;
            std::int64_t hw = impl.high_water.load();
            while (cur > hw && !impl.high_water.compare_exchange_weak(hw, cur)) {
            }
        }
        void finish() {
            if (!finished.exchange(true)) {
                impl.active.fetch_sub(1);
                impl.served.fetch_add(1);
            }
        }
        ~ActiveGuard() { finish(); }
    };
};

MockServer::MockServer(std::vector<MockProfile> profiles, double time_scale)
    : impl_(std::make_unique<Impl>()) {
    if (profiles.empty()) {
        throw ValidationError("mock server: no profiles");
    }
    std::set<std::string> ids;
    for (const MockProfile &p : profiles) {
        validate_profile(p);
        if (!ids.insert(p.model_id).second) {
            throw ValidationError("mock server: duplicate model_id \"" + p.model_id + "\"");
        }
    }
    if (!(time_scale > 0.0) || time_scale > 1.0) {
        throw ValidationError("mock server: time scale factor must be in (0, 1]");
    }
    impl_->profiles = std::move(profiles);
    impl_->scale = time_scale;

    Impl *impl = impl_.get();
    impl->svr.new_task_queue = [] { return new httplib::ThreadPool(64); };

    impl->svr.Get("/v1/models", [impl](const httplib::Request &, httplib::Response &res) {
        json data = json::array();
        for (const MockProfile &p : impl->profiles) {
            data.push_back({{"id", p.model_id}, {"object", "model"}, {"owned_by", "mock"}});
        }
        res.set_content(json{{"object", "list"}, {"data", data}}.dump(), "application/json");
    });

    impl->svr.Get("/debug/stats", [impl](const httplib::Request &, httplib::Response &res) {
        const json body = {{"active", impl->active.load()},
                           {"high_water", impl->high_water.load()},
                           {"served", impl->served.load()}};
        res.set_content(body.dump(), "application/json");
    });

    impl->svr.Post("/v1/chat/completions", [impl](const httplib::Request &req,
                                                  httplib::Response &res) {
        auto guard = std::make_shared<Impl::ActiveGuard>(*impl);

        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            res.status = 400;
            res.set_content(error_body("malformed JSON body", "invalid_body").dump(),
                            "application/json");
            return;
        }
        const std::string model_id = body.value("model", "");
        if (model_id.empty()) {
            res.status = 400;
            res.set_content(error_body("missing model field", "invalid_body").dump(),
                            "application/json");
            return;
        }
        const MockProfile *profile = impl->find(model_id);
        if (profile == nullptr) {
            res.status = 404;
            res.set_content(error_body("unknown model \"" + model_id +
                                           "\" (known models: " + impl->known_models() + ")",
                                       "model_not_found")
                                .dump(),
                            "application/json");
            return;
        }
        if (!body.contains("messages") || !body["messages"].is_array() ||
            body["messages"].empty()) {
            res.status = 400;
            res.set_content(error_body("missing messages", "invalid_body").dump(),
                            "application/json");
            return;
        }
        if (!body.value("stream", false)) {
            res.status = 400;
            res.set_content(
                error_body("only streaming requests are supported; set stream=true",
                           "stream_required")
                    .dump(),
                "application/json");
            return;
        }

        std::string prompt;
        for (const json &m : body["messages"]) {
            if (m.is_object() && m.contains("content") && m["content"].is_string()) {
                if (!prompt.empty()) {
                    prompt += "\n";
                }
                prompt += m["content"].get<std::string>();
            }
        }
        const std::int64_t max_tokens = body.value("max_tokens", std::int64_t{0});

        const std::string tag = detect_task_tag(prompt);
        const MockResponse resp = generate_mock_response(*profile, tag, prompt, max_tokens);
        const std::string request_id =
            "chatcmpl-mock-" + hex64(fnv1a64(prompt, fnv1a64(model_id, profile->seed)));
        auto frames = std::make_shared<std::vector<ScheduledFrame>>(
            build_schedule(*profile, resp, request_id, impl->scale));

        res.set_chunked_content_provider(
            "text/event-stream",
            [frames, guard](std::size_t offset, httplib::DataSink &sink) {
                (void)offset;
                const auto t0 = std::chrono::steady_clock::now();
                for (const ScheduledFrame &frame : *frames) {
                    // Absolute deadlines: sleep overshoot does not
                    // accumulate across deltas.
                    std::this_thread::sleep_until(t0 + std::chrono::nanoseconds(frame.offset_ns));
                    if (!sink.write(frame.bytes.data(), frame.bytes.size())) {
                        guard->finish();
                        return false;
                    }
                }
                guard->finish();
                sink.done();
                return true;
            },
            [guard](bool) {});
    });
}

MockServer::~MockServer() {
    stop();
}

void MockServer::start(const std::string &host, int port) {
    if (impl_->thread.joinable()) {
        throw ValidationError("mock server already started");
    }
    impl_->host = host;
    if (port == 0) {
        impl_->port = impl_->svr.bind_to_any_port(host);
        if (impl_->port < 0) {
            throw IoError("mock server: cannot bind to any port on " + host);
        }
    } else {
        if (!impl_->svr.bind_to_port(host, port)) {
            throw IoError("mock server: cannot bind " + host + ":" + std::to_string(port));
        }
        impl_->port = port;
    }
    Impl *impl = impl_.get();
    impl_->thread = std::thread([impl] { impl->svr.listen_after_bind(); });
    impl_->svr.wait_until_ready();
}

void MockServer::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->svr.stop();
        impl_->thread.join();
    }
}

void MockServer::wait() {
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

int MockServer::port() const {
    return impl_->port;
}

std::string MockServer::base_url() const {
    return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

ServerStats MockServer::stats() const {
    return {impl_->active.load(), impl_->high_water.load(), impl_->served.load()};
}

} // namespace ttc::mock
