#pragma once

#include "ttc/errors.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace ttc::mock {

/// Output token count rule for one task tag: constant when ratio = 0,
/// otherwise base + ratio * input token estimate.
struct Verbosity {
    double base = 0.0;
    double ratio = 0.0;

    bool operator==(const Verbosity &) const = default;
};

/// Speed/verbosity profile of one simulated model. Text is fully
/// deterministic in (seed, task tag, prompt); each emitted delta counts as
/// exactly one token and reported completion_tokens equals the delta count.
struct MockProfile {
    std::string model_id;
    double ttft_ms = 0.0;
    double per_delta_ms = 0.0;
    std::map<std::string, Verbosity> verbosity; // task tag -> rule
    int granularity = 1;                        // characters per emitted token
    std::uint64_t seed = 0;

    bool operator==(const MockProfile &) const = default;
};

inline constexpr const char *kTagAnswerChoice = "answer_choice";
inline constexpr const char *kTagParaphrase = "paraphrase";
inline constexpr const char *kTagOpenAnswer = "open_answer";
inline constexpr const char *kTagDefault = "default";

void validate_profile(const MockProfile &profile);

/// Profile document, schema "mockprofiles/v1". Verbosity entries accept
/// either a bare number (constant) or {base, ratio}.
std::vector<MockProfile> parse_profiles(const std::string &text, const std::string &source);
std::vector<MockProfile> load_profiles(const std::string &path);
std::string profiles_document_bytes(const std::vector<MockProfile> &profiles);

/// Task recognition by the canonical instruction phrases of the default
/// prompt templates; anything else maps to the default tag.
std::string detect_task_tag(std::string_view prompt);

/// Which verbosity rule applies to a tag: the tag's own entry, else the
/// default entry.
Verbosity resolve_verbosity(const MockProfile &profile, std::string_view task_tag);

struct MockResponse {
    std::vector<std::string> deltas;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0; // always = deltas.size()
    std::string finish_reason;          // "stop", or "length" when capped
};

/// max_tokens <= 0 means uncapped.
MockResponse generate_mock_response(const MockProfile &profile, std::string_view task_tag,
                                    std::string_view prompt, std::int64_t max_tokens = 0);

struct ServerStats {
    std::int64_t active = 0;
    std::int64_t high_water = 0;
    std::int64_t served = 0;
};

/// OpenAI-compatible streaming endpoint over the registered profiles,
/// routed by the request "model" field. Delays are realized as real waits
/// scaled by time_scale in (0, 1]. Exposes GET /v1/models and GET
/// /debug/stats {active, high_water, served}.
class MockServer {
public:
    MockServer(std::vector<MockProfile> profiles, double time_scale = 1.0);
    ~MockServer();

    MockServer(const MockServer &) = delete;
    MockServer &operator=(const MockServer &) = delete;

    /// Bind and serve on a background thread. port 0 picks a free port.
    void start(const std::string &host = "127.0.0.1", int port = 0);
    void stop();
    /// Block until the server stops (for foreground serving).
    void wait();

    int port() const;
    std::string base_url() const;
    ServerStats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ttc::mock
