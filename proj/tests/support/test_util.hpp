#pragma once

#include "ttc/mockserver.hpp"
#include "ttc/runner.hpp"
#include "ttc/suite.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

namespace testutil {

inline std::vector<ttc::suite::Question> make_questions(int n) {
    std::vector<ttc::suite::Question> questions;
    questions.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        ttc::suite::Question q;
        q.id = "q" + std::to_string(i);
        q.stem = "What is item number " + std::to_string(i) + " in the catalogue?";
        const int n_choices = 2 + (i % 3);
        for (int j = 0; j < n_choices; ++j) {
            ttc::suite::Choice c;
            c.label = std::string(1, static_cast<char>('a' + j));
            c.text = "candidate " + std::to_string(i) + "-" + std::to_string(j);
            q.choices.push_back(c);
        }
        q.answer_key = q.choices[static_cast<std::size_t>(i) % q.choices.size()].label;
        questions.push_back(std::move(q));
    }
    return questions;
}

inline ttc::suite::TaskSuite
make_suite(int n, const std::set<ttc::suite::TaskKind> &kinds = {
                      ttc::suite::TaskKind::answer_choice, ttc::suite::TaskKind::paraphrase,
                      ttc::suite::TaskKind::open_answer}) {
    return ttc::suite::build_suite(make_questions(n), kinds, ttc::suite::default_templates(),
                                   "fnv1a64:0000000000000000", "2026-01-01T00:00:00Z");
}

inline ttc::mock::MockProfile make_profile(const std::string &model_id, double ttft_ms,
                                           double per_delta_ms, double answer_tokens) {
    ttc::mock::MockProfile p;
    p.model_id = model_id;
    p.ttft_ms = ttft_ms;
    p.per_delta_ms = per_delta_ms;
    p.granularity = 4;
    p.seed = 7;
    p.verbosity[ttc::mock::kTagAnswerChoice] = {answer_tokens, 0.0};
    p.verbosity[ttc::mock::kTagDefault] = {answer_tokens, 0.0};
    return p;
}

inline ttc::client::ModelTarget target_for(const ttc::mock::MockServer &server,
                                           const std::string &model_id) {
    ttc::client::ModelTarget t;
    t.base_url = server.base_url();
    t.model_id = model_id;
    return t;
}

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string &tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("ttc_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path &path() const { return path_; }
    std::string file(const std::string &name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

} // namespace testutil
