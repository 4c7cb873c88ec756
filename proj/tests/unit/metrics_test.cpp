#include "doctest.h"

#include "support/oracles.hpp"
#include "support/test_util.hpp"
#include "ttc/errors.hpp"
#include "ttc/metrics.hpp"
#include "ttc/runner.hpp"

#include <cmath>
#include <random>

using namespace ttc;
using namespace ttc::metrics;

namespace {

client::RequestTrace timed_trace(const std::string &case_id, std::int64_t dispatch_ns,
                                 std::vector<std::int64_t> deltas, std::int64_t done_ns,
                                 std::int64_t n_in, std::int64_t n_out) {
    client::RequestTrace t;
    t.case_id = case_id;
    t.model_id = "m";
    t.ts_dispatch = dispatch_ns;
    t.delta_timestamps = deltas;
    if (!deltas.empty())
        t.ts_first_delta = deltas.front();
    t.ts_done = done_ns;
    t.usage = client::Usage{n_in, n_out};
    t.input_tokens = tokenize::TokenCountRecord{n_in, tokenize::TokenSource::server_usage};
    t.output_tokens = tokenize::TokenCountRecord{n_out, tokenize::TokenSource::server_usage};
    t.finish_reason = "stop";
    return t;
}

runner::TaskRunRecord record_with(std::vector<client::RequestTrace> traces,
                                  std::int64_t wall_start, std::int64_t wall_end) {
    runner::TaskRunRecord r;
    r.run_id = "m__answer_choice__b1";
    r.model_id = "m";
    r.task_kind = suite::TaskKind::answer_choice;
    r.wall_start = wall_start;
    r.wall_end = wall_end;
    r.traces = std::move(traces);
    r.tool_version = "0.1.0";
    return r;
}

} // namespace

TEST_CASE("per-request metrics are exact quotients of the trace timestamps") {
    // 0.4s to first token, done at 1.0s, 2 output tokens.
    auto t = timed_trace("c1", 0, {400000000, 1000000000}, 1000000000, 10, 2);
    auto m = request_metrics(t);
    CHECK_FALSE(m.excluded);
    CHECK(m.ttft_s.value() == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(m.e2e_s.value() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.decode_time_s.value() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(m.per_token_e2e_s.value() == doctest::Approx(0.5).epsilon(1e-12));
    // Two tokens, one decode gap.
    CHECK(m.decode_tpot_s.value() == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("degenerate token counts null the derived rates") {
    SUBCASE("zero output tokens") {
        auto t = timed_trace("c1", 0, {}, 500000000, 10, 0);
        t.ts_first_delta.reset();
        auto m = request_metrics(t);
        CHECK_FALSE(m.excluded);
        CHECK_FALSE(m.per_token_e2e_s.has_value());
        CHECK_FALSE(m.decode_tpot_s.has_value());
        CHECK_FALSE(m.ttft_s.has_value());
        CHECK(m.e2e_s.value() == doctest::Approx(0.5));
    }
    SUBCASE("a single token has no decode gap") {
        auto t = timed_trace("c1", 0, {300000000}, 300000000, 10, 1);
        auto m = request_metrics(t);
        CHECK(m.per_token_e2e_s.value() == doctest::Approx(0.3));
        CHECK_FALSE(m.decode_tpot_s.has_value());
    }
    SUBCASE("error traces are excluded with null durations") {
        client::RequestTrace t;
        t.case_id = "c1";
        t.ts_dispatch = 0;
        t.error = client::RequestError{client::RequestErrorKind::timeout, 0, "read timeout"};
        auto m = request_metrics(t);
        CHECK(m.excluded);
        CHECK_FALSE(m.ttft_s.has_value());
        CHECK_FALSE(m.e2e_s.has_value());
        CHECK_FALSE(m.per_token_e2e_s.has_value());
    }
}

TEST_CASE("task summary pools times over tokens, not per-request means") {
    // Two requests: 1.0s/2 tokens and 3.0s/6 tokens. The pooled mean is
    // 4.0/8 = 0.5, not the average of 0.5 and 0.5 by accident: change one
    // and the pooled value moves by token weight.
    auto t1 = timed_trace("c1", 0, {400000000, 1000000000}, 1000000000, 10, 2);
    auto t2 = timed_trace("c2", 0,
                          {500000000, 1000000000, 1500000000, 2000000000, 2500000000,
                           3000000000},
                          3000000000, 12, 6);
    auto rec = record_with({t1, t2}, 0, 3000000000);
    auto s = summarize_task(rec);
    CHECK(s.wall_time_s == doctest::Approx(3.0));
    CHECK(s.total_in == 22);
    CHECK(s.total_out == 8);
    CHECK(s.completed == 2);
    CHECK(s.failed == 0);
    CHECK(s.mean_time_per_output_token_s.value() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.throughput_tok_s.value() == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
    // Gap means: t1 has one 0.6s gap; t2 five 0.5s gaps -> request tpots
    // 0.6 and 0.5, averaged 0.55.
    CHECK(s.decode_tpot_mean_s.value() == doctest::Approx(0.55).epsilon(1e-12));

    SUBCASE("token-weighted consistency under a third request") {
        auto t3 = timed_trace("c3", 0, {200000000, 2200000000}, 2200000000, 5, 2);
        auto rec3 = record_with({t1, t2, t3}, 0, 3000000000);
        auto s3 = summarize_task(rec3);
        CHECK(s3.mean_time_per_output_token_s.value() ==
              doctest::Approx((1.0 + 3.0 + 2.2) / 10.0).epsilon(1e-12));
    }
}

TEST_CASE("failed requests count toward failures, not aggregates") {
    auto good = timed_trace("c1", 0, {500000000}, 500000000, 10, 1);
    client::RequestTrace bad;
    bad.case_id = "c2";
    bad.model_id = "m";
    bad.ts_dispatch = 0;
    bad.error = client::RequestError{client::RequestErrorKind::connect_failure, 0, "refused"};
    auto rec = record_with({good, bad}, 0, 600000000);
    auto s = summarize_task(rec);
    CHECK(s.completed == 1);
    CHECK(s.failed == 1);
    CHECK(s.total_in == 10);
    CHECK(s.total_out == 1);
    CHECK(s.completed + s.failed == rec.traces.size());

    SUBCASE("all requests failed leaves rates null, tallies full") {
        auto rec2 = record_with({bad, bad}, 0, 600000000);
        auto s2 = summarize_task(rec2);
        CHECK(s2.failed == 2);
        CHECK(s2.total_out == 0);
        CHECK_FALSE(s2.mean_time_per_output_token_s.has_value());
        CHECK_FALSE(s2.decode_tpot_mean_s.has_value());
    }
}

TEST_CASE("metric names resolve and unknown names list the vocabulary") {
    auto t1 = timed_trace("c1", 0, {500000000}, 500000000, 10, 1);
    auto s = summarize_task(record_with({t1}, 0, 500000000));
    CHECK(metric_value(s, "wall_time").value() == doctest::Approx(0.5));
    CHECK(metric_value(s, "total_in").value() == doctest::Approx(10.0));
    CHECK(metric_value(s, "throughput").value() == doctest::Approx(2.0));
    CHECK_THROWS_WITH_AS(metric_value(s, "velocity"), doctest::Contains("wall_time"),
                         ValidationError);
}

TEST_CASE("ranking averages ties and starts at one") {
    auto ranks = rank_values({2.0, 2.0, 5.0}, Direction::ascending);
    CHECK(ranks == std::vector<double>{1.5, 1.5, 3.0});
    CHECK(rank_values({3.0, 1.0, 2.0}, Direction::ascending) ==
          std::vector<double>{3.0, 1.0, 2.0});
    CHECK(rank_values({3.0, 1.0, 2.0}, Direction::descending) ==
          std::vector<double>{1.0, 3.0, 2.0});
    CHECK(rank_values({7.0, 7.0, 7.0, 7.0}, Direction::ascending) ==
          std::vector<double>{2.5, 2.5, 2.5, 2.5});
}

TEST_CASE("model ranking rejects null metrics by name") {
    auto t1 = timed_trace("c1", 0, {500000000}, 500000000, 10, 1);
    auto s1 = summarize_task(record_with({t1}, 0, 500000000));
    auto s2 = s1;
    s2.model_id = "m2";
    s2.mean_time_per_output_token_s.reset();
    CHECK_THROWS_WITH_AS(rank_by({s1, s2}, "mean_time_per_output_token"),
                         doctest::Contains("m2"), ValidationError);

    auto s3 = s1;
    s3.model_id = "m3";
    s3.mean_time_per_output_token_s = 0.25;
    auto ranked = rank_by({s1, s3}, "mean_time_per_output_token");
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].model_id == "m");
    CHECK(ranked[0].rank == 2.0);
    CHECK(ranked[1].rank == 1.0);
}

TEST_CASE("spearman handles the documented rank-vector cases") {
    SUBCASE("worked example") {
        auto r = spearman_rho({1, 2, 3, 4}, {2, 1, 4, 3});
        CHECK(r.rho.value() == doctest::Approx(0.6).epsilon(1e-12));
    }
    SUBCASE("identical and reversed rankings are exactly one in magnitude") {
        auto one = spearman_rho({1, 2, 3}, {1, 2, 3});
        CHECK(one.rho.value() == 1.0);
        auto neg = spearman_rho({1, 2, 3}, {3, 2, 1});
        CHECK(neg.rho.value() == -1.0);
        // Average-rank ties still reverse exactly: rank r maps to n+1-r.
        auto tied = spearman_rho({1, 2.5, 2.5, 4}, {4, 2.5, 2.5, 1});
        CHECK(tied.rho.value() == -1.0);
    }
    SUBCASE("zero variance is null with an explanation") {
        auto r = spearman_rho({2, 2, 2}, {1, 2, 3});
        CHECK_FALSE(r.rho.has_value());
        CHECK(r.note.find("variance") != std::string::npos);
        CHECK(r.note.find("first") != std::string::npos);
        auto r2 = spearman_rho({1, 2, 3}, {2, 2, 2});
        CHECK(r2.note.find("second") != std::string::npos);
    }
    SUBCASE("length mismatch and tiny inputs are errors") {
        CHECK_THROWS_AS(spearman_rho({1, 2}, {1, 2, 3}), ValidationError);
        CHECK_THROWS_AS(spearman_rho({1}, {1}), ValidationError);
        CHECK_THROWS_AS(spearman_rho({}, {}), ValidationError);
    }
}

TEST_CASE("rank-then-correlate agrees with an independent reference on random data") {
    std::mt19937_64 rng(424242);
    int compared = 0;
    for (int t = 0; t < 1000; ++t) {
        auto n = 2 + rng() % 7;
        std::vector<double> a(n), b(n);
        for (auto &x : a)
            x = static_cast<double>(rng() % 5);
        for (auto &x : b)
            x = static_cast<double>(rng() % 5);
        long double want = 0.0L;
        bool defined = oracle::oracle_spearman(a, b, want);
        auto got = spearman_rho(rank_values(a, Direction::ascending),
                                rank_values(b, Direction::ascending));
        CHECK(got.rho.has_value() == defined);
        if (defined && got.rho.has_value()) {
            CHECK(std::abs(*got.rho - static_cast<double>(want)) <= 1e-12);
            CHECK(*got.rho >= -1.0);
            CHECK(*got.rho <= 1.0);
            ++compared;
        }
    }
    CHECK(compared > 500);
}

namespace {

TaskSummary quick_summary(const std::string &model, double per_token, double wall) {
    auto t1 = timed_trace("c1", 0, {500000000}, 500000000, 10, 1);
    auto rec = record_with({t1}, 0, 500000000);
    auto s = summarize_task(rec);
    s.model_id = model;
    s.mean_time_per_output_token_s = per_token;
    s.wall_time_s = wall;
    return s;
}

} // namespace

TEST_CASE("discordance pairs are exactly the rank inversions") {
    // fast: best per token, worst wall. slow: the reverse. mid: concordant.
    auto fast = quick_summary("fast", 0.010, 9.0);
    auto mid = quick_summary("mid", 0.020, 5.0);
    auto slow = quick_summary("slow", 0.030, 1.0);
    auto cmp = discordance_report({fast, mid, slow});
    CHECK(cmp.metric_a == "mean_time_per_output_token");
    CHECK(cmp.metric_b == "wall_time");
    REQUIRE(cmp.spearman.rho.has_value());
    CHECK(*cmp.spearman.rho == -1.0);
    std::vector<std::pair<std::string, std::string>> expected = {
        {"fast", "mid"}, {"fast", "slow"}, {"mid", "slow"}};
    CHECK(cmp.discordant_pairs == expected);

    SUBCASE("concordant metrics have no pairs") {
        auto a = quick_summary("a", 0.010, 1.0);
        auto b = quick_summary("b", 0.020, 2.0);
        auto c = discordance_report({a, b});
        CHECK(c.discordant_pairs.empty());
        CHECK(*c.spearman.rho == 1.0);
    }
    SUBCASE("fewer than two comparable models is an error") {
        auto lone = quick_summary("lone", 0.010, 1.0);
        auto broken = quick_summary("broken", 0.020, 2.0);
        broken.mean_time_per_output_token_s.reset();
        CHECK_THROWS_WITH_AS(discordance_report({lone, broken}), doctest::Contains("2"),
                             ValidationError);
    }
    SUBCASE("custom metric pair") {
        auto a = quick_summary("a", 0.010, 1.0);
        a.decode_tpot_mean_s = 0.011;
        auto b = quick_summary("b", 0.020, 2.0);
        b.decode_tpot_mean_s = 0.022;
        auto c = discordance_report({a, b}, "decode_tpot", "wall_time");
        CHECK(c.metric_a == "decode_tpot");
        CHECK(c.discordant_pairs.empty());
        CHECK(*c.spearman.rho == 1.0);
    }
}

TEST_CASE("memory estimates are exact for the documented sizes") {
    CHECK(estimate_model_memory_bytes(7000000000LL, 16) == 14000000000LL);
    CHECK(estimate_model_memory_gb(7000000000LL, 16) == 14.0);
    CHECK(estimate_model_memory_gb(70000000000LL, 16) == 140.0);
    CHECK(estimate_model_memory_gb(70000000000LL, 4) == 35.0);
    CHECK(estimate_model_memory_gb(70000000000LL, 8) == 70.0);
    // Linear in both arguments.
    CHECK(estimate_model_memory_bytes(2 * 3500000000LL, 16) ==
          2 * estimate_model_memory_bytes(3500000000LL, 16));
    CHECK_THROWS_AS(estimate_model_memory_bytes(0, 16), ValidationError);
    CHECK_THROWS_AS(estimate_model_memory_bytes(1000, 0), ValidationError);
}
