// Reference implementations kept deliberately naive and structurally
// unrelated to the library code. They are the second route for equivalence
// tests; do not "optimize" them into the shapes the library uses.
#pragma once

#include "ttc/tokenize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oracle {

/// Full-scan BPE: every round walks all adjacent pairs, picks the lowest
/// rank (leftmost on ties), merges exactly one pair, and starts over.
inline std::vector<std::string> naive_bpe_segment(std::string_view text,
                                                  const ttc::tokenize::MergeTable &table) {
    std::vector<std::string> symbols;
    symbols.reserve(text.size());
    for (char c : text) {
        symbols.push_back(std::string(1, c));
    }
    for (;;) {
        std::optional<int> best_rank;
        std::size_t best_pos = 0;
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
            const auto rank = table.rank_of(symbols[i], symbols[i + 1]);
            if (rank && (!best_rank || *rank < *best_rank)) {
                best_rank = *rank;
                best_pos = i;
            }
        }
        if (!best_rank) {
            return symbols;
        }
        symbols[best_pos] += symbols[best_pos + 1];
        symbols.erase(symbols.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
    }
}

/// Average ranks computed through a value -> positions map rather than an
/// argsort, then textbook Pearson in long double.
inline std::vector<long double> oracle_ranks(const std::vector<double> &values) {
    std::map<double, std::vector<std::size_t>> positions;
    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        positions[sorted[i]].push_back(i + 1);
    }
    std::vector<long double> ranks(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::vector<std::size_t> &pos = positions[values[i]];
        long double sum = 0.0L;
        for (std::size_t p : pos) {
            sum += static_cast<long double>(p);
        }
        ranks[i] = sum / static_cast<long double>(pos.size());
    }
    return ranks;
}

/// Returns false when either side has zero variance (rho undefined).
inline bool oracle_spearman(const std::vector<double> &values_a,
                            const std::vector<double> &values_b, long double &rho_out) {
    const std::vector<long double> ra = oracle_ranks(values_a);
    const std::vector<long double> rb = oracle_ranks(values_b);
    const auto n = static_cast<long double>(ra.size());
    long double ma = 0.0L;
    long double mb = 0.0L;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    long double cov = 0.0L;
    long double va = 0.0L;
    long double vb = 0.0L;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0L || vb == 0.0L) {
        return false;
    }
    rho_out = cov / std::sqrt(va * vb);
    return true;
}

} // namespace oracle
