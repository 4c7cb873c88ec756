#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ttc::tokenize {

/// Byte-pair-encoding merge table. The base alphabet is byte level: every
/// single byte is a base symbol, so any input text is encodable. Rank equals
/// position in the merge list; lower rank merges first.
class MergeTable {
public:
    MergeTable() = default;
    MergeTable(std::string name, std::vector<std::pair<std::string, std::string>> merges);

    const std::string &name() const { return name_; }
    const std::vector<std::pair<std::string, std::string>> &merges() const { return merges_; }
    std::size_t size() const { return merges_.size(); }

    std::optional<int> rank_of(std::string_view left, std::string_view right) const;

private:
    std::string name_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::map<std::pair<std::string, std::string>, int, std::less<>> ranks_;
};

/// Parse a merge file: one "left right" pair per line, space separated,
/// rank = line order, lines starting with '#' ignored.
MergeTable load_merges(const std::string &path);
MergeTable parse_merges(std::istream &in, const std::string &source_name);

/// Greedy BPE segmentation: repeatedly merge the adjacent pair with the
/// lowest rank (leftmost occurrence wins among equal-rank candidates) until
/// no merge applies. Concatenating the result reproduces the input exactly.
std::vector<std::string> bpe_segment(std::string_view text, const MergeTable &table);

/// Fallback estimate: ceil(byte_length / 4).
std::int64_t approx_token_count(std::string_view text);

enum class TokenSource { server_usage, client_bpe, approximate };

const char *to_string(TokenSource source);
TokenSource token_source_from_string(std::string_view name);

struct TokenCountRecord {
    std::int64_t count = 0;
    TokenSource source = TokenSource::approximate;

    bool operator==(const TokenCountRecord &) const = default;
};

/// Inputs available when a count is requested: a server-reported usage
/// number (when the endpoint sent one) and an optional client-side table.
struct TokenCountContext {
    std::optional<std::int64_t> server_count;
    const MergeTable *table = nullptr;
};

std::vector<TokenSource> default_strategies();

/// Pick the first applicable strategy in preference order. `approximate`
/// always applies, so a list containing it never fails.
TokenCountRecord count_tokens(std::string_view text, const std::vector<TokenSource> &strategies,
                              const TokenCountContext &context);

} // namespace ttc::tokenize
