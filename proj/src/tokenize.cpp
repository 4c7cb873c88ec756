#include "ttc/tokenize.hpp"

#include "ttc/errors.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace ttc::tokenize {

MergeTable::MergeTable(std::string name, std::vector<std::pair<std::string, std::string>> merges)
    : name_(std::move(name)), merges_(std::move(merges)) {
    for (std::size_t i = 0; i < merges_.size(); ++i) {
        ranks_.emplace(merges_[i], static_cast<int>(i));
    }
}

std::optional<int> MergeTable::rank_of(std::string_view left, std::string_view right) const {
    auto it = ranks_.find(std::make_pair(std::string(left), std::string(right)));
    if (it == ranks_.end()) {
        return std::nullopt;
    }
    return it->second;
}

MergeTable parse_merges(std::istream &in, const std::string &source_name) {
    std::vector<std::pair<std::string, std::string>> merges;
    std::set<std::pair<std::string, std::string>> seen;
    // Symbols producible so far: any single byte, plus outputs of earlier merges.
    std::set<std::string> produced;
    auto derivable = [&](const std::string &sym) {
        return sym.size() == 1 || produced.count(sym) > 0;
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        auto sep = line.find(' ');
        if (sep == std::string::npos || sep == 0 || sep + 1 >= line.size() ||
            line.find(' ', sep + 1) != std::string::npos) {
            throw ValidationError(source_name + ":" + std::to_string(line_no) +
                                  ": malformed merge line, expected \"left right\": " + line);
        }
        std::pair<std::string, std::string> pair{line.substr(0, sep), line.substr(sep + 1)};
        if (!seen.insert(pair).second) {
            throw ValidationError(source_name + ":" + std::to_string(line_no) +
                                  ": duplicate merge pair: " + line);
        }
        if (!derivable(pair.first) || !derivable(pair.second)) {
            throw ValidationError(source_name + ":" + std::to_string(line_no) +
                                  ": symbol not derivable from base alphabet plus earlier merges: " +
                                  line);
        }
        produced.insert(pair.first + pair.second);
        merges.push_back(std::move(pair));
    }
    return MergeTable(source_name, std::move(merges));
}

MergeTable load_merges(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open merge file: " + path);
    }
    return parse_merges(in, path);
}

namespace {

struct SymbolNode {
    std::string sym;
    int prev = -1;
    int next = -1;
    bool alive = true;
    std::size_t pos = 0; // byte offset of the symbol's first byte; stable
};

struct Candidate {
    int rank;
    std::size_t pos;
    int left;
    int right;
    std::string left_sym;
    std::string right_sym;
};

struct CandidateOrder {
    // Min-heap on (rank, pos): lowest rank first, leftmost occurrence on ties.
    bool operator()(const Candidate &a, const Candidate &b) const {
        if (a.rank != b.rank) return a.rank > b.rank;
        return a.pos > b.pos;
    }
};

} // namespace

std::vector<std::string> bpe_segment(std::string_view text, const MergeTable &table) {
    if (text.empty()) {
        return {};
    }

    std::vector<SymbolNode> nodes;
    nodes.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        SymbolNode n;
        n.sym = std::string(1, text[i]);
        n.prev = static_cast<int>(i) - 1;
        n.next = i + 1 < text.size() ? static_cast<int>(i) + 1 : -1;
        n.pos = i;
        nodes.push_back(std::move(n));
    }

    std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder> heap;
    auto push_candidate = [&](int left, int right) {
        if (left < 0 || right < 0) return;
        auto rank = table.rank_of(nodes[left].sym, nodes[right].sym);
        if (rank) {
            heap.push({*rank, nodes[left].pos, left, right, nodes[left].sym, nodes[right].sym});
        }
    };
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        push_candidate(static_cast<int>(i), static_cast<int>(i) + 1);
    }

    while (!heap.empty()) {
        Candidate c = heap.top();
        heap.pop();
        SymbolNode &l = nodes[c.left];
        SymbolNode &r = nodes[c.right];
        // Entries go stale when a neighbour was merged away; validate on pop.
        if (!l.alive || !r.alive || l.next != c.right || l.sym != c.left_sym ||
            r.sym != c.right_sym) {
            continue;
        }
        l.sym += r.sym;
        l.next = r.next;
        if (r.next >= 0) {
            nodes[r.next].prev = c.left;
        }
        r.alive = false;
        push_candidate(l.prev, c.left);
        push_candidate(c.left, l.next);
    }

    std::vector<std::string> out;
    for (int i = 0; i >= 0; i = nodes[i].next) {
        out.push_back(nodes[i].sym);
    }
    return out;
}

std::int64_t approx_token_count(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

const char *to_string(TokenSource source) {
    switch (source) {
    case TokenSource::server_usage: return "server_usage";
    case TokenSource::client_bpe: return "client_bpe";
    case TokenSource::approximate: return "approximate";
    }
    return "approximate";
}

TokenSource token_source_from_string(std::string_view name) {
    if (name == "server_usage") return TokenSource::server_usage;
    if (name == "client_bpe") return TokenSource::client_bpe;
    if (name == "approximate") return TokenSource::approximate;
    throw ValidationError("unknown token source: " + std::string(name));
}

std::vector<TokenSource> default_strategies() {
    return {TokenSource::server_usage, TokenSource::client_bpe, TokenSource::approximate};
}

TokenCountRecord count_tokens(std::string_view text, const std::vector<TokenSource> &strategies,
                              const TokenCountContext &context) {
    if (strategies.empty()) {
        throw ValidationError("count_tokens: strategies list is empty");
    }
    for (TokenSource s : strategies) {
        switch (s) {
        case TokenSource::server_usage:
            if (context.server_count) {
                return {*context.server_count, TokenSource::server_usage};
            }
            break;
        case TokenSource::client_bpe:
            if (context.table != nullptr) {
                return {static_cast<std::int64_t>(bpe_segment(text, *context.table).size()),
                        TokenSource::client_bpe};
            }
            break;
        case TokenSource::approximate:
            return {approx_token_count(text), TokenSource::approximate};
        }
    }
    // No listed strategy applied; fall back rather than fail.
    return {approx_token_count(text), TokenSource::approximate};
}

} // namespace ttc::tokenize
