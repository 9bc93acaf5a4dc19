#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "driftlens/error.hpp"

// Deterministic tokenization for every lexical and language-model measure.
// The scheme is fixed because every downstream number depends on it:
//   * UTF-8 input, invalid bytes decoded as U+FFFD
//   * runs of word characters (letters/digits) become one token
//   * every other non-whitespace code point is a single-character token
//   * whitespace separates tokens and is discarded
//   * word tokens are lowercased via simple case folding (ASCII, Latin-1,
//     Latin Extended-A, Greek, Cyrillic, fullwidth Latin; other scripts
//     pass through unchanged)

namespace driftlens {

struct TokenSequence {
    std::vector<std::string> tokens;
};

namespace unicode {

// Decode one UTF-8 code point starting at s[i]; advances i past it.
inline char32_t decode(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        unsigned char bk = byte(i + k);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += len;
    // Reject overlong encodings and surrogates.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
        return 0xFFFD;
    }
    return cp;
}

inline void encode(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline bool is_whitespace(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return (cp >= 0x2000 && cp <= 0x200A);
    }
}

// Coarse letter/digit test. ASCII is exact; outside ASCII, known punctuation,
// symbol, and currency blocks are excluded and everything else counts as a
// word character (so unlisted scripts tokenize as words rather than
// shattering into single code points).
inline bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z');
    }
    if (is_whitespace(cp)) return false;
    if (cp >= 0xA1 && cp <= 0xBF) return false;  // Latin-1 punctuation and symbols
    if (cp == 0xD7 || cp == 0xF7) return false;  // multiplication / division signs
    if (cp >= 0x2010 && cp <= 0x206F) return false;  // general punctuation
    if (cp >= 0x20A0 && cp <= 0x20CF) return false;  // currency symbols
    if (cp >= 0x2100 && cp <= 0x27BF) return false;  // symbols, arrows, math, dingbats
    if (cp >= 0x2E00 && cp <= 0x2E7F) return false;  // supplemental punctuation
    if (cp >= 0x3001 && cp <= 0x303F) return false;  // CJK punctuation
    if (cp >= 0xFE10 && cp <= 0xFE6F) return false;  // vertical/small/compat forms
    if ((cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
        (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65)) {
        return false;  // fullwidth punctuation
    }
    if (cp == 0xFFFD) return false;
    return true;
}

inline char32_t fold_case(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp < 0xC0) return cp;
    if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 32;  // Latin-1 uppercase
    if (cp >= 0x100 && cp <= 0x137 && cp != 0x130 && cp != 0x131) {
        return (cp % 2 == 0) ? cp + 1 : cp;  // Latin Extended-A, even-coded pairs
    }
    if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp == 0x178) return 0xFF;
    if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp == 0x17F) return 0x73;  // long s
    if (cp == 0x386) return 0x3AC;
    if (cp >= 0x388 && cp <= 0x38A) return cp + 0x25;
    if (cp == 0x38C) return 0x3CC;
    if (cp == 0x38E || cp == 0x38F) return cp + 0x3F;
    if (cp >= 0x391 && cp <= 0x3A1) return cp + 32;  // Greek
    if (cp >= 0x3A3 && cp <= 0x3AB) return cp + 32;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 80;  // Cyrillic with diacritics
    if (cp >= 0x410 && cp <= 0x42F) return cp + 32;  // Cyrillic
    if (cp >= 0xFF21 && cp <= 0xFF3A) return cp + 32;  // fullwidth A-Z
    return cp;
}

} // namespace unicode

inline TokenSequence tokenize(std::string_view text) {
    TokenSequence seq;
    std::string word;
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = unicode::decode(text, i);
        if (unicode::is_word_char(cp)) {
            unicode::encode(unicode::fold_case(cp), word);
            continue;
        }
        if (!word.empty()) {
            seq.tokens.push_back(std::move(word));
            word.clear();
        }
        if (!unicode::is_whitespace(cp)) {
            std::string punct;
            unicode::encode(cp, punct);
            seq.tokens.push_back(std::move(punct));
        }
    }
    if (!word.empty()) seq.tokens.push_back(std::move(word));
    return seq;
}

using NGram = std::vector<std::string>;

struct NGramHash {
    std::size_t operator()(const NGram& g) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& t : g) {
            for (unsigned char c : t) {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
            h ^= 0x1F;  // token separator
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

using NGramCounts = std::unordered_map<NGram, std::size_t, NGramHash>;

// All |seq| - n + 1 contiguous windows, with multiplicity.
inline NGramCounts ngrams(const TokenSequence& seq, std::size_t n) {
    if (n == 0) throw InputError("ngrams: n must be >= 1");
    NGramCounts counts;
    if (seq.tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= seq.tokens.size(); ++i) {
        NGram g(seq.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                seq.tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
        ++counts[std::move(g)];
    }
    return counts;
}

// Token -> (dense id, count). Ids are assigned in first-seen order over the
// corpora the vocabulary was built from, so identical inputs yield identical
// id assignments.
class Vocabulary {
public:
    void add(const std::string& token, std::size_t count = 1) {
        auto [it, inserted] = index_.try_emplace(token, tokens_.size());
        if (inserted) {
            tokens_.push_back(token);
            counts_.push_back(0);
        }
        counts_[it->second] += count;
        total_ += count;
    }

    void add_sequence(const TokenSequence& seq) {
        for (const auto& t : seq.tokens) add(t);
    }

    std::size_t size() const { return tokens_.size(); }
    std::size_t total_count() const { return total_; }

    bool contains(const std::string& token) const { return index_.count(token) > 0; }

    std::size_t id_of(const std::string& token) const {
        auto it = index_.find(token);
        if (it == index_.end()) throw InputError("Vocabulary: unknown token '" + token + "'");
        return it->second;
    }

    const std::string& token_at(std::size_t id) const { return tokens_.at(id); }
    std::size_t count_at(std::size_t id) const { return counts_.at(id); }

private:
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> tokens_;
    std::vector<std::size_t> counts_;
    std::size_t total_ = 0;
};

struct RankFrequency {
    struct Entry {
        std::size_t rank;  // 1-based
        double probability;
        std::string token;
    };
    std::vector<Entry> entries;  // probabilities non-increasing in rank
};

namespace detail {

// Token counts of a batch of texts, accumulated into `vocab`.
inline void count_tokens(const std::vector<std::string>& texts, Vocabulary& vocab) {
    for (const auto& text : texts) vocab.add_sequence(tokenize(text));
}

} // namespace detail

// Add-alpha smoothed relative frequencies over a caller-supplied vocabulary.
// The vocabulary is typically the union of both corpora under comparison so
// that the two distributions share support.
inline std::vector<double> unigram_distribution(const std::vector<std::string>& texts,
                                                const Vocabulary& vocab, double alpha) {
    if (texts.empty()) throw InputError("unigram_distribution: empty corpus");
    if (alpha < 0) throw InputError("unigram_distribution: alpha must be >= 0");
    if (vocab.size() == 0) throw InputError("unigram_distribution: empty vocabulary");
    std::vector<double> counts(vocab.size(), 0.0);
    double total = 0.0;
    for (const auto& text : texts) {
        for (const auto& tok : tokenize(text).tokens) {
            if (vocab.contains(tok)) {
                counts[vocab.id_of(tok)] += 1.0;
                total += 1.0;
            }
        }
    }
    const double denom = total + alpha * static_cast<double>(vocab.size());
    if (denom <= 0.0) throw InputError("unigram_distribution: no tokens and alpha = 0");
    std::vector<double> probs(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) probs[i] = (counts[i] + alpha) / denom;
    return probs;
}

// Debug export: (token, count) pairs sorted by count descending then token.
inline nlohmann::ordered_json token_stats_json(const Vocabulary& vocab) {
    std::vector<std::size_t> ids(vocab.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
        if (vocab.count_at(a) != vocab.count_at(b)) return vocab.count_at(a) > vocab.count_at(b);
        return vocab.token_at(a) < vocab.token_at(b);
    });
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (std::size_t id : ids) out.push_back({vocab.token_at(id), vocab.count_at(id)});
    return out;
}

// Token probabilities sorted descending, truncated to top_r ranks.
// Count ties break lexicographically by token.
inline RankFrequency rank_frequency(const std::vector<std::string>& texts, std::size_t top_r) {
    if (texts.empty()) throw InputError("rank_frequency: empty corpus");
    if (top_r == 0) throw InputError("rank_frequency: top_r must be >= 1");
    Vocabulary vocab;
    detail::count_tokens(texts, vocab);
    std::vector<std::size_t> ids(vocab.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
        if (vocab.count_at(a) != vocab.count_at(b)) return vocab.count_at(a) > vocab.count_at(b);
        return vocab.token_at(a) < vocab.token_at(b);
    });
    RankFrequency rf;
    const double total = static_cast<double>(vocab.total_count());
    const std::size_t limit = std::min(top_r, ids.size());
    rf.entries.reserve(limit);
    for (std::size_t r = 0; r < limit; ++r) {
        rf.entries.push_back({r + 1, static_cast<double>(vocab.count_at(ids[r])) / total,
                              vocab.token_at(ids[r])});
    }
    return rf;
}

} // namespace driftlens
