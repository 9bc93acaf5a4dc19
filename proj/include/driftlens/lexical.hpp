#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "driftlens/error.hpp"
#include "driftlens/tokenizer.hpp"

namespace driftlens {

// Pooled reference table for modified n-gram precision: for each n, the
// maximum count of each n-gram within any single reference, plus the sorted
// reference lengths for the brevity penalty.
class ReferenceNGramTable {
public:
    ReferenceNGramTable(const std::vector<std::string>& reference_texts, std::size_t max_n)
        : max_n_(max_n), clipped_(max_n) {
        if (reference_texts.empty()) throw InputError("ReferenceNGramTable: empty reference corpus");
        if (max_n == 0) throw InputError("ReferenceNGramTable: max_n must be >= 1");
        for (const auto& text : reference_texts) {
            TokenSequence seq = tokenize(text);
            lengths_.push_back(seq.tokens.size());
            for (std::size_t n = 1; n <= max_n_; ++n) {
                for (const auto& [gram, count] : ngrams(seq, n)) {
                    auto& slot = clipped_[n - 1][gram];
                    slot = std::max(slot, count);
                }
            }
        }
        std::sort(lengths_.begin(), lengths_.end());
    }

    std::size_t max_n() const { return max_n_; }

    std::size_t clip_count(const NGram& gram, std::size_t n) const {
        const auto& table = clipped_.at(n - 1);
        auto it = table.find(gram);
        return it == table.end() ? 0 : it->second;
    }

    // Reference length closest to the candidate length; ties prefer the
    // shorter reference.
    std::size_t closest_length(std::size_t candidate_len) const {
        auto it = std::lower_bound(lengths_.begin(), lengths_.end(), candidate_len);
        if (it == lengths_.begin()) return *it;
        if (it == lengths_.end()) return lengths_.back();
        const std::size_t above = *it;
        const std::size_t below = *(it - 1);
        return (candidate_len - below <= above - candidate_len) ? below : above;
    }

private:
    std::size_t max_n_;
    std::vector<NGramCounts> clipped_;
    std::vector<std::size_t> lengths_;
};

// Candidate n-gram counts clipped by the reference table.
// Returns (clipped matches, candidate n-gram total).
inline std::pair<std::size_t, std::size_t> modified_precision(const TokenSequence& candidate,
                                                              const ReferenceNGramTable& refs,
                                                              std::size_t n) {
    if (n == 0 || n > refs.max_n()) throw InputError("modified_precision: n out of range");
    std::size_t matches = 0;
    std::size_t total = 0;
    for (const auto& [gram, count] : ngrams(candidate, n)) {
        matches += std::min(count, refs.clip_count(gram, n));
        total += count;
    }
    return {matches, total};
}

struct BleuScore {
    double value = 0.0;
    std::vector<double> precisions;  // smoothed, index 0 holds n = 1
    double brevity_penalty = 1.0;
};

// Corpus-level BLEU of Q-candidates against pooled P-references. Clipped
// matches and totals are summed across candidates per n; zero precisions are
// epsilon-floored rather than zeroing the score, since shifted corpora
// routinely share no 4-grams.
inline BleuScore corpus_bleu(const std::vector<std::string>& candidate_texts,
                             const std::vector<std::string>& reference_texts,
                             std::size_t max_n = 4, double smoothing_epsilon = 1e-9) {
    if (candidate_texts.empty()) throw InputError("corpus_bleu: empty candidate corpus");
    ReferenceNGramTable refs(reference_texts, max_n);
    std::vector<std::size_t> matches(max_n, 0);
    std::vector<std::size_t> totals(max_n, 0);
    std::size_t candidate_len = 0;
    std::size_t reference_len = 0;
    for (const auto& text : candidate_texts) {
        TokenSequence seq = tokenize(text);
        candidate_len += seq.tokens.size();
        reference_len += refs.closest_length(seq.tokens.size());
        for (std::size_t n = 1; n <= max_n; ++n) {
            auto [m, t] = modified_precision(seq, refs, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    BleuScore score;
    score.precisions.resize(max_n);
    double log_sum = 0.0;
    for (std::size_t n = 0; n < max_n; ++n) {
        score.precisions[n] = (static_cast<double>(matches[n]) + smoothing_epsilon) /
                              (static_cast<double>(totals[n]) + smoothing_epsilon);
        log_sum += std::log(score.precisions[n]);
    }
    score.brevity_penalty =
        candidate_len >= reference_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(reference_len) / static_cast<double>(candidate_len));
    score.value = score.brevity_penalty * std::exp(log_sum / static_cast<double>(max_n));
    return score;
}

struct OverlapReport {
    double record_fraction = 0.0;  // eval records containing >= 1 contaminated k-gram
    double gram_fraction = 0.0;    // eval k-gram instances found in train
    std::size_t k = 8;
    bool degenerate = false;  // no k-grams on one side (all records shorter than k)
};

// Contamination check: which eval k-grams already exist in the training data.
inline OverlapReport ngram_overlap(const std::vector<std::string>& train_texts,
                                   const std::vector<std::string>& eval_texts, std::size_t k = 8) {
    if (k == 0) throw InputError("ngram_overlap: k must be >= 1");
    OverlapReport report;
    report.k = k;
    std::unordered_set<NGram, NGramHash> train_grams;
    for (const auto& text : train_texts) {
        for (const auto& [gram, count] : ngrams(tokenize(text), k)) train_grams.insert(gram);
    }
    std::size_t contaminated_records = 0;
    std::size_t gram_instances = 0;
    std::size_t gram_hits = 0;
    for (const auto& text : eval_texts) {
        bool hit = false;
        for (const auto& [gram, count] : ngrams(tokenize(text), k)) {
            gram_instances += count;
            if (train_grams.count(gram)) {
                gram_hits += count;
                hit = true;
            }
        }
        if (hit) ++contaminated_records;
    }
    if (train_grams.empty() || gram_instances == 0) {
        report.degenerate = true;
        return report;
    }
    report.record_fraction =
        static_cast<double>(contaminated_records) / static_cast<double>(eval_texts.size());
    report.gram_fraction = static_cast<double>(gram_hits) / static_cast<double>(gram_instances);
    return report;
}

} // namespace driftlens
