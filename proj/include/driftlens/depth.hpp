#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "driftlens/corpus.hpp"
#include "driftlens/embed.hpp"
#include "driftlens/error.hpp"
#include "driftlens/rng.hpp"

namespace driftlens {

// Similarity-based statistical depth of an embedding with respect to a
// reference sample:
//
//   depth(x, R) = 2 - mean_{r in R} (1 - cos(x, r))
//
// so identical directions score 2, orthogonal 1, antipodal 0. Scoring an
// in-sample point passes its own index as exclude_index; without the
// exclusion the self-distance of 0 biases in-sample depths upward.
inline double tte_depth(std::span<const float> x, const EmbeddingMatrix& reference,
                        std::optional<std::size_t> exclude_index = std::nullopt) {
    if (x.size() != reference.dim) throw InputError("tte_depth: dimension mismatch");
    if (reference.rows == 0 || (exclude_index && reference.rows < 2)) {
        throw InputError("tte_depth: reference too small");
    }
    double nx = 0.0;
    for (float v : x) nx += static_cast<double>(v) * v;
    if (nx == 0.0) throw InputError("tte_depth: zero-norm query vector");
    nx = std::sqrt(nx);
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < reference.rows; ++i) {
        if (exclude_index && *exclude_index == i) continue;
        auto r = reference.row(i);
        double dot = 0.0, nr = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) {
            dot += static_cast<double>(x[j]) * r[j];
            nr += static_cast<double>(r[j]) * r[j];
        }
        if (nr == 0.0) {
            throw InputError("tte_depth: zero-norm reference vector (record '" +
                             reference.alignment[i] + "')");
        }
        total += 1.0 - dot / (nx * std::sqrt(nr));
        ++used;
    }
    return 2.0 - total / static_cast<double>(used);
}

struct DepthScores {
    std::vector<std::pair<std::string, double>> entries;  // (record_id, depth)
    std::string reference_label;
};

// Depth of every row of `sample` w.r.t. `reference`. When the sample IS the
// reference, self_exclude scores each row against the others only.
inline DepthScores depth_scores(const EmbeddingMatrix& sample, const EmbeddingMatrix& reference,
                                bool self_exclude, std::string reference_label = {}) {
    DepthScores out;
    out.reference_label = std::move(reference_label);
    out.entries.reserve(sample.rows);
    for (std::size_t i = 0; i < sample.rows; ++i) {
        std::optional<std::size_t> excl;
        if (self_exclude) excl = i;
        out.entries.emplace_back(sample.alignment[i], tte_depth(sample.row(i), reference, excl));
    }
    return out;
}

struct DeltaScore {
    double value = 0.5;
    std::size_t n = 0;
    std::size_t m = 0;
};

// Comparison kernel: fraction of (x, y) depth pairs with D(x) < D(y), ties
// counted half. Comparing any multiset of depths against itself gives
// exactly 0.5.
inline double delta_from_depths(std::span<const double> x_depths,
                                std::span<const double> y_depths) {
    if (x_depths.empty() || y_depths.empty()) throw InputError("delta_from_depths: empty input");
    double acc = 0.0;
    for (double dx : x_depths) {
        for (double dy : y_depths) {
            if (dx < dy) acc += 1.0;
            else if (dx == dy) acc += 0.5;
        }
    }
    return acc / (static_cast<double>(x_depths.size()) * static_cast<double>(y_depths.size()));
}

// Delta(P, Q): probability that a reference-sample point is no deeper w.r.t.
// the reference than a comparison-sample point. X depths use self-exclusion.
// Y depths are scored against the full X sample, except that a Y row that IS
// a member of the X sample (same record_id) excludes itself too; exclusion
// semantics stay consistent, so comparing a sample against itself lands on
// exactly 0.5. 0.5 means indistinguishable; lower means Q is less
// representative of P.
inline DeltaScore delta_score(const EmbeddingMatrix& x_sample, const EmbeddingMatrix& y_sample) {
    if (x_sample.dim != y_sample.dim) throw InputError("delta_score: dimension mismatch");
    if (x_sample.rows == 0 || y_sample.rows == 0) throw InputError("delta_score: empty sample");
    std::vector<double> dx(x_sample.rows);
    for (std::size_t i = 0; i < x_sample.rows; ++i) {
        dx[i] = tte_depth(x_sample.row(i), x_sample, i);
    }
    std::unordered_map<std::string, std::size_t> x_index;
    x_index.reserve(x_sample.rows);
    for (std::size_t i = 0; i < x_sample.rows; ++i) x_index.emplace(x_sample.alignment[i], i);
    std::vector<double> dy(y_sample.rows);
    for (std::size_t j = 0; j < y_sample.rows; ++j) {
        std::optional<std::size_t> excl;
        auto it = x_index.find(y_sample.alignment[j]);
        if (it != x_index.end()) excl = it->second;
        dy[j] = tte_depth(y_sample.row(j), x_sample, excl);
    }
    DeltaScore score;
    score.n = x_sample.rows;
    score.m = y_sample.rows;
    score.value = delta_from_depths(dx, dy);
    return score;
}

// ---------------------------------------------------------------------------
// Shift-representative prompt pairs
// ---------------------------------------------------------------------------

struct RepresentativePair {
    std::string id_record;
    double id_depth;
    std::string ood_record;
    double ood_depth;
};

namespace detail {

// Slice size for a percentile cut, at least 1 record.
inline std::size_t percentile_slice(std::size_t n, unsigned percentile) {
    std::size_t s = n * percentile / 100;
    return std::max<std::size_t>(1, std::min(s, n));
}

} // namespace detail

// ID candidates: top percentile% by depth w.r.t. the ID sample (most
// source-representative). OOD candidates: bottom percentile% by depth w.r.t.
// the ID sample (most emblematic of the shift). `count` pairs are sampled
// without replacement from each slice and zipped.
inline std::vector<RepresentativePair> representative_pairs(
    const Corpus& id_corpus, const EmbeddingMatrix& id_embeddings, const Corpus& ood_corpus,
    const EmbeddingMatrix& ood_embeddings, unsigned percentile, std::size_t count,
    std::uint64_t seed) {
    if (id_corpus.size() != id_embeddings.rows || ood_corpus.size() != ood_embeddings.rows) {
        throw InputError("representative_pairs: corpus/embedding alignment mismatch");
    }
    if (percentile == 0 || percentile > 100) {
        throw InputError("representative_pairs: percentile must be in 1..100");
    }
    auto id_depths = depth_scores(id_embeddings, id_embeddings, /*self_exclude=*/true);
    auto ood_depths = depth_scores(ood_embeddings, id_embeddings, /*self_exclude=*/false);

    // ranked indices: deepest-first for ID, shallowest-first for OOD,
    // depth ties broken by record_id
    std::vector<std::size_t> id_rank(id_corpus.size());
    for (std::size_t i = 0; i < id_rank.size(); ++i) id_rank[i] = i;
    std::sort(id_rank.begin(), id_rank.end(), [&](std::size_t a, std::size_t b) {
        if (id_depths.entries[a].second != id_depths.entries[b].second) {
            return id_depths.entries[a].second > id_depths.entries[b].second;
        }
        return id_depths.entries[a].first < id_depths.entries[b].first;
    });
    std::vector<std::size_t> ood_rank(ood_corpus.size());
    for (std::size_t i = 0; i < ood_rank.size(); ++i) ood_rank[i] = i;
    std::sort(ood_rank.begin(), ood_rank.end(), [&](std::size_t a, std::size_t b) {
        if (ood_depths.entries[a].second != ood_depths.entries[b].second) {
            return ood_depths.entries[a].second < ood_depths.entries[b].second;
        }
        return ood_depths.entries[a].first < ood_depths.entries[b].first;
    });

    const std::size_t id_slice = detail::percentile_slice(id_rank.size(), percentile);
    const std::size_t ood_slice = detail::percentile_slice(ood_rank.size(), percentile);
    if (id_slice < count || ood_slice < count) {
        throw InputError("representative_pairs: percentile slice smaller than requested count");
    }
    SeededRng rng(seed);
    auto id_pick = rng.sample_indices(id_slice, count);
    auto ood_pick = rng.sample_indices(ood_slice, count);
    std::vector<RepresentativePair> pairs;
    pairs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t a = id_rank[id_pick[i]];
        const std::size_t b = ood_rank[ood_pick[i]];
        pairs.push_back({id_depths.entries[a].first, id_depths.entries[a].second,
                         ood_depths.entries[b].first, ood_depths.entries[b].second});
    }
    return pairs;
}

// JSON report with prompt texts and split metadata, for qualitative review.
inline json representative_pairs_report(const std::vector<RepresentativePair>& pairs,
                                        const Corpus& id_corpus, const Corpus& ood_corpus,
                                        const json& split_meta) {
    json report;
    report["format"] = "driftlens-representative-pairs";
    report["version"] = 1;
    report["split"] = split_meta;
    report["pairs"] = json::array();
    for (const auto& p : pairs) {
        json entry;
        entry["id_record"] = p.id_record;
        entry["id_depth"] = p.id_depth;
        entry["id_text"] = id_corpus.at(id_corpus.index_of(p.id_record)).text;
        entry["ood_record"] = p.ood_record;
        entry["ood_depth"] = p.ood_depth;
        entry["ood_text"] = ood_corpus.at(ood_corpus.index_of(p.ood_record)).text;
        report["pairs"].push_back(std::move(entry));
    }
    return report;
}

} // namespace driftlens
