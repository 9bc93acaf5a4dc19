#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "driftlens/error.hpp"
#include "driftlens/tokenizer.hpp"

namespace driftlens {

using json = nlohmann::ordered_json;

// Add-alpha smoothed n-gram model over per-record token sequences. Contexts
// are padded with order-1 boundary tokens; the prediction vocabulary is the
// training tokens plus a reserved UNK, so every conditional is strictly
// positive and sums to 1 over the vocabulary:
//
//   p(w | ctx) = (count(ctx, w) + alpha) / (count(ctx) + alpha * V)
//
// Stands in for a trained reference model: directional by construction,
// trained on P and evaluated on Q.
class NGramModel {
public:
    static constexpr std::uint32_t kUnkId = 0;
    static constexpr std::uint32_t kBosId = 0xFFFFFFFFu;  // context-only, never predicted

    static NGramModel train(const std::vector<std::string>& texts, std::size_t order,
                            double alpha) {
        if (texts.empty()) throw InputError("NGramModel::train: empty corpus");
        if (order < 1) throw InputError("NGramModel::train: order must be >= 1");
        if (!(alpha > 0)) throw InputError("NGramModel::train: alpha must be > 0");
        NGramModel model;
        model.order_ = order;
        model.alpha_ = alpha;
        model.tokens_.push_back("<unk>");
        for (const auto& text : texts) {
            auto ids = model.intern_sequence(tokenize(text));
            model.accumulate(ids);
        }
        return model;
    }

    std::size_t order() const { return order_; }
    double alpha() const { return alpha_; }
    std::size_t vocab_size() const { return tokens_.size(); }

    std::uint32_t id_or_unk(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? kUnkId : it->second;
    }

    double probability(std::uint32_t token_id, const std::vector<std::uint32_t>& context) const {
        const double v = static_cast<double>(tokens_.size());
        const ContextCounts* cc = find_context(context);
        const double ctx_total = cc ? static_cast<double>(cc->total) : 0.0;
        double tok_count = 0.0;
        if (cc) {
            auto it = cc->by_token.find(token_id);
            if (it != cc->by_token.end()) tok_count = static_cast<double>(it->second);
        }
        return (tok_count + alpha_) / (ctx_total + alpha_ * v);
    }

    // Full conditional over the vocabulary for one context.
    std::vector<double> conditional(const std::vector<std::uint32_t>& context) const {
        std::vector<double> probs(tokens_.size());
        for (std::uint32_t w = 0; w < tokens_.size(); ++w) {
            probs[w] = probability(w, context);
        }
        return probs;
    }

    // Micro-averaged perplexity: all eval tokens pooled, unknown tokens
    // mapped to UNK, contexts boundary-padded.
    double perplexity(const std::vector<std::string>& eval_texts) const {
        if (eval_texts.empty()) throw InputError("perplexity: empty eval corpus");
        double nll = 0.0;
        std::size_t token_count = 0;
        std::vector<std::uint32_t> seq;
        for (const auto& text : eval_texts) {
            seq.assign(order_ - 1, kBosId);
            for (const auto& tok : tokenize(text).tokens) seq.push_back(id_or_unk(tok));
            for (std::size_t i = order_ - 1; i < seq.size(); ++i) {
                std::vector<std::uint32_t> ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - (order_ - 1)),
                                               seq.begin() + static_cast<std::ptrdiff_t>(i));
                nll -= std::log(probability(seq[i], ctx));
                ++token_count;
            }
        }
        if (token_count == 0) throw InputError("perplexity: eval corpus has no tokens");
        return std::exp(nll / static_cast<double>(token_count));
    }

    std::vector<std::uint32_t> context_for(const std::vector<std::string>& tokens) const {
        std::vector<std::uint32_t> ctx(order_ - 1, kBosId);
        for (const auto& t : tokens) ctx.push_back(id_or_unk(t));
        if (ctx.size() > order_ - 1) {
            ctx.erase(ctx.begin(), ctx.end() - static_cast<std::ptrdiff_t>(order_ - 1));
        }
        return ctx;
    }

    // Versioned JSON artifact; loading reproduces the model exactly.
    json dump() const {
        json out;
        out["format"] = "driftlens-ngram-lm";
        out["version"] = 1;
        out["order"] = order_;
        out["alpha"] = alpha_;
        out["vocab"] = tokens_;
        // contexts sorted by key bytes for byte-stable output
        std::map<std::string, const ContextCounts*> sorted;
        for (const auto& [key, cc] : contexts_) sorted.emplace(key, &cc);
        json ctxs = json::array();
        for (const auto& [key, cc] : sorted) {
            json entry;
            entry["ctx"] = decode_key(key);
            std::map<std::uint32_t, std::uint64_t> counts(cc->by_token.begin(), cc->by_token.end());
            json pairs = json::array();
            for (const auto& [tok, cnt] : counts) pairs.push_back({tok, cnt});
            entry["counts"] = std::move(pairs);
            ctxs.push_back(std::move(entry));
        }
        out["contexts"] = std::move(ctxs);
        return out;
    }

    static NGramModel load(const json& artifact) {
        if (!artifact.is_object() || artifact.value("format", "") != "driftlens-ngram-lm") {
            throw InputError("not a driftlens n-gram model artifact");
        }
        if (artifact.value("version", 0) != 1) {
            throw InputError("unsupported n-gram model version");
        }
        NGramModel model;
        model.order_ = artifact.at("order").get<std::size_t>();
        model.alpha_ = artifact.at("alpha").get<double>();
        if (model.order_ < 1 || !(model.alpha_ > 0)) {
            throw InputError("n-gram model artifact has invalid order/alpha");
        }
        model.tokens_ = artifact.at("vocab").get<std::vector<std::string>>();
        if (model.tokens_.empty() || model.tokens_[0] != "<unk>") {
            throw InputError("n-gram model artifact vocab must start with <unk>");
        }
        for (std::uint32_t i = 0; i < model.tokens_.size(); ++i) {
            model.index_.emplace(model.tokens_[i], i);
        }
        for (const auto& entry : artifact.at("contexts")) {
            auto ctx = entry.at("ctx").get<std::vector<std::uint32_t>>();
            ContextCounts cc;
            for (const auto& pair : entry.at("counts")) {
                const auto tok = pair.at(0).get<std::uint32_t>();
                const auto cnt = pair.at(1).get<std::uint64_t>();
                cc.by_token[tok] = cnt;
                cc.total += cnt;
            }
            model.contexts_.emplace(encode_key(ctx), std::move(cc));
        }
        return model;
    }

private:
    struct ContextCounts {
        std::uint64_t total = 0;
        std::unordered_map<std::uint32_t, std::uint64_t> by_token;
    };

    static std::string encode_key(const std::vector<std::uint32_t>& ctx) {
        std::string key;
        key.reserve(ctx.size() * 4);
        for (std::uint32_t id : ctx) {
            key.push_back(static_cast<char>(id & 0xFF));
            key.push_back(static_cast<char>((id >> 8) & 0xFF));
            key.push_back(static_cast<char>((id >> 16) & 0xFF));
            key.push_back(static_cast<char>((id >> 24) & 0xFF));
        }
        return key;
    }

    static std::vector<std::uint32_t> decode_key(const std::string& key) {
        std::vector<std::uint32_t> ctx(key.size() / 4);
        for (std::size_t i = 0; i < ctx.size(); ++i) {
            ctx[i] = static_cast<std::uint32_t>(static_cast<unsigned char>(key[4 * i])) |
                     static_cast<std::uint32_t>(static_cast<unsigned char>(key[4 * i + 1])) << 8 |
                     static_cast<std::uint32_t>(static_cast<unsigned char>(key[4 * i + 2])) << 16 |
                     static_cast<std::uint32_t>(static_cast<unsigned char>(key[4 * i + 3])) << 24;
        }
        return ctx;
    }

    const ContextCounts* find_context(const std::vector<std::uint32_t>& ctx) const {
        auto it = contexts_.find(encode_key(ctx));
        return it == contexts_.end() ? nullptr : &it->second;
    }

    std::vector<std::uint32_t> intern_sequence(const TokenSequence& seq) {
        std::vector<std::uint32_t> ids;
        ids.reserve(seq.tokens.size());
        for (const auto& tok : seq.tokens) {
            auto [it, inserted] = index_.try_emplace(tok, static_cast<std::uint32_t>(tokens_.size()));
            if (inserted) tokens_.push_back(tok);
            ids.push_back(it->second);
        }
        return ids;
    }

    void accumulate(const std::vector<std::uint32_t>& token_ids) {
        std::vector<std::uint32_t> seq(order_ - 1, kBosId);
        seq.insert(seq.end(), token_ids.begin(), token_ids.end());
        for (std::size_t i = order_ - 1; i < seq.size(); ++i) {
            std::vector<std::uint32_t> ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - (order_ - 1)),
                                           seq.begin() + static_cast<std::ptrdiff_t>(i));
            auto& cc = contexts_[encode_key(ctx)];
            ++cc.by_token[seq[i]];
            ++cc.total;
        }
    }

    std::size_t order_ = 1;
    double alpha_ = 0.1;
    std::vector<std::string> tokens_;                       // id -> token, id 0 is <unk>
    std::unordered_map<std::string, std::uint32_t> index_;  // token -> id
    std::unordered_map<std::string, ContextCounts> contexts_;
};

// ---------------------------------------------------------------------------
// Discrete divergences (nats)
// ---------------------------------------------------------------------------

namespace detail {

inline void check_distribution(const std::vector<double>& p, const char* name) {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0) throw InputError(std::string(name) + " has a negative entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InputError(std::string(name) + " does not sum to 1 (got " + std::to_string(sum) + ")");
    }
}

} // namespace detail

// KL(p || q) = sum p_i ln(p_i / q_i), with 0 ln 0 = 0.
inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw InputError("kl_divergence: length mismatch");
    detail::check_distribution(p, "p");
    detail::check_distribution(q, "q");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] <= 0.0) {
            throw InputError("kl_divergence: q has zero mass where p > 0 (index " +
                             std::to_string(i) + "); smooth the distributions first");
        }
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

inline double reverse_kl(const std::vector<double>& p, const std::vector<double>& q) {
    return kl_divergence(q, p);
}

// Jensen-Shannon divergence: defined even for disjoint supports, bounded by
// ln 2. Each index contributes one commutative sum, so jsd(p, q) and
// jsd(q, p) are bit-identical.
inline double jsd(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw InputError("jsd: length mismatch");
    detail::check_distribution(p, "p");
    detail::check_distribution(q, "q");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        const double p_term = p[i] > 0.0 ? 0.5 * p[i] * std::log(p[i] / m) : 0.0;
        const double q_term = q[i] > 0.0 ? 0.5 * q[i] * std::log(q[i] / m) : 0.0;
        acc += p_term + q_term;
    }
    return acc;
}

// KL between rank-frequency profiles, compared rank-by-rank after truncating
// both to a common length and renormalizing. Rank-based: two corpora with
// identical profiles but disjoint vocabularies diverge by 0.
inline double zipf_divergence(const std::vector<std::string>& p_texts,
                              const std::vector<std::string>& q_texts, std::size_t top_r) {
    RankFrequency p_rf = rank_frequency(p_texts, top_r);
    RankFrequency q_rf = rank_frequency(q_texts, top_r);
    const std::size_t len = std::min(p_rf.entries.size(), q_rf.entries.size());
    if (len == 0) throw InputError("zipf_divergence: empty rank profile");
    auto renormalize = [len](const RankFrequency& rf) {
        std::vector<double> probs(len);
        double sum = 0.0;
        for (std::size_t i = 0; i < len; ++i) sum += rf.entries[i].probability;
        for (std::size_t i = 0; i < len; ++i) probs[i] = rf.entries[i].probability / sum;
        return probs;
    };
    return kl_divergence(renormalize(p_rf), renormalize(q_rf));
}

} // namespace driftlens
