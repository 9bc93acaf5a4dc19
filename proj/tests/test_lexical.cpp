#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "driftlens/lexical.hpp"

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace driftlens;
namespace ts = testsupport;

TEST_CASE("modified_precision clips by the best single reference") {
    ReferenceNGramTable refs({"the cat is on the mat"}, 4);
    auto candidate = tokenize("the the the the the the the");
    auto [matches, total] = modified_precision(candidate, refs, 1);
    CHECK(matches == 2);
    CHECK(total == 7);

    SECTION("identity candidate is fully matched at every n") {
        auto self_seq = tokenize("the cat is on the mat");
        for (std::size_t n = 1; n <= 4; ++n) {
            auto [m, t] = modified_precision(self_seq, refs, n);
            CHECK(m == t);
            CHECK(t == self_seq.tokens.size() - n + 1);
        }
    }
    SECTION("disjoint vocabulary matches nothing") {
        auto other = tokenize("completely different words here");
        auto [m, t] = modified_precision(other, refs, 1);
        CHECK(m == 0);
        CHECK(t == 4);
    }
}

TEST_CASE("corpus_bleu identities and smoothing") {
    std::vector<std::string> texts = {"the cat sat on the mat today",
                                      "a quick brown fox jumps over the dog",
                                      "please summarize this paragraph for me"};
    SECTION("identical corpora score exactly 1") {
        auto score = corpus_bleu(texts, texts);
        CHECK(score.value == 1.0);
        CHECK(score.brevity_penalty == 1.0);
        for (double p : score.precisions) CHECK(p == 1.0);
    }
    SECTION("disjoint vocabularies collapse to the epsilon floor") {
        std::vector<std::string> other = {"zzz yyy xxx www vvv uuu ttt sss"};
        auto score = corpus_bleu(other, texts);
        CHECK(score.value < 1e-6);
        CHECK(score.value > 0.0);
    }
    SECTION("score equals bp times the geometric mean of precisions") {
        auto pool = ts::phrase_pool("w", 20, 30);
        ts::SeededRng rng(5);
        std::vector<std::string> cands, refs;
        for (int i = 0; i < 25; ++i) cands.push_back(ts::sample_text(pool, rng));
        for (int i = 0; i < 25; ++i) refs.push_back(ts::sample_text(pool, rng));
        auto score = corpus_bleu(cands, refs);
        double log_sum = 0.0;
        for (double p : score.precisions) log_sum += std::log(p);
        const double recomputed =
            score.brevity_penalty * std::exp(log_sum / static_cast<double>(score.precisions.size()));
        CHECK(score.value == Catch::Approx(recomputed).margin(1e-12));
        CHECK(score.value >= 0.0);
        CHECK(score.value <= 1.0);
    }
    SECTION("brevity penalty is 1 when candidates run long") {
        std::vector<std::string> longer = {"the cat sat on the mat today and then some more"};
        std::vector<std::string> shorter = {"the cat sat"};
        auto score = corpus_bleu(longer, shorter);
        CHECK(score.brevity_penalty == 1.0);

        auto penalized = corpus_bleu(shorter, longer);
        CHECK(penalized.brevity_penalty < 1.0);
    }
    SECTION("empty corpus is rejected") {
        CHECK_THROWS_AS(corpus_bleu({}, texts), InputError);
        CHECK_THROWS_AS(corpus_bleu(texts, {}), InputError);
    }
}

TEST_CASE("bleu degrades as candidates are shuffled harder") {
    // token-level shuffles of increasing strength; BLEU should rank them
    auto pool = ts::phrase_pool("w", 30, 40);
    ts::SeededRng rng(9);
    std::vector<std::string> refs;
    for (int i = 0; i < 40; ++i) refs.push_back(ts::sample_text(pool, rng));

    auto shuffled_copy = [&](double strength, std::uint64_t seed) {
        ts::SeededRng srng(seed);
        std::vector<std::string> out;
        for (const auto& text : refs) {
            auto toks = tokenize(text).tokens;
            const std::size_t swaps =
                static_cast<std::size_t>(strength * static_cast<double>(toks.size()));
            for (std::size_t s = 0; s < swaps; ++s) {
                const std::size_t i = srng.bounded(toks.size());
                const std::size_t j = srng.bounded(toks.size());
                std::swap(toks[i], toks[j]);
            }
            std::string joined;
            for (std::size_t t = 0; t < toks.size(); ++t) {
                if (t) joined += ' ';
                joined += toks[t];
            }
            out.push_back(joined);
        }
        return out;
    };

    // stay below the regime where 4-gram matches vanish and the epsilon
    // floor turns the score into noise
    const std::vector<double> strengths = {0.0, 0.1, 0.2, 0.35, 0.5};
    double avg_rho = 0.0;
    const int seeds = 5;
    for (int seed = 0; seed < seeds; ++seed) {
        std::vector<double> strength_axis, neg_bleu;
        for (double s : strengths) {
            strength_axis.push_back(s);
            neg_bleu.push_back(-corpus_bleu(shuffled_copy(s, 50 + seed), refs).value);
        }
        avg_rho += oracles::spearman(strength_axis, neg_bleu);
    }
    CHECK(avg_rho / seeds >= 0.9);
}

TEST_CASE("ngram_overlap contamination fractions") {
    SECTION("hand-enumerated gram fraction") {
        auto report = ngram_overlap({"a b c d"}, {"x a b c y"}, 3);
        CHECK(report.gram_fraction == Catch::Approx(1.0 / 3.0).margin(1e-15));
        CHECK(report.record_fraction == 1.0);
        CHECK_FALSE(report.degenerate);
    }
    SECTION("containment gives record fraction 1") {
        std::vector<std::string> train = {"one two three four five six seven eight nine",
                                          "alpha beta gamma delta epsilon zeta eta theta iota"};
        auto report = ngram_overlap(train, {train[0]}, 8);
        CHECK(report.record_fraction == 1.0);
        CHECK(report.gram_fraction == 1.0);
    }
    SECTION("disjoint corpora give zero") {
        auto report = ngram_overlap({"a b c d e f g h i"}, {"q r s t u v w x y"}, 3);
        CHECK(report.record_fraction == 0.0);
        CHECK(report.gram_fraction == 0.0);
    }
    SECTION("short records flag the degenerate case") {
        auto report = ngram_overlap({"a b"}, {"c d"}, 8);
        CHECK(report.degenerate);
        CHECK(report.record_fraction == 0.0);
        CHECK(report.gram_fraction == 0.0);
    }
    SECTION("fractions are monotone in training-corpus growth") {
        auto pool = ts::phrase_pool("w", 15, 25);
        ts::SeededRng rng(3);
        std::vector<std::string> eval_texts, train_small, train_big;
        for (int i = 0; i < 20; ++i) eval_texts.push_back(ts::sample_text(pool, rng));
        for (int i = 0; i < 10; ++i) train_small.push_back(ts::sample_text(pool, rng));
        train_big = train_small;
        for (int i = 0; i < 30; ++i) train_big.push_back(ts::sample_text(pool, rng));
        auto small = ngram_overlap(train_small, eval_texts, 4);
        auto big = ngram_overlap(train_big, eval_texts, 4);
        CHECK(big.record_fraction >= small.record_fraction);
        CHECK(big.gram_fraction >= small.gram_fraction);
    }
}
