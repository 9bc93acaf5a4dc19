// Acceptance suite: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion.
//
// Usage: acceptance <path-to-driftlens-cli> [scratch-dir]
//
// The CLI path is needed for the end-to-end determinism criterion; everything
// else exercises the library directly.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "driftlens/driftlens.hpp"

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace dl = driftlens;
namespace ts = testsupport;
namespace fs = std::filesystem;

namespace {

struct Checker {
    std::vector<std::string> failures;

    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }

    template <typename T>
    void require_le(T value, T bound, const std::string& what) {
        if (!(value <= bound)) {
            std::ostringstream ss;
            ss << what << " (got " << value << ", bound " << bound << ")";
            failures.push_back(ss.str());
        }
    }

    template <typename T>
    void require_ge(T value, T bound, const std::string& what) {
        if (!(value >= bound)) {
            std::ostringstream ss;
            ss << what << " (got " << value << ", bound " << bound << ")";
            failures.push_back(ss.str());
        }
    }

    void require_near(double value, double target, double tol, const std::string& what) {
        if (!(std::abs(value - target) <= tol)) {
            std::ostringstream ss;
            ss << what << " (got " << value << ", want " << target << " +/- " << tol << ")";
            failures.push_back(ss.str());
        }
    }
};

std::string cli_path;
fs::path scratch;

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Criterion 1: self-comparison identities on random halves
// ---------------------------------------------------------------------------

void criterion_1(Checker& c) {
    const auto started = std::chrono::steady_clock::now();

    auto pool = ts::phrase_pool("w", 50, 60, 7);
    auto corpus = ts::phrase_corpus(5000, pool, 101);
    auto centers = ts::blob_centers(8, 32, 4.0, 55);
    auto embeddings = ts::mixture_embeddings(corpus, 32, centers, 0.6, 102);

    dl::MeasureConfig cfg;
    cfg.seed = 2024;
    cfg.n = 1000;
    cfg.m = 1000;
    cfg.measures = {"mauve", "delta", "kl", "jsd", "bleu"};

    auto pairs = dl::sample_random_baseline(corpus, 1000, 20, 31337);
    double mauve_sum = 0.0;
    double delta_sum = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        dl::SplitBundle bundle;
        bundle.axis = dl::Axis::RandomBaseline;
        char sid[32];
        std::snprintf(sid, sizeof(sid), "half_%03zu", p);
        bundle.setting_id = sid;
        bundle.id_train = pairs[p].first;
        bundle.ood_eval = pairs[p].second;
        auto rows = dl::run_measure_suite(bundle, &embeddings, cfg);
        std::map<std::string, double> v;
        for (const auto& row : rows) v[row.measure] = row.value;
        const std::string tag = " [split " + std::to_string(p) + "]";
        c.require_ge(v["mauve"], 0.90, "MAUVE >= 0.90" + tag);
        // delta is a rank statistic with sigma ~ sqrt((n+m+1)/(12nm)) ~ 0.013
        // at n = m = 1000, so the 0.03 band is held at the mean of the 20
        // splits, with a wide per-split sanity bound
        c.require_near(v["delta_score"], 0.50, 0.06, "delta sane per split" + tag);
        c.require_le(v["kl"], 0.02, "KL <= 0.02 nats" + tag);
        c.require_le(v["jsd"], 0.02, "JSD <= 0.02 nats" + tag);
        c.require_ge(v["bleu"], 0.5, "BLEU >= 0.5" + tag);
        mauve_sum += v["mauve"];
        delta_sum += v["delta_score"];
    }
    c.require_ge(mauve_sum / 20.0, 0.94, "mean MAUVE >= 0.94");
    c.require_near(delta_sum / 20.0, 0.50, 0.03, "mean delta = 0.50 +/- 0.03");

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    c.require_le(elapsed, 60.0, "criterion 1 runtime < 60 s");
    std::cerr << "  [criterion 1] mean MAUVE " << mauve_sum / 20.0 << ", mean delta "
              << delta_sum / 20.0 << ", " << elapsed << " s\n";
}

// ---------------------------------------------------------------------------
// Criterion 2: brute-force oracle equivalence
// ---------------------------------------------------------------------------

void criterion_2(Checker& c) {
    // (a) MAUVE vs fine-grid trapezoid integration
    struct Case {
        std::vector<double> p, q;
    };
    const Case cases[] = {
        {{0.9, 0.1}, {0.2, 0.8}},
        {{0.5, 0.5}, {0.05, 0.95}},
        {{1.0 - 1e-6, 1e-6}, {1e-6, 1.0 - 1e-6}},
        {{0.6, 0.3, 0.1}, {0.1, 0.3, 0.6}},
        {{0.33, 0.33, 0.34}, {0.2, 0.5, 0.3}},
    };
    for (std::size_t i = 0; i < std::size(cases); ++i) {
        dl::ClusterHistogram hp{cases[i].p}, hq{cases[i].q};
        const double impl = dl::mauve(dl::divergence_curve(hp, hq, 5.0, 101));
        const double oracle = oracles::mauve_fine_grid(cases[i].p, cases[i].q, 5.0, 100000);
        c.require(std::abs(impl - oracle) <= 1e-3,
                  "mauve case " + std::to_string(i) + " within 1e-3 of fine grid (impl " +
                      std::to_string(impl) + ", oracle " + std::to_string(oracle) + ")");
    }

    // (b) delta_score vs exhaustive enumeration, exact, 100 seeds
    ts::SeededRng seeds(424242);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + seeds.bounded(49);
        const std::size_t m = 1 + seeds.bounded(50);
        ts::SeededRng gen(seeds.next());
        std::vector<std::vector<float>> xs(n, std::vector<float>(4)), ys(m, std::vector<float>(4));
        for (auto& row : xs) {
            for (auto& v : row) v = static_cast<float>(ts::gaussian(gen));
        }
        for (auto& row : ys) {
            for (auto& v : row) v = static_cast<float>(ts::gaussian(gen));
        }
        auto x = ts::matrix_from_rows(xs, "x");
        auto y = ts::matrix_from_rows(ys, "y");
        const double impl = dl::delta_score(x, y).value;
        const double oracle = oracles::delta_brute_force(x, y);
        if (impl != oracle) {
            c.require(false, "delta trial " + std::to_string(trial) + " mismatch");
            break;
        }
    }

    // (c) KL/JSD vs direct summation
    ts::SeededRng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t len = 2 + rng.bounded(8);
        std::vector<double> p(len), q(len);
        double sp = 0, sq = 0;
        for (std::size_t i = 0; i < len; ++i) {
            p[i] = rng.unit() + 0.01;
            q[i] = rng.unit() + 0.01;
            sp += p[i];
            sq += q[i];
        }
        for (std::size_t i = 0; i < len; ++i) {
            p[i] /= sp;
            q[i] /= sq;
        }
        c.require(std::abs(dl::kl_divergence(p, q) - oracles::kl_direct(p, q)) <= 1e-12,
                  "KL matches direct summation (trial " + std::to_string(trial) + ")");
        c.require(std::abs(dl::jsd(p, q) - oracles::jsd_direct(p, q)) <= 1e-12,
                  "JSD matches direct summation (trial " + std::to_string(trial) + ")");
    }

    // (d) the clipping example
    dl::ReferenceNGramTable refs({"the cat is on the mat"}, 1);
    auto [matches, total] = dl::modified_precision(dl::tokenize("the the the the the the the"),
                                                   refs, 1);
    c.require(matches == 2 && total == 7, "modified 1-gram precision reproduces 2/7");
}

// ---------------------------------------------------------------------------
// Criterion 3: drift monotonicity over mixture corpora
// ---------------------------------------------------------------------------

void criterion_3(Checker& c) {
    const std::vector<double> alphas = {0.0, 0.25, 0.5, 0.75, 1.0};
    const std::size_t sample = 400;
    const std::size_t dim = 16;

    auto base_pool = ts::phrase_pool("w", 40, 50, 7);
    auto shift_pool = ts::phrase_pool("zq", 40, 50, 8);  // disjoint vocabulary

    std::map<std::string, double> rho_sum;
    const int seed_count = 5;
    for (int seed = 0; seed < seed_count; ++seed) {
        auto centers_base = ts::blob_centers(6, dim, 4.0, 300 + seed);
        std::vector<std::vector<double>> centers_shift = centers_base;
        for (auto& center : centers_shift) {
            for (auto& v : center) v = -v;  // antipodal region
        }

        // reference sample P from the base distribution
        ts::SeededRng prng(1000 + seed);
        dl::Corpus p_corpus("p");
        for (std::size_t i = 0; i < sample; ++i) {
            dl::PromptRecord rec;
            rec.record_id = "p" + std::to_string(i);
            rec.text = ts::sample_text(base_pool, prng);
            rec.timestamp = static_cast<std::int64_t>(i);
            p_corpus.push_back(std::move(rec));
        }
        auto p_emb = ts::mixture_embeddings(p_corpus, dim, centers_base, 0.5, 2000 + seed);

        std::vector<double> mauve_vals, delta_vals, ppl_vals, bleu_vals;
        auto p_texts = p_corpus.texts();
        auto model = dl::NGramModel::train(p_texts, 3, 0.1);
        for (double alpha : alphas) {
            ts::SeededRng qrng(3000 + seed);
            dl::Corpus q_corpus("q");
            std::vector<bool> shifted(sample);
            for (std::size_t i = 0; i < sample; ++i) {
                shifted[i] = qrng.unit() < alpha;
                dl::PromptRecord rec;
                rec.record_id = "q" + std::to_string(i);
                rec.text = ts::sample_text(shifted[i] ? shift_pool : base_pool, qrng);
                rec.timestamp = static_cast<std::int64_t>(i);
                q_corpus.push_back(std::move(rec));
            }
            // embeddings follow each record's source distribution
            ts::SeededRng erng(4000 + seed);
            dl::EmbeddingMatrix q_emb;
            q_emb.rows = sample;
            q_emb.dim = dim;
            for (std::size_t i = 0; i < sample; ++i) {
                const auto& centers = shifted[i] ? centers_shift : centers_base;
                const auto& center = centers[erng.bounded(centers.size())];
                for (std::size_t j = 0; j < dim; ++j) {
                    q_emb.values.push_back(static_cast<float>(center[j] + 0.5 * ts::gaussian(erng)));
                }
                q_emb.alignment.push_back(q_corpus.at(i).record_id);
            }

            dl::MauveParams params;
            params.k = 0;  // auto
            mauve_vals.push_back(dl::mauve_score(p_emb, q_emb, params,
                                                 dl::derive_seed(5000 + seed, "kmeans")).value);
            delta_vals.push_back(dl::delta_score(p_emb, q_emb).value);
            ppl_vals.push_back(model.perplexity(q_corpus.texts()));
            bleu_vals.push_back(dl::corpus_bleu(q_corpus.texts(), p_texts).value);
        }
        auto negate = [](std::vector<double> v) {
            for (auto& x : v) x = -x;
            return v;
        };
        rho_sum["mauve"] += oracles::spearman(alphas, negate(mauve_vals));
        rho_sum["delta"] += oracles::spearman(alphas, negate(delta_vals));
        rho_sum["perplexity"] += oracles::spearman(alphas, ppl_vals);
        rho_sum["bleu"] += oracles::spearman(alphas, negate(bleu_vals));
    }
    for (const auto& [measure, total] : rho_sum) {
        const double avg = total / seed_count;
        c.require_ge(avg, 0.9, "Spearman(alpha, shift) >= 0.9 for " + measure);
        std::cerr << "  [criterion 3] " << measure << " avg rho " << avg << "\n";
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: split-protocol shape
// ---------------------------------------------------------------------------

dl::Corpus nine_cell_corpus(std::size_t per_cell, std::size_t late_low_count) {
    const std::int64_t stage_days[3] = {0, 100, 200};
    const double rates[3] = {0.5, 2.0, 10.0};
    dl::Corpus corpus("cells");
    int serial = 0;
    for (int s = 0; s < 3; ++s) {
        for (int v = 0; v < 3; ++v) {
            const bool is_late_low = s == 2 && v == 0;
            const std::size_t count = is_late_low ? late_low_count : 10;
            for (std::size_t u = 0; u < per_cell; ++u) {
                const std::string hash = "s" + std::to_string(s) + "v" + std::to_string(v) +
                                         "u" + std::to_string(u);
                const std::int64_t first = (stage_days[s] + static_cast<std::int64_t>(u % 5)) * 86400;
                const double span_days = static_cast<double>(count) / rates[v];
                for (std::size_t i = 0; i < count; ++i) {
                    dl::PromptRecord rec;
                    rec.record_id = hash + "_" + std::to_string(serial++);
                    rec.text = "user " + hash + " question " + std::to_string(i) +
                               " with enough words";
                    const double frac =
                        count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
                    rec.timestamp = first + static_cast<std::int64_t>(frac * span_days * 86400.0);
                    rec.user_hash = hash;
                    corpus.push_back(std::move(rec));
                }
            }
        }
    }
    return corpus;
}

void criterion_4(Checker& c) {
    // geography: 9 regions -> 72 ordered pairs
    const std::vector<std::string> regions = {"California", "KrasnodarKrai", "Massachusetts",
                                              "Michigan",   "Moscow",        "NewYork",
                                              "Paris",      "Pennsylvania",  "Tokyo"};
    dl::Corpus geo("geo");
    int serial = 0;
    for (const auto& region : regions) {
        for (int i = 0; i < 60; ++i) {
            dl::PromptRecord rec;
            rec.record_id = "g" + std::to_string(serial++);
            rec.text = "prompt from " + region + " number " + std::to_string(i);
            rec.timestamp = serial;
            rec.region = region;
            geo.push_back(std::move(rec));
        }
    }
    dl::SplitSizes geo_sizes{20, 20, 10};
    auto geo_bundles = dl::build_geo_splits(geo, regions, geo_sizes, 11);
    c.require(geo_bundles.size() == 72,
              "geography enumerates 72 settings (got " + std::to_string(geo_bundles.size()) + ")");
    for (const auto& b : geo_bundles) dl::check_disjoint(b);

    // user groups: 9 populated cells, one forced under threshold -> 8 usable, 56 settings
    dl::SplitSizes ug_sizes{30, 30, 10};
    const std::size_t threshold = dl::default_min_group_size(ug_sizes);  // 70
    auto cells = nine_cell_corpus(12, 5);  // late_low: 60 records < 70
    auto assignment = dl::assign_user_groups(cells);
    std::map<dl::UserGroup, std::size_t> cell_sizes;
    for (const auto& [user, group] : assignment.by_user) ++cell_sizes[group];
    c.require(cell_sizes.size() == 9, "all 9 user-group cells are populated (got " +
                                          std::to_string(cell_sizes.size()) + ")");
    auto ug_bundles = dl::enumerate_group_splits(cells, assignment, ug_sizes, threshold, 12);
    c.require(ug_bundles.size() == 56, "user-group axis enumerates 56 settings with 8 usable "
                                       "groups (got " + std::to_string(ug_bundles.size()) + ")");
    for (const auto& b : ug_bundles) dl::check_disjoint(b);

    // time: enumeration equals the configured bound k(k-1)/2 (all M < N over
    // 12 buckets = 66; the configured bound is reported, not assumed)
    auto pool = ts::phrase_pool("w", 20, 30);
    auto time_corpus = ts::phrase_corpus(1200, pool, 77);
    auto buckets = dl::bucket_by_time(time_corpus, 12);
    dl::SplitSizes time_sizes{40, 40, 20};
    auto time_bundles = dl::enumerate_time_splits(buckets, time_sizes, 13);
    const std::size_t expected = 12 * 11 / 2;
    c.require(time_bundles.size() == expected,
              "time enumeration count equals the configured bound " + std::to_string(expected) +
                  " (got " + std::to_string(time_bundles.size()) + ")");
    for (const auto& b : time_bundles) dl::check_disjoint(b);
    std::cerr << "  [criterion 4] time settings: " << time_bundles.size()
              << " (configured bound: all id_month < ood_month over 12 buckets)\n";
}

// ---------------------------------------------------------------------------
// Criterion 5: arena exactness
// ---------------------------------------------------------------------------

void criterion_5(Checker& c) {
    // 100-pair fixture: 53 oracle wins, 15 ties, 32 ID wins
    std::vector<dl::ResponsePair> pairs;
    for (int i = 0; i < 100; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "p%03d", i);
        pairs.push_back({"question " + std::to_string(i), "id answer " + std::to_string(i),
                         "oracle answer " + std::to_string(i), dl::ASlot::IdModel, buf});
    }
    auto schedule = dl::debias_schedule(pairs, dl::DebiasMode::RandomOrder, 777);

    auto desired_marker = [](const dl::ResponsePair& pair, int index) {
        if (index < 53) {  // oracle win
            return pair.a_is == dl::ASlot::OracleModel ? "[[A]]" : "[[B]]";
        }
        if (index < 68) return "[[C]]";  // tie
        return pair.a_is == dl::ASlot::IdModel ? "[[A]]" : "[[B]]";  // id win
    };
    std::map<std::string, std::string> canned, canned_flipped;
    for (int i = 0; i < 100; ++i) {
        const std::string marker = desired_marker(schedule[i], i);
        canned[schedule[i].pair_id] = "after deliberation... " + marker;
        std::string flipped = marker == "[[A]]" ? "[[B]]" : marker == "[[B]]" ? "[[A]]" : "[[C]]";
        canned_flipped[schedule[i].pair_id] = "after deliberation... " + flipped;
    }

    dl::StubJudgeClient stub(canned);
    auto judged = dl::run_arena(schedule, stub);
    auto result = dl::aggregate(judged, dl::DebiasMode::RandomOrder);
    c.require(result.valid_count == 100, "100 valid pairs");
    c.require(result.id_loss_rate == 0.53,
              "id_loss_rate exactly 0.53 (got " + std::to_string(result.id_loss_rate) + ")");
    c.require(result.tie_rate == 0.15, "tie_rate exactly 0.15");
    c.require(result.id_win_rate == 0.32, "id_win_rate exactly 0.32");
    c.require(std::abs(result.id_loss_rate + result.id_win_rate + result.tie_rate - 1.0) <= 1e-12,
              "rate closure within 1e-12");

    // order-swap relabeling: every pair presented in the opposite orientation
    // with A/B verdicts flipped must yield identical rates
    std::vector<dl::ResponsePair> relabeled;
    relabeled.reserve(schedule.size());
    for (const auto& pair : schedule) relabeled.push_back(dl::swapped(pair));
    dl::StubJudgeClient stub_flipped(canned_flipped);
    auto judged_flipped = dl::run_arena(relabeled, stub_flipped);
    auto result_flipped = dl::aggregate(judged_flipped, dl::DebiasMode::RandomOrder);
    c.require(result_flipped.id_loss_rate == result.id_loss_rate &&
                  result_flipped.id_win_rate == result.id_win_rate &&
                  result_flipped.tie_rate == result.tie_rate,
              "order-swap relabeling leaves all rates unchanged");

    // 30-case verdict format fixture
    struct VCase {
        const char* text;
        dl::VerdictOutcome expected;
    };
    const VCase vcases[] = {
        {"[[A]]", dl::VerdictOutcome::A},
        {"[[B]]", dl::VerdictOutcome::B},
        {"[[C]]", dl::VerdictOutcome::Tie},
        {"Assistant A is better. [[A]]", dl::VerdictOutcome::A},
        {"Assistant B wins\n[[B]]", dl::VerdictOutcome::B},
        {"Verdict: [[C]] (both equal)", dl::VerdictOutcome::Tie},
        {"[[A]] wait, actually [[B]]", dl::VerdictOutcome::B},
        {"[[B]] ... on reflection [[C]]", dl::VerdictOutcome::Tie},
        {"[[C]] no wait [[A]]", dl::VerdictOutcome::A},
        {"[[A]] [[A]] [[A]]", dl::VerdictOutcome::A},
        {"explanation with [A] and [B] single brackets", dl::VerdictOutcome::Invalid},
        {"", dl::VerdictOutcome::Invalid},
        {"the verdict is [[D]]", dl::VerdictOutcome::Invalid},
        {"almost [[A] but truncated", dl::VerdictOutcome::Invalid},
        {"[[a]] lowercase does not count", dl::VerdictOutcome::Invalid},
        {"verdict [[B]]\n\nwith trailing text after the marker", dl::VerdictOutcome::B},
        {"multi\nline\nexplanation\n[[C]]\n", dl::VerdictOutcome::Tie},
        {"[[A]]extra", dl::VerdictOutcome::A},
        {"prefix[[B]]", dl::VerdictOutcome::B},
        {"double [[C]] double [[C]]", dl::VerdictOutcome::Tie},
        {"A is better: [[A]]. B was weaker.", dl::VerdictOutcome::A},
        {"tie [[C]] then better answer [[B]]", dl::VerdictOutcome::B},
        {"[[B]] vs [[A]] final [[A]]", dl::VerdictOutcome::A},
        {"no marker anywhere", dl::VerdictOutcome::Invalid},
        {"[ [A] ] spaced out", dl::VerdictOutcome::Invalid},
        {"unicode before marker éé [[B]]", dl::VerdictOutcome::B},
        {"marker inside quotes \"[[C]]\"", dl::VerdictOutcome::Tie},
        {"[[AB]] malformed pair", dl::VerdictOutcome::Invalid},
        {"verdict:\n\t[[A]]", dl::VerdictOutcome::A},
        {"Final verdict -> [[C]] ties it", dl::VerdictOutcome::Tie},
    };
    static_assert(std::size(vcases) == 30);
    int correct = 0;
    for (const auto& vc : vcases) {
        if (dl::parse_verdict(vc.text).outcome == vc.expected) ++correct;
    }
    c.require(correct == 30, "verdict parsing 30/30 (got " + std::to_string(correct) + ")");
}

// ---------------------------------------------------------------------------
// Criterion 6: CLI determinism
// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + cli_path + "\" " + args + " 2>/dev/null";
    return std::system(cmd.c_str());
}

void criterion_6(Checker& c) {
    fs::create_directories(scratch);
    const auto corpus_path = scratch / "corpus.jsonl";
    const auto embed_path = scratch / "embeddings.dlem";
    const auto manifest_path = scratch / "manifest.json";
    const auto config_path = scratch / "config.json";

    auto pool = ts::phrase_pool("w", 30, 40, 7);
    auto corpus = [&] {
        // texts made unique so the CLI's first-turn dedupe keeps every record
        // aligned with the embedding file
        auto base = ts::phrase_corpus(600, pool, 606);
        dl::Corpus unique("cli");
        for (const auto& rec : base.records()) {
            auto copy = rec;
            copy.text += " " + rec.record_id;
            unique.push_back(std::move(copy));
        }
        return unique;
    }();
    {
        std::ofstream out(corpus_path, std::ios::binary);
        for (const auto& rec : corpus.records()) {
            dl::json line = {{"record_id", rec.record_id},
                             {"text", rec.text},
                             {"timestamp", rec.timestamp}};
            out << line.dump() << "\n";
        }
    }
    auto centers = ts::blob_centers(4, 8, 4.0, 9);
    auto embeddings = ts::mixture_embeddings(corpus, 8, centers, 0.5, 607);
    dl::write_embeddings_binary(embeddings, embed_path.string());
    {
        dl::MeasureConfig cfg;
        cfg.seed = 99;
        cfg.n = 100;
        cfg.m = 100;
        cfg.mauve.k = 10;
        std::ofstream out(config_path, std::ios::binary);
        out << cfg.to_json().dump(2) << "\n";
    }

    int rc = run_cli("split --input \"" + corpus_path.string() +
                     "\" --axis random --pairs 3 --eval-size 100 --seed 5 --out \"" +
                     manifest_path.string() + "\"");
    c.require(rc == 0, "driftlens split exits 0 (got " + std::to_string(rc) + ")");

    auto measure_cmd = [&](const std::string& prefix) {
        return "measure --input \"" + corpus_path.string() + "\" --manifest \"" +
               manifest_path.string() + "\" --embeddings \"" + embed_path.string() +
               "\" --config \"" + config_path.string() + "\" --out \"" +
               (scratch / prefix).string() + "\"";
    };
    rc = run_cli(measure_cmd("run1"));
    c.require(rc == 0, "first driftlens measure exits 0 (got " + std::to_string(rc) + ")");
    rc = run_cli(measure_cmd("run2"));
    c.require(rc == 0, "second driftlens measure exits 0 (got " + std::to_string(rc) + ")");

    for (const char* ext : {".csv", ".json", ".svg"}) {
        const auto a = read_file(scratch / ("run1" + std::string(ext)));
        const auto b = read_file(scratch / ("run2" + std::string(ext)));
        c.require(!a.empty(), std::string("run1") + ext + " is non-empty");
        c.require(a == b, std::string("byte-identical ") + ext + " outputs");
    }
}

// ---------------------------------------------------------------------------
// Criterion 7: perplexity identities
// ---------------------------------------------------------------------------

void criterion_7(Checker& c) {
    // uniform over V = 4: equal counts, vanishing alpha
    auto uniform = dl::NGramModel::train({"a b c d"}, 1, 1e-12);
    c.require_near(uniform.perplexity({"a b a d c c b a"}), 4.0, 1e-9,
                   "uniform unigram model over V=4 gives PPL 4.000");

    auto two_token = dl::NGramModel::train({"a a a b"}, 1, 1e-12);
    c.require_near(two_token.perplexity({"a b"}), 2.3094, 1e-4,
                   "p=0.75/0.25 model on 'a b' gives PPL 2.3094");

    auto base_pool = ts::phrase_pool("w", 30, 40, 7);
    auto shift_pool = ts::phrase_pool("zq", 30, 40, 8);
    for (int seed = 0; seed < 10; ++seed) {
        ts::SeededRng rng(9000 + seed);
        std::vector<std::string> train_texts, heldout, disjoint;
        for (int i = 0; i < 200; ++i) train_texts.push_back(ts::sample_text(base_pool, rng));
        for (int i = 0; i < 50; ++i) heldout.push_back(ts::sample_text(base_pool, rng));
        for (int i = 0; i < 50; ++i) disjoint.push_back(ts::sample_text(shift_pool, rng));
        auto model = dl::NGramModel::train(train_texts, 3, 0.1);
        const double in_dist = model.perplexity(heldout);
        const double shifted = model.perplexity(disjoint);
        c.require(in_dist < shifted,
                  "PPL(heldout) < PPL(disjoint) on seed " + std::to_string(seed) + " (" +
                      std::to_string(in_dist) + " vs " + std::to_string(shifted) + ")");
    }
}

struct Criterion {
    int number;
    std::string title;
    std::function<void(Checker&)> run;
};

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-driftlens-cli> [scratch-dir]\n";
        return 2;
    }
    cli_path = argv[1];
    scratch = argc > 2 ? fs::path(argv[2]) : fs::path("acceptance_scratch");

    const std::vector<Criterion> criteria = {
        {1, "self-comparison identities on 20 random-half splits", criterion_1},
        {2, "brute-force oracle equivalence (mauve, delta, kl/jsd, clipping)", criterion_2},
        {3, "drift monotonicity over mixture corpora", criterion_3},
        {4, "split-protocol shape (72 geography, 56 user-group, time bound)", criterion_4},
        {5, "arena exactness (rates, closure, order-swap, verdict formats)", criterion_5},
        {6, "byte-identical CLI measure outputs", criterion_6},
        {7, "perplexity identities", criterion_7},
    };

    int failed = 0;
    for (const auto& criterion : criteria) {
        Checker checker;
        try {
            criterion.run(checker);
        } catch (const std::exception& e) {
            checker.failures.push_back(std::string("exception: ") + e.what());
        }
        if (checker.failures.empty()) {
            std::cout << "PASS criterion " << criterion.number << ": " << criterion.title << "\n";
        } else {
            ++failed;
            std::cout << "FAIL criterion " << criterion.number << ": " << criterion.title << "\n";
            for (const auto& f : checker.failures) std::cout << "       - " << f << "\n";
        }
    }
    if (failed > 0) {
        std::cout << failed << " of " << criteria.size() << " criteria failed\n";
        return 1;
    }
    std::cout << "all " << criteria.size() << " acceptance criteria passed\n";
    return 0;
}
