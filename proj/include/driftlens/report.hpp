#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlens/corpus.hpp"
#include "driftlens/depth.hpp"
#include "driftlens/embed.hpp"
#include "driftlens/error.hpp"
#include "driftlens/lexical.hpp"
#include "driftlens/ngram_lm.hpp"
#include "driftlens/rng.hpp"
#include "driftlens/tokenizer.hpp"

namespace driftlens {

// The measure suite configuration. A single JSON document with every default
// echoed back out, so a persisted config fully describes a run.
struct MeasureConfig {
    std::uint64_t seed = 42;
    std::size_t n = 1000;  // ID-side sample size
    std::size_t m = 1000;  // OOD-side sample size
    std::vector<std::string> measures = {"mauve",       "delta",        "perplexity",
                                         "bleu",        "kl",           "reverse_kl",
                                         "jsd",         "zipf",         "ngram_overlap",
                                         "avg_min_distance"};

    MauveParams mauve;
    std::size_t lm_order = 3;
    double alpha = 0.1;  // shared by the n-gram LM and the unigram divergences
    std::size_t bleu_max_n = 4;
    double bleu_epsilon = 1e-9;
    bool bleu_symmetric = false;
    std::size_t overlap_k = 8;
    std::size_t zipf_top_r = 5000;
    DistanceMetric distance_metric = DistanceMetric::Euclidean;

    bool enabled(const std::string& name) const {
        return std::find(measures.begin(), measures.end(), name) != measures.end();
    }

    bool needs_embeddings() const {
        return enabled("mauve") || enabled("delta") || enabled("avg_min_distance");
    }

    void validate() const {
        static const std::set<std::string> known = {"mauve",      "delta", "perplexity",
                                                    "bleu",       "kl",    "reverse_kl",
                                                    "jsd",        "zipf",  "ngram_overlap",
                                                    "avg_min_distance"};
        std::set<std::string> seen;
        for (const auto& m_name : measures) {
            if (!known.count(m_name)) throw InputError("unknown measure '" + m_name + "'");
            if (!seen.insert(m_name).second) {
                throw InputError("measure '" + m_name + "' listed twice");
            }
        }
        if (n < 2 || m < 2) throw InputError("config: n and m must be >= 2");
        if (!(alpha > 0)) throw InputError("config: alpha must be > 0");
        if (lm_order < 1) throw InputError("config: lm order must be >= 1");
        if (bleu_max_n < 1) throw InputError("config: bleu max_n must be >= 1");
        if (overlap_k < 1) throw InputError("config: overlap k must be >= 1");
        if (zipf_top_r < 1) throw InputError("config: zipf top_r must be >= 1");
        if (mauve.c < 0) throw InputError("config: mauve c must be >= 0");
        if (mauve.grid_size < 1) throw InputError("config: mauve grid_size must be >= 1");
        if (!(mauve.smoothing_eps > 0)) throw InputError("config: mauve smoothing_eps must be > 0");
    }

    json to_json() const {
        json out;
        out["seed"] = seed;
        out["n"] = n;
        out["m"] = m;
        out["measures"] = measures;
        out["mauve"] = {{"k", mauve.k},
                        {"c", mauve.c},
                        {"grid_size", mauve.grid_size},
                        {"kmeans_max_iter", mauve.kmeans_max_iter},
                        {"kmeans_tol", mauve.kmeans_tol},
                        {"smoothing_eps", mauve.smoothing_eps}};
        out["lm"] = {{"order", lm_order}, {"alpha", alpha}};
        out["bleu"] = {{"max_n", bleu_max_n},
                       {"smoothing_epsilon", bleu_epsilon},
                       {"symmetric", bleu_symmetric}};
        out["overlap"] = {{"k", overlap_k}};
        out["zipf"] = {{"top_r", zipf_top_r}};
        out["distance_metric"] = distance_metric == DistanceMetric::Euclidean ? "euclidean" : "cosine";
        return out;
    }

    static MeasureConfig from_json(const json& obj) {
        MeasureConfig cfg;
        if (!obj.is_object()) throw InputError("config must be a JSON object");
        cfg.seed = obj.value("seed", cfg.seed);
        cfg.n = obj.value("n", cfg.n);
        cfg.m = obj.value("m", cfg.m);
        if (obj.contains("measures")) cfg.measures = obj["measures"].get<std::vector<std::string>>();
        if (obj.contains("mauve")) {
            const auto& mv = obj["mauve"];
            cfg.mauve.k = mv.value("k", cfg.mauve.k);
            cfg.mauve.c = mv.value("c", cfg.mauve.c);
            cfg.mauve.grid_size = mv.value("grid_size", cfg.mauve.grid_size);
            cfg.mauve.kmeans_max_iter = mv.value("kmeans_max_iter", cfg.mauve.kmeans_max_iter);
            cfg.mauve.kmeans_tol = mv.value("kmeans_tol", cfg.mauve.kmeans_tol);
            cfg.mauve.smoothing_eps = mv.value("smoothing_eps", cfg.mauve.smoothing_eps);
        }
        if (obj.contains("lm")) {
            cfg.lm_order = obj["lm"].value("order", cfg.lm_order);
            cfg.alpha = obj["lm"].value("alpha", cfg.alpha);
        }
        if (obj.contains("bleu")) {
            cfg.bleu_max_n = obj["bleu"].value("max_n", cfg.bleu_max_n);
            cfg.bleu_epsilon = obj["bleu"].value("smoothing_epsilon", cfg.bleu_epsilon);
            cfg.bleu_symmetric = obj["bleu"].value("symmetric", cfg.bleu_symmetric);
        }
        if (obj.contains("overlap")) cfg.overlap_k = obj["overlap"].value("k", cfg.overlap_k);
        if (obj.contains("zipf")) cfg.zipf_top_r = obj["zipf"].value("top_r", cfg.zipf_top_r);
        if (obj.contains("distance_metric")) {
            const auto name = obj["distance_metric"].get<std::string>();
            if (name == "euclidean") cfg.distance_metric = DistanceMetric::Euclidean;
            else if (name == "cosine") cfg.distance_metric = DistanceMetric::Cosine;
            else throw InputError("config: distance_metric must be euclidean or cosine");
        }
        cfg.validate();
        return cfg;
    }
};

struct ReportRow {
    std::string axis;
    std::string setting_id;
    std::string label;
    std::string measure;
    double value = 0.0;
    std::size_t n = 0;
    std::size_t m = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::string bundle_label(const SplitBundle& bundle) {
    switch (bundle.axis) {
        case Axis::Time:
            return "lag=" + std::to_string(bundle.lag.value_or(0));
        case Axis::UserGroup:
            return bundle.params.value("id_group", "?") + "->" +
                   bundle.params.value("ood_group", "?");
        case Axis::Geography:
            return bundle.params.value("id_region", "?") + "->" +
                   bundle.params.value("ood_region", "?");
        case Axis::RandomBaseline:
            return "random";
    }
    return "?";
}

inline Corpus subsample(const Corpus& corpus, std::size_t want, SeededRng& rng,
                        const std::string& label) {
    if (corpus.size() <= want) return corpus;
    return corpus.select(rng.sample_indices(corpus.size(), want), label);
}

} // namespace detail

// Run every enabled measure between an ID-train sample of size <= n and the
// OOD eval records (subsampled to m when larger). `embeddings`, when given,
// must cover every sampled record id; it is required for mauve, delta, and
// avg_min_distance.
inline std::vector<ReportRow> run_measure_suite(const SplitBundle& bundle,
                                                const EmbeddingMatrix* embeddings,
                                                const MeasureConfig& config) {
    config.validate();
    check_disjoint(bundle);
    if (bundle.id_train.empty() || bundle.ood_eval.empty()) {
        throw InputError("run_measure_suite: bundle '" + bundle.setting_id +
                         "' has an empty id_train or ood_eval");
    }
    if (config.needs_embeddings() && embeddings == nullptr) {
        throw InputError("run_measure_suite: embeddings required for an enabled measure");
    }
    const std::uint64_t setting_seed = derive_seed(config.seed, bundle.setting_id);
    SeededRng rng(setting_seed);
    Corpus p_sample = detail::subsample(bundle.id_train, config.n, rng,
                                        bundle.setting_id + "/p_sample");
    Corpus q_sample = detail::subsample(bundle.ood_eval, config.m, rng,
                                        bundle.setting_id + "/q_sample");
    const auto p_texts = p_sample.texts();
    const auto q_texts = q_sample.texts();

    std::optional<EmbeddingMatrix> p_emb, q_emb;
    if (config.needs_embeddings()) {
        p_emb = select_embeddings(*embeddings, p_sample);
        q_emb = select_embeddings(*embeddings, q_sample);
    }

    // shared-support unigram distributions for the KL family
    std::optional<std::vector<double>> p_dist, q_dist;
    auto unigram_pair = [&]() {
        if (!p_dist) {
            Vocabulary vocab;
            detail::count_tokens(p_texts, vocab);
            detail::count_tokens(q_texts, vocab);
            p_dist = unigram_distribution(p_texts, vocab, config.alpha);
            q_dist = unigram_distribution(q_texts, vocab, config.alpha);
        }
    };

    std::vector<ReportRow> rows;
    auto emit = [&](const std::string& measure, double value) {
        rows.push_back({axis_name(bundle.axis), bundle.setting_id, detail::bundle_label(bundle),
                        measure, value, p_sample.size(), q_sample.size(), config.seed});
    };

    for (const auto& measure : config.measures) {
        if (measure == "mauve") {
            auto result = mauve_score(*p_emb, *q_emb, config.mauve,
                                      derive_seed(setting_seed, "kmeans"));
            emit("mauve", result.value);
        } else if (measure == "delta") {
            emit("delta_score", delta_score(*p_emb, *q_emb).value);
        } else if (measure == "perplexity") {
            auto model = NGramModel::train(p_texts, config.lm_order, config.alpha);
            emit("perplexity", model.perplexity(q_texts));
        } else if (measure == "bleu") {
            const double forward = corpus_bleu(q_texts, p_texts, config.bleu_max_n,
                                               config.bleu_epsilon).value;
            if (config.bleu_symmetric) {
                const double backward = corpus_bleu(p_texts, q_texts, config.bleu_max_n,
                                                    config.bleu_epsilon).value;
                emit("bleu", 0.5 * (forward + backward));
            } else {
                emit("bleu", forward);
            }
        } else if (measure == "kl") {
            unigram_pair();
            emit("kl", kl_divergence(*p_dist, *q_dist));
        } else if (measure == "reverse_kl") {
            unigram_pair();
            emit("reverse_kl", reverse_kl(*p_dist, *q_dist));
        } else if (measure == "jsd") {
            unigram_pair();
            emit("jsd", jsd(*p_dist, *q_dist));
        } else if (measure == "zipf") {
            emit("zipf", zipf_divergence(p_texts, q_texts, config.zipf_top_r));
        } else if (measure == "ngram_overlap") {
            auto report = ngram_overlap(p_texts, q_texts, config.overlap_k);
            emit("ngram_overlap_record", report.record_fraction);
            emit("ngram_overlap_gram", report.gram_fraction);
        } else if (measure == "avg_min_distance") {
            emit("avg_min_distance", avg_min_distance(*p_emb, *q_emb, config.distance_metric));
        }
    }
    return rows;
}

struct MeasureSummary {
    std::string measure;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 when fewer than 2 values
    std::size_t count = 0;
};

struct BaselineResult {
    std::vector<ReportRow> rows;
    std::vector<MeasureSummary> summary;
};

// Shift expected under random sampling: the measure suite over `pair_count`
// disjoint random pairs, plus per-measure mean and sample stddev. Summary
// rows are appended with setting_id "summary".
inline BaselineResult run_baseline(const Corpus& corpus, const EmbeddingMatrix* embeddings,
                                   const MeasureConfig& config, std::size_t pair_count = 72) {
    config.validate();
    auto pairs = sample_random_baseline(corpus, config.n, pair_count,
                                        derive_seed(config.seed, "random_baseline"));
    BaselineResult result;
    std::map<std::string, std::vector<double>> values;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        SplitBundle bundle;
        bundle.axis = Axis::RandomBaseline;
        char sid[32];
        std::snprintf(sid, sizeof(sid), "rand_%03zu", p);
        bundle.setting_id = sid;
        bundle.id_train = pairs[p].first;
        bundle.ood_eval = pairs[p].second;
        bundle.params = {{"pair", p}, {"n", config.n}, {"seed", config.seed}};
        auto rows = run_measure_suite(bundle, embeddings, config);
        for (const auto& row : rows) values[row.measure].push_back(row.value);
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    }
    for (const auto& [measure, vals] : values) {
        MeasureSummary s;
        s.measure = measure;
        s.count = vals.size();
        for (double v : vals) s.mean += v;
        s.mean /= static_cast<double>(vals.size());
        if (vals.size() > 1) {
            double acc = 0.0;
            for (double v : vals) acc += (v - s.mean) * (v - s.mean);
            s.stddev = std::sqrt(acc / static_cast<double>(vals.size() - 1));
        }
        result.summary.push_back(s);
        result.rows.push_back({"random_baseline", "summary", "mean", measure, s.mean, config.n,
                               config.n, config.seed});
        result.rows.push_back({"random_baseline", "summary", "stddev", measure, s.stddev, config.n,
                               config.n, config.seed});
    }
    return result;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace detail {

// Shortest round-trip decimal form; byte-stable across runs and platforms.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline void sort_rows(std::vector<ReportRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (a.axis != b.axis) return a.axis < b.axis;
        if (a.setting_id != b.setting_id) return a.setting_id < b.setting_id;
        return a.measure < b.measure;
    });
}

} // namespace detail

enum class ReportFormat { Csv, Json };

inline void write_report_stream(std::vector<ReportRow> rows, ReportFormat format,
                                std::ostream& out) {
    if (rows.empty()) throw InputError("write_report: no rows");
    detail::sort_rows(rows);
    if (format == ReportFormat::Csv) {
        out << "axis,setting_id,label,measure,value,n,m,seed\n";
        for (const auto& r : rows) {
            out << detail::csv_escape(r.axis) << ',' << detail::csv_escape(r.setting_id) << ','
                << detail::csv_escape(r.label) << ',' << detail::csv_escape(r.measure) << ','
                << detail::format_double(r.value) << ',' << r.n << ',' << r.m << ',' << r.seed
                << '\n';
        }
    } else {
        json arr = json::array();
        for (const auto& r : rows) {
            arr.push_back({{"axis", r.axis},
                           {"setting_id", r.setting_id},
                           {"label", r.label},
                           {"measure", r.measure},
                           {"value", r.value},
                           {"n", r.n},
                           {"m", r.m},
                           {"seed", r.seed}});
        }
        out << arr.dump(2) << '\n';
    }
}

inline void write_report(const std::vector<ReportRow>& rows, ReportFormat format,
                         const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write report file '" + path + "'");
    write_report_stream(rows, format, out);
    if (!out) throw InputError("failed writing report file '" + path + "'");
}

// ---------------------------------------------------------------------------
// SVG charts
// ---------------------------------------------------------------------------

using ChartSeries = std::vector<std::pair<std::string, double>>;  // (x label, y)

// Standalone SVG line chart over categorical x positions. Text-based and
// byte-deterministic for fixed input, so CI can assert on the file.
inline std::string render_chart_svg(const ChartSeries& series, const std::string& title,
                                    const std::string& y_label) {
    if (series.size() < 2) throw InputError("emit_chart: need at least 2 points");
    const double width = 800, height = 500;
    const double left = 70, right = 780, top = 40, bottom = 440;
    double y_min = series[0].second, y_max = series[0].second;
    for (const auto& [label, v] : series) {
        y_min = std::min(y_min, v);
        y_max = std::max(y_max, v);
    }
    if (y_min == y_max) {
        y_min -= 1.0;
        y_max += 1.0;
    }
    const double pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;
    auto x_at = [&](std::size_t i) {
        return left + (right - left) * static_cast<double>(i) /
                          static_cast<double>(series.size() - 1);
    };
    auto y_at = [&](double v) { return bottom - (bottom - top) * (v - y_min) / (y_max - y_min); };
    auto fmt = detail::format_double;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
        << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " " << fmt(height) << "\">\n";
    svg << "<rect width=\"" << fmt(width) << "\" height=\"" << fmt(height)
        << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << fmt(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">" << detail::xml_escape(title) << "</text>\n";
    // axes
    svg << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left)
        << "\" y2=\"" << fmt(bottom) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(bottom) << "\" x2=\"" << fmt(right)
        << "\" y2=\"" << fmt(bottom) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"16\" y=\"" << fmt((top + bottom) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 16 " << fmt((top + bottom) / 2) << ")\">"
        << detail::xml_escape(y_label) << "</text>\n";
    // y ticks
    for (int t = 0; t <= 4; ++t) {
        const double v = y_min + (y_max - y_min) * t / 4.0;
        const double y = y_at(v);
        svg << "<line x1=\"" << fmt(left - 4) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left)
            << "\" y2=\"" << fmt(y) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v)
            << "</text>\n";
    }
    // x tick labels
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double x = x_at(i);
        svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(bottom) << "\" x2=\"" << fmt(x)
            << "\" y2=\"" << fmt(bottom + 4) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(bottom + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
            << detail::xml_escape(series[i].first) << "</text>\n";
    }
    // polyline
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (i) svg << ' ';
        svg << fmt(x_at(i)) << ',' << fmt(y_at(series[i].second));
    }
    svg << "\"/>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        svg << "<circle cx=\"" << fmt(x_at(i)) << "\" cy=\"" << fmt(y_at(series[i].second))
            << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

inline void emit_chart(const ChartSeries& series, const std::string& path,
                       const std::string& title = "driftlens", const std::string& y_label = "value") {
    const std::string svg = render_chart_svg(series, title, y_label);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write chart file '" + path + "'");
    out << svg;
    if (!out) throw InputError("failed writing chart file '" + path + "'");
}

} // namespace driftlens
