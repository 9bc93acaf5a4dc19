// driftlens CLI: split construction, the measure suite, random baselines,
// shift-representative pairs, the judge arena, and chart emission.
//
// Exit codes: 0 success, 1 input error, 2 internal error.

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "driftlens/driftlens.hpp"

namespace dl = driftlens;
using dl::json;

namespace {

dl::CorpusFormat parse_corpus_format(const std::string& name) {
    if (name == "jsonl") return dl::CorpusFormat::Jsonl;
    if (name == "csv") return dl::CorpusFormat::Csv;
    throw dl::InputError("corpus format must be jsonl or csv, got '" + name + "'");
}

dl::EmbeddingFormat parse_embedding_format(const std::string& name) {
    if (name == "binary") return dl::EmbeddingFormat::Binary;
    if (name == "jsonl") return dl::EmbeddingFormat::Jsonl;
    throw dl::InputError("embedding format must be binary or jsonl, got '" + name + "'");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw dl::InputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw dl::InputError("'" + path + "' is not valid JSON: " + std::string(e.what()));
    }
}

void write_json_file(const json& value, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dl::InputError("cannot write '" + path + "'");
    out << value.dump(2) << '\n';
    if (!out) throw dl::InputError("failed writing '" + path + "'");
}

void write_text_file(const std::string& text, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dl::InputError("cannot write '" + path + "'");
    out << text;
    if (!out) throw dl::InputError("failed writing '" + path + "'");
}

struct CorpusArgs {
    std::string path;
    std::string format = "jsonl";
    bool keep_duplicates = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--input", path, "corpus file")->required();
        cmd->add_option("--input-format", format, "jsonl or csv (default jsonl)");
        cmd->add_flag("--keep-duplicates", keep_duplicates,
                      "skip first-turn exact-duplicate removal");
    }

    dl::Corpus load() const {
        dl::Corpus corpus = dl::load_corpus(path, parse_corpus_format(format));
        if (!keep_duplicates) corpus = dl::dedupe_first_turn(corpus);
        return corpus;
    }
};

struct EmbeddingArgs {
    std::string path;
    std::string format = "binary";

    void attach(CLI::App* cmd) {
        cmd->add_option("--embeddings", path, "embedding file aligned to the corpus");
        cmd->add_option("--embeddings-format", format, "binary or jsonl (default binary)");
    }

    std::optional<dl::EmbeddingMatrix> load(const dl::Corpus& corpus) const {
        if (path.empty()) return std::nullopt;
        return dl::load_embeddings(path, parse_embedding_format(format), corpus);
    }
};

// Flags mirror config keys; anything set on the command line overrides the
// config file, which overrides the built-in defaults.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n, m;
    std::vector<std::string> measures;
    std::optional<std::size_t> mauve_k, mauve_grid;
    std::optional<double> mauve_c;
    std::optional<std::size_t> lm_order;
    std::optional<double> alpha;
    std::optional<std::size_t> bleu_max_n;
    bool bleu_symmetric = false;
    std::optional<std::size_t> overlap_k, zipf_top_r;
    std::string distance_metric;

    void attach(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "master seed (config key: seed)");
        cmd->add_option("--n", n, "ID-side sample size (config key: n)");
        cmd->add_option("--m", m, "OOD-side sample size (config key: m)");
        cmd->add_option("--measures", measures, "enabled measures (config key: measures)")
            ->delimiter(',');
        cmd->add_option("--mauve-k", mauve_k, "cluster count, 0 = auto (config: mauve.k)");
        cmd->add_option("--mauve-c", mauve_c, "divergence scaling (config: mauve.c)");
        cmd->add_option("--mauve-grid", mauve_grid, "lambda grid size (config: mauve.grid_size)");
        cmd->add_option("--lm-order", lm_order, "n-gram order (config: lm.order)");
        cmd->add_option("--alpha", alpha, "add-alpha smoothing (config: lm.alpha)");
        cmd->add_option("--bleu-max-n", bleu_max_n, "max n-gram length (config: bleu.max_n)");
        cmd->add_flag("--bleu-symmetric", bleu_symmetric,
                      "average both BLEU directions (config: bleu.symmetric)");
        cmd->add_option("--overlap-k", overlap_k, "contamination k-gram size (config: overlap.k)");
        cmd->add_option("--zipf-top-r", zipf_top_r, "rank truncation (config: zipf.top_r)");
        cmd->add_option("--distance-metric", distance_metric,
                        "euclidean or cosine (config: distance_metric)");
    }

    dl::MeasureConfig resolve(const std::string& config_path) const {
        dl::MeasureConfig cfg;
        if (!config_path.empty()) cfg = dl::MeasureConfig::from_json(read_json_file(config_path));
        if (seed) cfg.seed = *seed;
        if (n) cfg.n = *n;
        if (m) cfg.m = *m;
        if (!measures.empty()) cfg.measures = measures;
        if (mauve_k) cfg.mauve.k = *mauve_k;
        if (mauve_c) cfg.mauve.c = *mauve_c;
        if (mauve_grid) cfg.mauve.grid_size = *mauve_grid;
        if (lm_order) cfg.lm_order = *lm_order;
        if (alpha) cfg.alpha = *alpha;
        if (bleu_max_n) cfg.bleu_max_n = *bleu_max_n;
        if (bleu_symmetric) cfg.bleu_symmetric = true;
        if (overlap_k) cfg.overlap_k = *overlap_k;
        if (zipf_top_r) cfg.zipf_top_r = *zipf_top_r;
        if (!distance_metric.empty()) {
            if (distance_metric == "euclidean") cfg.distance_metric = dl::DistanceMetric::Euclidean;
            else if (distance_metric == "cosine") cfg.distance_metric = dl::DistanceMetric::Cosine;
            else throw dl::InputError("--distance-metric must be euclidean or cosine");
        }
        cfg.validate();
        return cfg;
    }
};

// Numeric-aware label ordering for chart axes: "lag=2" sorts before "lag=10".
bool label_less(const std::string& a, const std::string& b) {
    auto leading_int = [](const std::string& s) -> std::optional<long> {
        auto pos = s.find_first_of("0123456789");
        if (pos == std::string::npos) return std::nullopt;
        long v = 0;
        auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), v);
        if (ec != std::errc()) return std::nullopt;
        return v;
    };
    auto ia = leading_int(a);
    auto ib = leading_int(b);
    if (ia && ib && *ia != *ib) return *ia < *ib;
    return a < b;
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

int cmd_split(const CorpusArgs& corpus_args, const std::string& axis, std::size_t buckets,
              int ood_month, int id_month, const std::string& id_group,
              const std::string& ood_group, long min_group_size,
              const std::vector<std::string>& regions, std::size_t pairs, dl::SplitSizes sizes,
              std::uint64_t seed, const std::string& out_path) {
    dl::Corpus corpus = corpus_args.load();
    std::vector<dl::SplitBundle> bundles;
    if (axis == "time") {
        auto time_buckets = dl::bucket_by_time(corpus, buckets);
        if (ood_month >= 0) {
            if (id_month < 0) throw dl::InputError("--id-month required with --ood-month");
            bundles.push_back(dl::build_time_splits(time_buckets,
                                                    static_cast<std::size_t>(ood_month),
                                                    static_cast<std::size_t>(id_month), sizes,
                                                    seed));
        } else {
            bundles = dl::enumerate_time_splits(time_buckets, sizes, seed);
            std::cerr << "time axis: enumerated " << bundles.size() << " settings over "
                      << buckets << " buckets\n";
        }
    } else if (axis == "user_group") {
        auto assignment = dl::assign_user_groups(corpus);
        const std::size_t threshold = min_group_size >= 0
                                          ? static_cast<std::size_t>(min_group_size)
                                          : dl::default_min_group_size(sizes);
        if (!id_group.empty() || !ood_group.empty()) {
            if (id_group.empty() || ood_group.empty()) {
                throw dl::InputError("--id-group and --ood-group must be given together");
            }
            bundles.push_back(dl::build_group_splits(corpus, assignment,
                                                     dl::group_from_name(id_group),
                                                     dl::group_from_name(ood_group), sizes,
                                                     threshold, seed));
        } else {
            bundles = dl::enumerate_group_splits(corpus, assignment, sizes, threshold, seed);
            std::cerr << "user_group axis: enumerated " << bundles.size() << " settings\n";
        }
    } else if (axis == "geography") {
        if (regions.size() < 2) throw dl::InputError("--regions needs at least 2 region names");
        bundles = dl::build_geo_splits(corpus, regions, sizes, seed);
        std::cerr << "geography axis: enumerated " << bundles.size() << " settings\n";
    } else if (axis == "random") {
        auto sampled = dl::sample_random_baseline(corpus, sizes.eval_size, pairs, seed);
        for (std::size_t p = 0; p < sampled.size(); ++p) {
            dl::SplitBundle b;
            b.axis = dl::Axis::RandomBaseline;
            char sid[32];
            std::snprintf(sid, sizeof(sid), "rand_%03zu", p);
            b.setting_id = sid;
            b.id_train = sampled[p].first;
            b.ood_eval = sampled[p].second;
            b.params = {{"pair", p}, {"n", sizes.eval_size}, {"seed", seed}};
            bundles.push_back(std::move(b));
        }
    } else {
        throw dl::InputError("--axis must be time, user_group, geography, or random");
    }
    for (const auto& b : bundles) dl::check_disjoint(b);
    write_json_file(dl::write_manifest(bundles), out_path);
    std::cerr << "wrote " << bundles.size() << " settings to " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// measure / baseline
// ---------------------------------------------------------------------------

int cmd_measure(const CorpusArgs& corpus_args, const EmbeddingArgs& embed_args,
                const std::string& manifest_path, const std::string& config_path,
                const ConfigOverrides& overrides, const std::string& chart_measure,
                const std::string& out_prefix) {
    dl::MeasureConfig cfg = overrides.resolve(config_path);
    dl::Corpus corpus = corpus_args.load();
    auto bundles = dl::read_manifest(read_json_file(manifest_path), corpus);
    if (bundles.empty()) throw dl::InputError("manifest contains no settings");
    auto embeddings = embed_args.load(corpus);
    if (cfg.needs_embeddings() && !embeddings) {
        throw dl::InputError("--embeddings required for measures: mauve, delta, avg_min_distance");
    }
    std::vector<dl::ReportRow> rows;
    for (const auto& bundle : bundles) {
        auto part = dl::run_measure_suite(bundle, embeddings ? &*embeddings : nullptr, cfg);
        rows.insert(rows.end(), part.begin(), part.end());
        std::cerr << bundle.setting_id << ": " << part.size() << " measures\n";
    }
    dl::write_report(rows, dl::ReportFormat::Csv, out_prefix + ".csv");
    dl::write_report(rows, dl::ReportFormat::Json, out_prefix + ".json");
    write_json_file(cfg.to_json(), out_prefix + ".config.json");

    std::string chosen = chart_measure;
    if (chosen.empty() && !cfg.measures.empty()) {
        chosen = cfg.measures.front() == "delta" ? "delta_score" : cfg.measures.front();
    }
    dl::ChartSeries series;
    for (const auto& row : rows) {
        if (row.measure == chosen) series.emplace_back(row.setting_id, row.value);
    }
    std::sort(series.begin(), series.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (series.size() >= 2) {
        dl::emit_chart(series, out_prefix + ".svg", chosen + " by setting", chosen);
    } else {
        std::cerr << "chart skipped: fewer than 2 settings carry measure '" << chosen << "'\n";
    }
    std::cerr << "wrote " << rows.size() << " rows to " << out_prefix << ".{csv,json}\n";
    return 0;
}

int cmd_baseline(const CorpusArgs& corpus_args, const EmbeddingArgs& embed_args,
                 const std::string& config_path, const ConfigOverrides& overrides,
                 std::size_t pairs, const std::string& out_prefix) {
    dl::MeasureConfig cfg = overrides.resolve(config_path);
    cfg.m = cfg.n;  // baseline pairs are two same-size samples
    dl::Corpus corpus = corpus_args.load();
    auto embeddings = embed_args.load(corpus);
    if (cfg.needs_embeddings() && !embeddings) {
        throw dl::InputError("--embeddings required for measures: mauve, delta, avg_min_distance");
    }
    auto result = dl::run_baseline(corpus, embeddings ? &*embeddings : nullptr, cfg, pairs);
    dl::write_report(result.rows, dl::ReportFormat::Csv, out_prefix + ".csv");
    dl::write_report(result.rows, dl::ReportFormat::Json, out_prefix + ".json");
    write_json_file(cfg.to_json(), out_prefix + ".config.json");
    for (const auto& s : result.summary) {
        std::cerr << s.measure << ": mean " << s.mean << " stddev " << s.stddev << " over "
                  << s.count << " pairs\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// represent
// ---------------------------------------------------------------------------

int cmd_represent(const CorpusArgs& corpus_args, const EmbeddingArgs& embed_args,
                  const std::string& manifest_path, const std::string& setting_filter,
                  unsigned percentile, std::size_t count, std::uint64_t seed,
                  const std::string& out_path) {
    dl::Corpus corpus = corpus_args.load();
    auto bundles = dl::read_manifest(read_json_file(manifest_path), corpus);
    auto embeddings = embed_args.load(corpus);
    if (!embeddings) throw dl::InputError("--embeddings is required for represent");
    json reports = json::array();
    for (const auto& bundle : bundles) {
        if (!setting_filter.empty() && bundle.setting_id != setting_filter) continue;
        auto id_emb = dl::select_embeddings(*embeddings, bundle.id_train);
        auto ood_emb = dl::select_embeddings(*embeddings, bundle.ood_eval);
        auto pairs = dl::representative_pairs(bundle.id_train, id_emb, bundle.ood_eval, ood_emb,
                                              percentile,
                                              count, dl::derive_seed(seed, bundle.setting_id));
        json meta = {{"setting_id", bundle.setting_id},
                     {"axis", dl::axis_name(bundle.axis)},
                     {"percentile", percentile},
                     {"count", count},
                     {"seed", seed}};
        reports.push_back(dl::representative_pairs_report(pairs, bundle.id_train, bundle.ood_eval,
                                                          meta));
    }
    if (reports.empty()) throw dl::InputError("no settings matched");
    write_json_file(reports, out_path);
    std::cerr << "wrote " << reports.size() << " pair reports to " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// arena
// ---------------------------------------------------------------------------

dl::DebiasMode parse_mode(const std::string& name) {
    if (name == "both_orders") return dl::DebiasMode::BothOrders;
    if (name == "random_order") return dl::DebiasMode::RandomOrder;
    throw dl::InputError("--mode must be both_orders or random_order");
}

std::vector<dl::ResponsePair> load_schedule(const std::string& pairs_path,
                                            const std::string& mode, std::uint64_t seed) {
    std::ifstream in(pairs_path, std::ios::binary);
    if (!in) throw dl::InputError("cannot open '" + pairs_path + "'");
    auto inputs = dl::load_arena_inputs(in);
    if (inputs.empty()) throw dl::InputError("no pairs in '" + pairs_path + "'");
    return dl::debias_schedule(dl::to_response_pairs(inputs), parse_mode(mode), seed);
}

int cmd_arena_prepare(const std::string& pairs_path, const std::string& mode, std::uint64_t seed,
                      const std::string& out_path) {
    auto schedule = load_schedule(pairs_path, mode, seed);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw dl::InputError("cannot write '" + out_path + "'");
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& pair : schedule) {
        std::string key = pair.pair_id;
        if (seen[pair.pair_id]++ > 0) key += "#swap";
        json line = {{"key", key},
                     {"pair_id", pair.pair_id},
                     {"a_is", pair.a_is == dl::ASlot::IdModel ? "id" : "oracle"},
                     {"prompt", dl::build_judge_prompt(pair)}};
        out << line.dump() << '\n';
    }
    std::cerr << "wrote " << schedule.size() << " scheduled judgments to " << out_path << "\n";
    return 0;
}

int cmd_arena_score(const std::string& pairs_path, const std::string& mode, std::uint64_t seed,
                    const std::string& stub_path, const std::string& endpoint,
                    const std::string& token, const std::string& out_path) {
    auto schedule = load_schedule(pairs_path, mode, seed);
    std::unique_ptr<dl::JudgeClient> client;
    if (!stub_path.empty()) {
        client = std::make_unique<dl::StubJudgeClient>(
            dl::StubJudgeClient::from_json(read_json_file(stub_path)));
    } else if (!endpoint.empty()) {
        auto scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos) {
            throw dl::InputError("--endpoint must be an http(s) URL");
        }
        auto path_start = endpoint.find('/', scheme_end + 3);
        const std::string base = path_start == std::string::npos ? endpoint
                                                                 : endpoint.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/"
                                                                 : endpoint.substr(path_start);
        auto transport = [base, path, token](const std::string& body) {
            httplib::Client http(base);
            http.set_read_timeout(120, 0);
            httplib::Headers headers;
            if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
            auto res = http.Post(path, headers, body, "application/json");
            if (!res) throw std::runtime_error("connection to " + base + " failed");
            return std::make_pair(res->status, res->body);
        };
        client = std::make_unique<dl::HttpJudgeClient>(transport);
    } else {
        throw dl::InputError("arena score needs --stub or --endpoint");
    }
    auto judged = dl::run_arena(schedule, *client);
    auto result = dl::aggregate(judged, parse_mode(mode));
    write_json_file(dl::arena_result_to_json(result, parse_mode(mode)), out_path);
    if (result.valid_count > 0) {
        std::cerr << "id_loss_rate " << result.id_loss_rate << ", id_win_rate "
                  << result.id_win_rate << ", tie_rate " << result.tie_rate << " over "
                  << result.valid_count << " valid pairs (" << result.invalid_count
                  << " invalid)\n";
    } else {
        std::cerr << "no valid judgments (" << result.invalid_count << " invalid)\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// chart
// ---------------------------------------------------------------------------

int cmd_chart(const std::string& report_path, const std::string& measure, const std::string& axis,
              const std::string& title, const std::string& out_path) {
    std::ifstream in(report_path, std::ios::binary);
    if (!in) throw dl::InputError("cannot open '" + report_path + "'");
    dl::detail::CsvReader reader(in);
    std::vector<std::string> row;
    if (!reader.next_row(row)) throw dl::InputError("report is empty");
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < row.size(); ++i) col[row[i]] = i;
    for (const char* need : {"axis", "label", "measure", "value"}) {
        if (!col.count(need)) throw dl::InputError("report is missing column '" + std::string(need) + "'");
    }
    std::map<std::string, std::pair<double, std::size_t>> by_label;  // label -> (sum, count)
    while (reader.next_row(row)) {
        if (row.size() < col.size()) continue;
        if (row[col["measure"]] != measure) continue;
        if (!axis.empty() && row[col["axis"]] != axis) continue;
        double v = 0.0;
        const std::string& text = row[col["value"]];
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc()) throw dl::InputError("bad value '" + text + "' in report");
        auto& slot = by_label[row[col["label"]]];
        slot.first += v;
        slot.second += 1;
    }
    if (by_label.size() < 2) {
        throw dl::InputError("need at least 2 labels with measure '" + measure + "' to chart");
    }
    dl::ChartSeries series;
    for (const auto& [label, sum_count] : by_label) {
        series.emplace_back(label, sum_count.first / static_cast<double>(sum_count.second));
    }
    std::sort(series.begin(), series.end(),
              [](const auto& a, const auto& b) { return label_less(a.first, b.first); });
    dl::emit_chart(series, out_path, title.empty() ? measure : title, measure);
    std::cerr << "wrote chart with " << series.size() << " points to " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftlens: natural prompt distribution shift measurement"};
    app.require_subcommand(1);

    // universal flag storage
    std::uint64_t seed = 42;
    std::string config_path;
    std::string out_path;

    // --- split ---
    auto* split = app.add_subcommand("split", "construct {ID, OOD, oracle} split settings");
    CorpusArgs split_corpus;
    split_corpus.attach(split);
    std::string axis;
    std::size_t buckets = 12;
    int ood_month = -1, id_month = -1;
    std::string id_group, ood_group;
    long min_group_size = -1;
    std::vector<std::string> regions;
    std::size_t baseline_pairs = 72;
    dl::SplitSizes sizes;
    split->add_option("--axis", axis, "time, user_group, geography, or random")->required();
    split->add_option("--buckets", buckets, "time bucket count (default 12)");
    split->add_option("--ood-month", ood_month, "single time setting: OOD bucket N");
    split->add_option("--id-month", id_month, "single time setting: last ID bucket M (M < N)");
    split->add_option("--id-group", id_group, "single user-group setting: ID group (e.g. early_low)");
    split->add_option("--ood-group", ood_group, "single user-group setting: OOD group");
    split->add_option("--min-group-size", min_group_size,
                      "usability threshold (default id+oracle+eval sizes)");
    split->add_option("--regions", regions, "geography region names")->delimiter(',');
    split->add_option("--pairs", baseline_pairs, "random-baseline pair count (default 72)");
    split->add_option("--id-size", sizes.id_size, "ID train sample size");
    split->add_option("--oracle-size", sizes.oracle_size, "oracle train sample size");
    split->add_option("--eval-size", sizes.eval_size, "OOD eval sample size");
    split->add_option("--seed", seed, "master seed (default 42)");
    split->add_option("--out", out_path, "manifest output path")->required();
    split->callback([&]() {
        if (axis == "geography" && split->count("--id-size") == 0) {
            sizes.id_size = 5000;
            sizes.oracle_size = split->count("--oracle-size") ? sizes.oracle_size : 5000;
        }
        cmd_split(split_corpus, axis, buckets, ood_month, id_month, id_group, ood_group,
                  min_group_size, regions, baseline_pairs, sizes, seed, out_path);
    });

    // --- measure ---
    auto* measure = app.add_subcommand("measure", "run the measure suite over a split manifest");
    CorpusArgs measure_corpus;
    measure_corpus.attach(measure);
    EmbeddingArgs measure_embed;
    measure_embed.attach(measure);
    ConfigOverrides measure_overrides;
    std::string manifest_path;
    std::string chart_measure;
    measure->add_option("--manifest", manifest_path, "split manifest JSON")->required();
    measure->add_option("--config", config_path, "measure config JSON");
    measure_overrides.attach(measure);
    measure->add_option("--chart-measure", chart_measure, "measure to chart (default: first enabled)");
    measure->add_option("--out", out_path, "output prefix (.csv/.json/.svg/.config.json)")->required();
    measure->callback([&]() {
        cmd_measure(measure_corpus, measure_embed, manifest_path, config_path, measure_overrides,
                    chart_measure, out_path);
    });

    // --- baseline ---
    auto* baseline = app.add_subcommand("baseline", "measure shift between random corpus pairs");
    CorpusArgs baseline_corpus;
    baseline_corpus.attach(baseline);
    EmbeddingArgs baseline_embed;
    baseline_embed.attach(baseline);
    ConfigOverrides baseline_overrides;
    std::size_t bl_pairs = 72;
    baseline->add_option("--config", config_path, "measure config JSON");
    baseline_overrides.attach(baseline);
    baseline->add_option("--pairs", bl_pairs, "pair count (default 72)");
    baseline->add_option("--out", out_path, "output prefix")->required();
    baseline->callback([&]() {
        cmd_baseline(baseline_corpus, baseline_embed, config_path, baseline_overrides, bl_pairs,
                     out_path);
    });

    // --- represent ---
    auto* represent = app.add_subcommand("represent", "sample shift-representative prompt pairs");
    CorpusArgs rep_corpus;
    rep_corpus.attach(represent);
    EmbeddingArgs rep_embed;
    rep_embed.attach(represent);
    std::string rep_manifest, rep_setting;
    unsigned percentile = 10;
    std::size_t rep_count = 10;
    represent->add_option("--manifest", rep_manifest, "split manifest JSON")->required();
    represent->add_option("--setting-id", rep_setting, "only this setting (default: all)");
    represent->add_option("--percentile", percentile, "depth percentile slice (default 10)");
    represent->add_option("--count", rep_count, "pairs per setting (default 10)");
    represent->add_option("--seed", seed, "master seed (default 42)");
    represent->add_option("--out", out_path, "pair report output path")->required();
    represent->callback([&]() {
        cmd_represent(rep_corpus, rep_embed, rep_manifest, rep_setting, percentile, rep_count,
                      seed, out_path);
    });

    // --- arena ---
    auto* arena = app.add_subcommand("arena", "ID-vs-oracle judge harness");
    arena->require_subcommand(1);
    std::string pairs_path, mode = "both_orders", stub_path, endpoint, token;

    auto* prepare = arena->add_subcommand("prepare", "emit scheduled judge prompts as JSONL");
    prepare->add_option("--pairs", pairs_path, "arena input JSONL")->required();
    prepare->add_option("--mode", mode, "both_orders or random_order (default both_orders)");
    prepare->add_option("--seed", seed, "schedule seed (default 42)");
    prepare->add_option("--out", out_path, "schedule output path")->required();
    prepare->callback([&]() { cmd_arena_prepare(pairs_path, mode, seed, out_path); });

    auto* score = arena->add_subcommand("score", "judge pairs and aggregate win/loss/tie rates");
    score->add_option("--pairs", pairs_path, "arena input JSONL")->required();
    score->add_option("--mode", mode, "both_orders or random_order (default both_orders)");
    score->add_option("--seed", seed, "schedule seed (default 42)");
    score->add_option("--stub", stub_path, "offline stub: JSON object of canned judge outputs");
    score->add_option("--endpoint", endpoint, "judge service URL");
    score->add_option("--token", token, "bearer token for the judge service");
    score->add_option("--out", out_path, "arena result output path")->required();
    score->callback([&]() {
        cmd_arena_score(pairs_path, mode, seed, stub_path, endpoint, token, out_path);
    });

    // --- chart ---
    auto* chart = app.add_subcommand("chart", "render a measure-vs-label SVG from a report CSV");
    std::string report_path, chart_measure_name, chart_axis, chart_title;
    chart->add_option("--report", report_path, "report CSV from measure/baseline")->required();
    chart->add_option("--measure", chart_measure_name, "measure name to plot")->required();
    chart->add_option("--axis", chart_axis, "restrict to one axis");
    chart->add_option("--title", chart_title, "chart title");
    chart->add_option("--out", out_path, "SVG output path")->required();
    chart->callback([&]() {
        cmd_chart(report_path, chart_measure_name, chart_axis, chart_title, out_path);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return 1;
    } catch (const dl::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
