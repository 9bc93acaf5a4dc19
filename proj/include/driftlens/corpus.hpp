#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "driftlens/error.hpp"
#include "driftlens/rng.hpp"

namespace driftlens {

using json = nlohmann::ordered_json;

// One first-turn user prompt plus optional teacher response and metadata.
struct PromptRecord {
    std::string record_id;
    std::string text;
    std::optional<std::string> response_text;
    std::int64_t timestamp = 0;  // Unix epoch seconds
    std::optional<std::string> user_hash;
    std::optional<std::string> region;
};

inline std::string trim(std::string_view s) {
    const char* ws = " \t\r\n\f\v";
    auto begin = s.find_first_not_of(ws);
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(ws);
    return std::string(s.substr(begin, end - begin + 1));
}

// Immutable ordered collection of records; iteration order equals insertion
// order and record_ids are unique.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::string label) : label_(std::move(label)) {}

    void push_back(PromptRecord rec) {
        if (trim(rec.text).empty()) {
            throw InputError("Corpus: record '" + rec.record_id + "' has empty text");
        }
        auto [it, inserted] = index_.try_emplace(rec.record_id, records_.size());
        if (!inserted) {
            throw InputError("Corpus: duplicate record_id '" + rec.record_id + "'");
        }
        records_.push_back(std::move(rec));
    }

    const std::vector<PromptRecord>& records() const { return records_; }
    const PromptRecord& at(std::size_t i) const { return records_.at(i); }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    const std::string& label() const { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }

    bool contains_id(const std::string& record_id) const { return index_.count(record_id) > 0; }

    std::size_t index_of(const std::string& record_id) const {
        auto it = index_.find(record_id);
        if (it == index_.end()) throw InputError("Corpus: unknown record_id '" + record_id + "'");
        return it->second;
    }

    std::vector<std::string> texts() const {
        std::vector<std::string> out;
        out.reserve(records_.size());
        for (const auto& r : records_) out.push_back(r.text);
        return out;
    }

    Corpus select(const std::vector<std::size_t>& indices, std::string label) const {
        Corpus out(std::move(label));
        for (std::size_t i : indices) out.push_back(records_.at(i));
        return out;
    }

private:
    std::vector<PromptRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
    std::string label_;
};

enum class Axis { Time, UserGroup, Geography, RandomBaseline };

inline std::string axis_name(Axis a) {
    switch (a) {
        case Axis::Time: return "time";
        case Axis::UserGroup: return "user_group";
        case Axis::Geography: return "geography";
        case Axis::RandomBaseline: return "random_baseline";
    }
    throw std::logic_error("axis_name: bad axis");
}

inline Axis axis_from_name(std::string_view name) {
    if (name == "time") return Axis::Time;
    if (name == "user_group") return Axis::UserGroup;
    if (name == "geography") return Axis::Geography;
    if (name == "random_baseline") return Axis::RandomBaseline;
    throw InputError("unknown axis '" + std::string(name) + "'");
}

// An {ID-train, OOD-eval, oracle-train} triple; the unit of one shift setting.
// ood_eval and oracle_train never share a record_id.
struct SplitBundle {
    Axis axis = Axis::Time;
    std::string setting_id;
    Corpus id_train;
    Corpus ood_eval;
    Corpus oracle_train;
    std::optional<int> lag;  // months, Time axis only
    json params = json::object();
};

inline void check_disjoint(const SplitBundle& b) {
    for (const auto& r : b.ood_eval.records()) {
        if (b.oracle_train.contains_id(r.record_id)) {
            throw std::logic_error("SplitBundle '" + b.setting_id +
                                   "': ood_eval and oracle_train share record_id '" +
                                   r.record_id + "'");
        }
    }
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_int64(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    bool neg = false;
    if (s[0] == '-' || s[0] == '+') {
        neg = s[0] == '-';
        pos = 1;
        if (pos == s.size()) return false;
    }
    std::int64_t v = 0;
    for (; pos < s.size(); ++pos) {
        if (s[pos] < '0' || s[pos] > '9') return false;
        v = v * 10 + (s[pos] - '0');
    }
    out = neg ? -v : v;
    return true;
}

// Days since 1970-01-01 for a proleptic Gregorian civil date.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// RFC-3339 timestamp ("2023-04-09T12:34:56Z", optional fraction and numeric
// offset) to epoch seconds. Fractional seconds are truncated.
inline std::int64_t parse_rfc3339(std::string_view s) {
    auto fail = [&]() -> std::int64_t {
        throw InputError("timestamp '" + std::string(s) + "' is neither epoch seconds nor RFC-3339");
    };
    auto digits = [&](std::size_t pos, std::size_t count, std::int64_t& out) {
        out = 0;
        if (pos + count > s.size()) return false;
        for (std::size_t i = 0; i < count; ++i) {
            char c = s[pos + i];
            if (c < '0' || c > '9') return false;
            out = out * 10 + (c - '0');
        }
        return true;
    };
    std::int64_t year, month, day, hour, minute, second;
    if (!digits(0, 4, year) || s.size() < 20 || s[4] != '-' || !digits(5, 2, month) ||
        s[7] != '-' || !digits(8, 2, day)) {
        return fail();
    }
    if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return fail();
    if (!digits(11, 2, hour) || s[13] != ':' || !digits(14, 2, minute) || s[16] != ':' ||
        !digits(17, 2, second)) {
        return fail();
    }
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
        return fail();
    }
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == start) return fail();
    }
    std::int64_t offset = 0;
    if (pos >= s.size()) return fail();
    if (s[pos] == 'Z' || s[pos] == 'z') {
        ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
        const bool neg = s[pos] == '-';
        std::int64_t oh, om;
        if (!digits(pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
            !digits(pos + 4, 2, om)) {
            return fail();
        }
        offset = (oh * 3600 + om * 60) * (neg ? -1 : 1);
        pos += 6;
    } else {
        return fail();
    }
    if (pos != s.size()) return fail();
    return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400 +
           hour * 3600 + minute * 60 + second - offset;
}

inline std::int64_t parse_timestamp_field(const json& v, std::size_t line_no) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        std::int64_t epoch;
        if (parse_int64(s, epoch)) return epoch;
        return parse_rfc3339(s);
    }
    throw InputError("line " + std::to_string(line_no) + ": timestamp must be integer or string");
}

inline std::optional<std::string> optional_string(const json& obj, const char* key,
                                                  std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        throw InputError("line " + std::to_string(line_no) + ": field '" + key +
                         "' must be a string");
    }
    std::string v = it->get<std::string>();
    if (v.empty()) return std::nullopt;
    return v;
}

// Minimal RFC-4180 reader: quoted fields, doubled-quote escapes, embedded
// newlines. Returns one row per call; tracks line numbers for errors.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {}

    std::size_t line() const { return line_; }

    bool next_row(std::vector<std::string>& row) {
        row.clear();
        if (in_.peek() == EOF) return false;
        line_ = next_line_;
        std::string field;
        bool quoted = false;
        bool any = false;
        int c;
        while ((c = in_.get()) != EOF) {
            any = true;
            if (quoted) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        field.push_back('"');
                        in_.get();
                    } else {
                        quoted = false;
                    }
                } else {
                    if (c == '\n') ++next_line_;
                    field.push_back(static_cast<char>(c));
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                row.push_back(std::move(field));
                field.clear();
            } else if (c == '\n') {
                ++next_line_;
                break;
            } else if (c == '\r') {
                if (in_.peek() == '\n') {
                    in_.get();
                    ++next_line_;
                }
                break;
            } else {
                field.push_back(static_cast<char>(c));
            }
        }
        if (!any) return false;
        if (quoted) throw InputError("line " + std::to_string(line_) + ": unterminated quote");
        row.push_back(std::move(field));
        return true;
    }

private:
    std::istream& in_;
    std::size_t line_ = 1;
    std::size_t next_line_ = 1;
};

} // namespace detail

enum class CorpusFormat { Jsonl, Csv };

inline Corpus load_corpus_stream(std::istream& in, CorpusFormat format, std::string label) {
    Corpus corpus(std::move(label));
    // duplicate detection cites both offending lines
    std::unordered_map<std::string, std::size_t> first_line;
    auto add = [&](PromptRecord rec, std::size_t line_no) {
        if (rec.record_id.empty()) {
            throw InputError("line " + std::to_string(line_no) + ": missing required field 'record_id'");
        }
        if (trim(rec.text).empty()) {
            throw InputError("line " + std::to_string(line_no) + ": record '" + rec.record_id +
                             "' has empty text");
        }
        auto it = first_line.find(rec.record_id);
        if (it != first_line.end()) {
            throw InputError("duplicate record_id '" + rec.record_id + "' on lines " +
                             std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        first_line.emplace(rec.record_id, line_no);
        corpus.push_back(std::move(rec));
    };

    if (format == CorpusFormat::Jsonl) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::parse_error& e) {
                throw InputError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
            }
            if (!obj.is_object()) {
                throw InputError("line " + std::to_string(line_no) + ": expected a JSON object");
            }
            PromptRecord rec;
            for (const char* key : {"record_id", "text", "timestamp"}) {
                if (!obj.contains(key)) {
                    throw InputError("line " + std::to_string(line_no) +
                                     ": missing required field '" + key + "'");
                }
            }
            if (!obj["record_id"].is_string() || !obj["text"].is_string()) {
                throw InputError("line " + std::to_string(line_no) +
                                 ": record_id and text must be strings");
            }
            rec.record_id = obj["record_id"].get<std::string>();
            rec.text = obj["text"].get<std::string>();
            rec.timestamp = detail::parse_timestamp_field(obj["timestamp"], line_no);
            rec.response_text = detail::optional_string(obj, "response_text", line_no);
            rec.user_hash = detail::optional_string(obj, "user_hash", line_no);
            rec.region = detail::optional_string(obj, "region", line_no);
            add(std::move(rec), line_no);
        }
    } else {
        detail::CsvReader reader(in);
        std::vector<std::string> row;
        if (!reader.next_row(row)) throw InputError("CSV: missing header row");
        std::unordered_map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < row.size(); ++i) col[trim(row[i])] = i;
        for (const char* key : {"record_id", "text", "timestamp"}) {
            if (!col.count(key)) throw InputError("CSV header: missing required column '" + std::string(key) + "'");
        }
        auto cell = [&](const std::vector<std::string>& r, const char* name) -> std::optional<std::string> {
            auto it = col.find(name);
            if (it == col.end() || it->second >= r.size()) return std::nullopt;
            if (r[it->second].empty()) return std::nullopt;
            return r[it->second];
        };
        while (reader.next_row(row)) {
            const std::size_t line_no = reader.line();
            if (row.size() == 1 && trim(row[0]).empty()) continue;
            PromptRecord rec;
            auto id = cell(row, "record_id");
            auto text = cell(row, "text");
            auto ts = cell(row, "timestamp");
            if (!id) throw InputError("line " + std::to_string(line_no) + ": missing required field 'record_id'");
            if (!text) throw InputError("line " + std::to_string(line_no) + ": missing required field 'text'");
            if (!ts) throw InputError("line " + std::to_string(line_no) + ": missing required field 'timestamp'");
            rec.record_id = *id;
            rec.text = *text;
            if (!detail::parse_int64(*ts, rec.timestamp)) {
                rec.timestamp = detail::parse_rfc3339(*ts);
            }
            rec.response_text = cell(row, "response_text");
            rec.user_hash = cell(row, "user_hash");
            rec.region = cell(row, "region");
            add(std::move(rec), line_no);
        }
    }
    return corpus;
}

inline Corpus load_corpus(const std::string& path, CorpusFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open corpus file '" + path + "'");
    return load_corpus_stream(in, format, path);
}

// Keeps the first occurrence of each exact text string, compared after
// whitespace trimming; records are kept verbatim.
inline Corpus dedupe_first_turn(const Corpus& corpus) {
    Corpus out(corpus.label());
    std::unordered_set<std::string> seen;
    for (const auto& rec : corpus.records()) {
        if (seen.insert(trim(rec.text)).second) out.push_back(rec);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Time axis
// ---------------------------------------------------------------------------

// Sort by (timestamp, record_id), then partition into k contiguous buckets.
// With |corpus| = q*k + r, the first r buckets receive q+1 records.
inline std::vector<Corpus> bucket_by_time(const Corpus& corpus, std::size_t k = 12) {
    if (k == 0) throw InputError("bucket_by_time: k must be positive");
    if (corpus.size() < k) {
        throw InputError("bucket_by_time: corpus has " + std::to_string(corpus.size()) +
                         " records, fewer than k = " + std::to_string(k));
    }
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = corpus.at(a);
        const auto& rb = corpus.at(b);
        if (ra.timestamp != rb.timestamp) return ra.timestamp < rb.timestamp;
        return ra.record_id < rb.record_id;
    });
    const std::size_t q = corpus.size() / k;
    const std::size_t r = corpus.size() % k;
    std::vector<Corpus> buckets;
    buckets.reserve(k);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < k; ++b) {
        const std::size_t take = q + (b < r ? 1 : 0);
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                     order.begin() + static_cast<std::ptrdiff_t>(pos + take));
        buckets.push_back(corpus.select(idx, corpus.label() + "/bucket" + std::to_string(b)));
        pos += take;
    }
    return buckets;
}

struct SplitSizes {
    std::size_t id_size = 10000;
    std::size_t oracle_size = 10000;
    std::size_t eval_size = 1000;
};

namespace detail {

// Pool = concatenation of corpora in order, minus excluded ids.
inline std::vector<const PromptRecord*> make_pool(const std::vector<Corpus>& parts,
                                                  std::size_t first, std::size_t last,
                                                  const std::unordered_set<std::string>* exclude) {
    std::vector<const PromptRecord*> pool;
    for (std::size_t b = first; b <= last; ++b) {
        for (const auto& rec : parts[b].records()) {
            if (exclude && exclude->count(rec.record_id)) continue;
            pool.push_back(&rec);
        }
    }
    return pool;
}

inline Corpus sample_pool(const std::vector<const PromptRecord*>& pool, std::size_t count,
                          SeededRng& rng, std::string label, const std::string& what) {
    if (pool.size() < count) {
        throw InputError("insufficient records for " + what + ": need " + std::to_string(count) +
                         ", pool has " + std::to_string(pool.size()));
    }
    Corpus out(std::move(label));
    for (std::size_t i : rng.sample_indices(pool.size(), count)) out.push_back(*pool[i]);
    return out;
}

} // namespace detail

// OOD eval from bucket N, oracle from buckets 0..N (minus eval ids), ID train
// from buckets 0..M; lag = N - M. All sampling seeded, without replacement.
inline SplitBundle build_time_splits(const std::vector<Corpus>& buckets, std::size_t ood_month,
                                     std::size_t id_month, const SplitSizes& sizes,
                                     std::uint64_t seed) {
    if (ood_month >= buckets.size() || id_month >= ood_month) {
        throw InputError("build_time_splits: need 0 <= id_month < ood_month < " +
                         std::to_string(buckets.size()));
    }
    SeededRng rng(seed);
    SplitBundle bundle;
    bundle.axis = Axis::Time;
    char sid[64];
    std::snprintf(sid, sizeof(sid), "time_N%02zu_M%02zu", ood_month, id_month);
    bundle.setting_id = sid;
    bundle.lag = static_cast<int>(ood_month - id_month);

    auto eval_pool = detail::make_pool(buckets, ood_month, ood_month, nullptr);
    bundle.ood_eval = detail::sample_pool(eval_pool, sizes.eval_size, rng,
                                          bundle.setting_id + "/ood_eval", "ood_eval");
    std::unordered_set<std::string> eval_ids;
    for (const auto& r : bundle.ood_eval.records()) eval_ids.insert(r.record_id);

    auto oracle_pool = detail::make_pool(buckets, 0, ood_month, &eval_ids);
    bundle.oracle_train = detail::sample_pool(oracle_pool, sizes.oracle_size, rng,
                                              bundle.setting_id + "/oracle_train", "oracle_train");

    auto id_pool = detail::make_pool(buckets, 0, id_month, nullptr);
    bundle.id_train = detail::sample_pool(id_pool, sizes.id_size, rng,
                                          bundle.setting_id + "/id_train", "id_train");

    bundle.params = {{"ood_month", ood_month}, {"id_month", id_month},
                     {"id_size", sizes.id_size}, {"oracle_size", sizes.oracle_size},
                     {"eval_size", sizes.eval_size}, {"seed", seed}};
    return bundle;
}

// Every (id_month M, ood_month N) with M < N; per-setting seeds derived from
// the master seed by setting_id.
inline std::vector<SplitBundle> enumerate_time_splits(const std::vector<Corpus>& buckets,
                                                      const SplitSizes& sizes,
                                                      std::uint64_t master_seed) {
    std::vector<SplitBundle> out;
    for (std::size_t n = 1; n < buckets.size(); ++n) {
        for (std::size_t m = 0; m < n; ++m) {
            char sid[64];
            std::snprintf(sid, sizeof(sid), "time_N%02zu_M%02zu", n, m);
            out.push_back(build_time_splits(buckets, n, m, sizes, derive_seed(master_seed, sid)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// User-group axis
// ---------------------------------------------------------------------------

enum class AdoptionStage { Early, Medium, Late };
enum class QueryVolume { Low, Medium, High };

struct UserGroup {
    AdoptionStage stage;
    QueryVolume volume;

    bool operator==(const UserGroup&) const = default;
    auto operator<=>(const UserGroup&) const = default;
};

inline std::string group_name(UserGroup g) {
    static const char* stages[] = {"early", "medium", "late"};
    static const char* volumes[] = {"low", "medium", "high"};
    return std::string(stages[static_cast<int>(g.stage)]) + "_" +
           volumes[static_cast<int>(g.volume)];
}

inline UserGroup group_from_name(std::string_view name) {
    auto sep = name.find('_');
    if (sep == std::string_view::npos) throw InputError("bad group name '" + std::string(name) + "'");
    auto stage_s = name.substr(0, sep);
    auto vol_s = name.substr(sep + 1);
    UserGroup g{};
    if (stage_s == "early") g.stage = AdoptionStage::Early;
    else if (stage_s == "medium") g.stage = AdoptionStage::Medium;
    else if (stage_s == "late") g.stage = AdoptionStage::Late;
    else throw InputError("bad adoption stage '" + std::string(stage_s) + "'");
    if (vol_s == "low") g.volume = QueryVolume::Low;
    else if (vol_s == "medium") g.volume = QueryVolume::Medium;
    else if (vol_s == "high") g.volume = QueryVolume::High;
    else throw InputError("bad query volume '" + std::string(vol_s) + "'");
    return g;
}

// user_hash -> (adoption stage, query volume) cell. Exhaustive and disjoint
// over the users present in the corpus.
struct UserGroupAssignment {
    std::map<std::string, UserGroup> by_user;

    UserGroup group_of(const std::string& user_hash) const {
        auto it = by_user.find(user_hash);
        if (it == by_user.end()) throw InputError("no group for user_hash '" + user_hash + "'");
        return it->second;
    }
};

namespace detail {

// Nearest-rank percentile: the p-th percentile of n sorted values is the
// value at 1-based rank ceil(p*n/100).
template <typename T>
T nearest_rank_percentile(const std::vector<T>& sorted, unsigned p) {
    const std::size_t n = sorted.size();
    std::size_t rank = (n * p + 99) / 100;
    if (rank == 0) rank = 1;
    return sorted[rank - 1];
}

// Lower-inclusive class boundaries: ties at a boundary land in the lower class.
template <typename T>
int three_way_class(T value, T p33, T p66) {
    if (value <= p33) return 0;
    if (value <= p66) return 1;
    return 2;
}

} // namespace detail

// Adoption statistic: earliest timestamp per user. Volume statistic: query
// count divided by the active span in days (last - first), floored at 1 day.
// Each statistic is cut at its 33rd/66th percentile across users.
inline UserGroupAssignment assign_user_groups(const Corpus& corpus) {
    struct UserStats {
        std::int64_t first = 0;
        std::int64_t last = 0;
        std::size_t count = 0;
    };
    std::map<std::string, UserStats> stats;
    for (const auto& rec : corpus.records()) {
        if (!rec.user_hash) {
            throw InputError("assign_user_groups: record '" + rec.record_id + "' has no user_hash");
        }
        auto [it, inserted] = stats.try_emplace(*rec.user_hash);
        auto& s = it->second;
        if (inserted) {
            s.first = s.last = rec.timestamp;
        } else {
            s.first = std::min(s.first, rec.timestamp);
            s.last = std::max(s.last, rec.timestamp);
        }
        ++s.count;
    }
    std::vector<std::int64_t> adoption;
    std::vector<double> volume;
    adoption.reserve(stats.size());
    volume.reserve(stats.size());
    auto rate_of = [](const UserStats& s) {
        const double span_days = std::max(1.0, static_cast<double>(s.last - s.first) / 86400.0);
        return static_cast<double>(s.count) / span_days;
    };
    for (const auto& [user, s] : stats) {
        adoption.push_back(s.first);
        volume.push_back(rate_of(s));
    }
    std::sort(adoption.begin(), adoption.end());
    std::sort(volume.begin(), volume.end());
    const auto a33 = detail::nearest_rank_percentile(adoption, 33);
    const auto a66 = detail::nearest_rank_percentile(adoption, 66);
    const auto v33 = detail::nearest_rank_percentile(volume, 33);
    const auto v66 = detail::nearest_rank_percentile(volume, 66);

    UserGroupAssignment assignment;
    for (const auto& [user, s] : stats) {
        UserGroup g{};
        g.stage = static_cast<AdoptionStage>(detail::three_way_class(s.first, a33, a66));
        g.volume = static_cast<QueryVolume>(detail::three_way_class(rate_of(s), v33, v66));
        assignment.by_user.emplace(user, g);
    }
    return assignment;
}

inline std::map<UserGroup, std::vector<std::size_t>> group_members(
    const Corpus& corpus, const UserGroupAssignment& assignment) {
    std::map<UserGroup, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& rec = corpus.at(i);
        if (!rec.user_hash) {
            throw InputError("group_members: record '" + rec.record_id + "' has no user_hash");
        }
        members[assignment.group_of(*rec.user_hash)].push_back(i);
    }
    return members;
}

inline std::size_t default_min_group_size(const SplitSizes& sizes) {
    return sizes.id_size + sizes.oracle_size + sizes.eval_size;
}

// Oracle and OOD eval drawn disjointly from the OOD group; ID train from the
// ID group. Groups below min_group_size are unusable.
inline SplitBundle build_group_splits(const Corpus& corpus, const UserGroupAssignment& assignment,
                                      UserGroup id_group, UserGroup ood_group,
                                      const SplitSizes& sizes, std::size_t min_group_size,
                                      std::uint64_t seed) {
    if (id_group == ood_group) {
        throw InputError("build_group_splits: id_group and ood_group must differ");
    }
    auto members = group_members(corpus, assignment);
    for (UserGroup g : {id_group, ood_group}) {
        const auto it = members.find(g);
        const std::size_t have = it == members.end() ? 0 : it->second.size();
        if (have < min_group_size) {
            throw InputError("group '" + group_name(g) + "' has " + std::to_string(have) +
                             " records, below min_group_size " + std::to_string(min_group_size));
        }
    }
    SeededRng rng(seed);
    SplitBundle bundle;
    bundle.axis = Axis::UserGroup;
    bundle.setting_id = "ug_" + group_name(id_group) + "__" + group_name(ood_group);

    const auto& ood_idx = members.at(ood_group);
    std::vector<const PromptRecord*> ood_pool;
    ood_pool.reserve(ood_idx.size());
    for (std::size_t i : ood_idx) ood_pool.push_back(&corpus.at(i));
    bundle.ood_eval = detail::sample_pool(ood_pool, sizes.eval_size, rng,
                                          bundle.setting_id + "/ood_eval", "ood_eval");
    std::unordered_set<std::string> eval_ids;
    for (const auto& r : bundle.ood_eval.records()) eval_ids.insert(r.record_id);
    std::vector<const PromptRecord*> oracle_pool;
    for (const auto* rec : ood_pool) {
        if (!eval_ids.count(rec->record_id)) oracle_pool.push_back(rec);
    }
    bundle.oracle_train = detail::sample_pool(oracle_pool, sizes.oracle_size, rng,
                                              bundle.setting_id + "/oracle_train", "oracle_train");

    const auto& id_idx = members.at(id_group);
    std::vector<const PromptRecord*> id_pool;
    id_pool.reserve(id_idx.size());
    for (std::size_t i : id_idx) id_pool.push_back(&corpus.at(i));
    bundle.id_train = detail::sample_pool(id_pool, sizes.id_size, rng,
                                          bundle.setting_id + "/id_train", "id_train");

    bundle.params = {{"id_group", group_name(id_group)}, {"ood_group", group_name(ood_group)},
                     {"id_size", sizes.id_size}, {"oracle_size", sizes.oracle_size},
                     {"eval_size", sizes.eval_size}, {"min_group_size", min_group_size},
                     {"seed", seed}};
    return bundle;
}

// All ordered pairs of usable groups (those with >= min_group_size records).
inline std::vector<SplitBundle> enumerate_group_splits(const Corpus& corpus,
                                                       const UserGroupAssignment& assignment,
                                                       const SplitSizes& sizes,
                                                       std::size_t min_group_size,
                                                       std::uint64_t master_seed) {
    auto members = group_members(corpus, assignment);
    std::vector<UserGroup> usable;
    for (const auto& [group, idx] : members) {
        if (idx.size() >= min_group_size) usable.push_back(group);
    }
    std::vector<SplitBundle> out;
    for (UserGroup id_g : usable) {
        for (UserGroup ood_g : usable) {
            if (id_g == ood_g) continue;
            const std::string sid = "ug_" + group_name(id_g) + "__" + group_name(ood_g);
            out.push_back(build_group_splits(corpus, assignment, id_g, ood_g, sizes,
                                             min_group_size, derive_seed(master_seed, sid)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Geography axis
// ---------------------------------------------------------------------------

// One bundle per ordered (id_region, ood_region) pair. Oracle/OOD drawn
// disjointly from the OOD region.
inline std::vector<SplitBundle> build_geo_splits(const Corpus& corpus,
                                                 const std::vector<std::string>& regions,
                                                 const SplitSizes& sizes,
                                                 std::uint64_t master_seed) {
    if (regions.size() < 2) throw InputError("build_geo_splits: need at least 2 regions");
    std::map<std::string, std::vector<std::size_t>> members;
    for (const auto& region : regions) members[region];
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& rec = corpus.at(i);
        if (!rec.region) continue;
        auto it = members.find(*rec.region);
        if (it != members.end()) it->second.push_back(i);
    }
    const std::size_t need = std::max(sizes.id_size, sizes.oracle_size + sizes.eval_size);
    for (const auto& region : regions) {
        if (members.at(region).size() < need) {
            throw InputError("region '" + region + "' has " +
                             std::to_string(members.at(region).size()) +
                             " records, needs " + std::to_string(need));
        }
    }
    std::vector<SplitBundle> out;
    for (const auto& id_region : regions) {
        for (const auto& ood_region : regions) {
            if (id_region == ood_region) continue;
            const std::string sid = "geo_" + id_region + "__" + ood_region;
            SeededRng rng(derive_seed(master_seed, sid));
            SplitBundle bundle;
            bundle.axis = Axis::Geography;
            bundle.setting_id = sid;

            std::vector<const PromptRecord*> ood_pool;
            for (std::size_t i : members.at(ood_region)) ood_pool.push_back(&corpus.at(i));
            bundle.ood_eval = detail::sample_pool(ood_pool, sizes.eval_size, rng,
                                                  sid + "/ood_eval", "ood_eval");
            std::unordered_set<std::string> eval_ids;
            for (const auto& r : bundle.ood_eval.records()) eval_ids.insert(r.record_id);
            std::vector<const PromptRecord*> oracle_pool;
            for (const auto* rec : ood_pool) {
                if (!eval_ids.count(rec->record_id)) oracle_pool.push_back(rec);
            }
            bundle.oracle_train = detail::sample_pool(oracle_pool, sizes.oracle_size, rng,
                                                      sid + "/oracle_train", "oracle_train");

            std::vector<const PromptRecord*> id_pool;
            for (std::size_t i : members.at(id_region)) id_pool.push_back(&corpus.at(i));
            bundle.id_train = detail::sample_pool(id_pool, sizes.id_size, rng,
                                                  sid + "/id_train", "id_train");

            bundle.params = {{"id_region", id_region}, {"ood_region", ood_region},
                             {"id_size", sizes.id_size}, {"oracle_size", sizes.oracle_size},
                             {"eval_size", sizes.eval_size}, {"seed", master_seed}};
            out.push_back(std::move(bundle));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random baseline
// ---------------------------------------------------------------------------

// Each pair is two disjoint seeded samples of size n from the full corpus.
inline std::vector<std::pair<Corpus, Corpus>> sample_random_baseline(const Corpus& corpus,
                                                                     std::size_t n,
                                                                     std::size_t pair_count,
                                                                     std::uint64_t seed) {
    if (corpus.size() < 2 * n) {
        throw InputError("sample_random_baseline: corpus has " + std::to_string(corpus.size()) +
                         " records, needs at least " + std::to_string(2 * n));
    }
    SeededRng rng(seed);
    std::vector<std::pair<Corpus, Corpus>> pairs;
    pairs.reserve(pair_count);
    for (std::size_t p = 0; p < pair_count; ++p) {
        auto idx = rng.sample_indices(corpus.size(), 2 * n);
        char label[32];
        std::snprintf(label, sizeof(label), "rand_%03zu", p);
        Corpus a(std::string(label) + "/a");
        Corpus b(std::string(label) + "/b");
        for (std::size_t i = 0; i < n; ++i) a.push_back(corpus.at(idx[i]));
        for (std::size_t i = n; i < 2 * n; ++i) b.push_back(corpus.at(idx[i]));
        pairs.emplace_back(std::move(a), std::move(b));
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Split manifests
// ---------------------------------------------------------------------------

inline json bundle_to_manifest_entry(const SplitBundle& bundle) {
    json entry;
    entry["setting_id"] = bundle.setting_id;
    entry["axis"] = axis_name(bundle.axis);
    entry["params"] = bundle.params;
    if (bundle.lag) entry["lag"] = *bundle.lag;
    auto ids = [](const Corpus& c) {
        std::vector<std::string> v;
        v.reserve(c.size());
        for (const auto& r : c.records()) v.push_back(r.record_id);
        return v;
    };
    entry["id_train"] = ids(bundle.id_train);
    entry["ood_eval"] = ids(bundle.ood_eval);
    entry["oracle_train"] = ids(bundle.oracle_train);
    return entry;
}

inline json write_manifest(const std::vector<SplitBundle>& bundles) {
    json manifest;
    manifest["format"] = "driftlens-split-manifest";
    manifest["version"] = 1;
    manifest["settings"] = json::array();
    for (const auto& b : bundles) manifest["settings"].push_back(bundle_to_manifest_entry(b));
    return manifest;
}

// Rebuild bundles against the source corpus, resolving record ids.
inline std::vector<SplitBundle> read_manifest(const json& manifest, const Corpus& corpus) {
    if (!manifest.is_object() || manifest.value("format", "") != "driftlens-split-manifest") {
        throw InputError("not a driftlens split manifest");
    }
    std::vector<SplitBundle> bundles;
    for (const auto& entry : manifest.at("settings")) {
        SplitBundle b;
        b.setting_id = entry.at("setting_id").get<std::string>();
        b.axis = axis_from_name(entry.at("axis").get<std::string>());
        b.params = entry.value("params", json::object());
        if (entry.contains("lag")) b.lag = entry["lag"].get<int>();
        auto load_part = [&](const char* key) {
            Corpus part(b.setting_id + "/" + key);
            for (const auto& id : entry.at(key)) {
                part.push_back(corpus.at(corpus.index_of(id.get<std::string>())));
            }
            return part;
        };
        b.id_train = load_part("id_train");
        b.ood_eval = load_part("ood_eval");
        b.oracle_train = load_part("oracle_train");
        check_disjoint(b);
        bundles.push_back(std::move(b));
    }
    return bundles;
}

} // namespace driftlens
