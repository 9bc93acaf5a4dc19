#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "driftlens/error.hpp"
#include "driftlens/rng.hpp"

namespace driftlens {

using json = nlohmann::ordered_json;

// Which model's response sits in the Assistant A slot.
enum class ASlot { IdModel, OracleModel };

struct ResponsePair {
    std::string question;
    std::string answer_a;
    std::string answer_b;
    ASlot a_is = ASlot::IdModel;
    std::string pair_id;
};

enum class VerdictOutcome { A, B, Tie, Invalid };

struct Verdict {
    VerdictOutcome outcome = VerdictOutcome::Invalid;
    std::string raw;  // judge output retained verbatim
};

// The judge prompt, with {question}, {answer_a}, {answer_b} placeholders.
// The wording and section markers are load-bearing: downstream parsing keys
// on the [[A]]/[[B]]/[[C]] format this text demands, so the template must not
// be edited casually.
inline constexpr std::string_view kJudgePromptTemplate =
    "Please act as an impartial judge and evaluate the quality of the responses provided by "
    "two AI assistants to the user question displayed below. You should choose the assistant "
    "that follows the user's instructions and answers the user's question better. Your "
    "evaluation should consider factors such as the helpfulness, relevance, accuracy, depth, "
    "creativity, and level of detail of their responses. Begin your evaluation by comparing "
    "the two responses and provide a short explanation. Avoid any position biases and ensure "
    "that the order in which the responses were presented does not influence your decision. "
    "Do not allow the length of the responses to influence your evaluation. Do not favor "
    "certain names of the assistants. Be as objective as possible. After providing your "
    "explanation, output your final verdict by strictly following this format: \"[[A]]\" if "
    "assistant A is better, \"[[B]]\" if assistant B is better, and \"[[C]]\" for a tie.\n"
    "\n"
    "[User Question]\n"
    "\n"
    "{question}\n"
    "\n"
    "\n"
    "[The Start of Assistant A's Answer]\n"
    "\n"
    "{answer_a}\n"
    "\n"
    "[The End of Assistant A's Answer]\n"
    "\n"
    "\n"
    "[The Start of Assistant B's Answer]\n"
    "\n"
    "{answer_b}\n"
    "\n"
    "[The End of Assistant B's Answer]";

inline std::string build_judge_prompt(const ResponsePair& pair) {
    if (pair.question.empty() || pair.answer_a.empty() || pair.answer_b.empty()) {
        throw InputError("build_judge_prompt: pair '" + pair.pair_id +
                         "' has an empty question or answer");
    }
    std::string out(kJudgePromptTemplate);
    auto substitute = [&out](std::string_view placeholder, const std::string& value) {
        auto pos = out.find(placeholder);
        out.replace(pos, placeholder.size(), value);
    };
    substitute("{question}", pair.question);
    substitute("{answer_a}", pair.answer_a);
    substitute("{answer_b}", pair.answer_b);
    return out;
}

// Total over all strings: the last [[A]]/[[B]]/[[C]] marker wins, and no
// marker at all maps to Invalid.
inline Verdict parse_verdict(const std::string& judge_output) {
    Verdict v;
    v.raw = judge_output;
    struct Marker {
        const char* text;
        VerdictOutcome outcome;
    };
    static constexpr Marker markers[] = {{"[[A]]", VerdictOutcome::A},
                                         {"[[B]]", VerdictOutcome::B},
                                         {"[[C]]", VerdictOutcome::Tie}};
    std::size_t best_pos = std::string::npos;
    for (const auto& m : markers) {
        std::size_t pos = judge_output.rfind(m.text);
        if (pos != std::string::npos && (best_pos == std::string::npos || pos > best_pos)) {
            best_pos = pos;
            v.outcome = m.outcome;
        }
    }
    if (best_pos == std::string::npos) v.outcome = VerdictOutcome::Invalid;
    return v;
}

enum class DebiasMode { BothOrders, RandomOrder };

inline ResponsePair swapped(const ResponsePair& pair) {
    ResponsePair out = pair;
    std::swap(out.answer_a, out.answer_b);
    out.a_is = pair.a_is == ASlot::IdModel ? ASlot::OracleModel : ASlot::IdModel;
    return out;
}

// BothOrders judges every pair twice with the A/B slots swapped; RandomOrder
// judges once in a seeded random orientation. The prompt instructs the judge
// to ignore presentation order, but that cannot be assumed; the default
// harness policy is BothOrders.
inline std::vector<ResponsePair> debias_schedule(const std::vector<ResponsePair>& pairs,
                                                 DebiasMode mode, std::uint64_t seed) {
    std::vector<ResponsePair> schedule;
    if (mode == DebiasMode::BothOrders) {
        schedule.reserve(pairs.size() * 2);
        for (const auto& p : pairs) {
            schedule.push_back(p);
            schedule.push_back(swapped(p));
        }
    } else {
        SeededRng rng(seed);
        schedule.reserve(pairs.size());
        for (const auto& p : pairs) {
            schedule.push_back(rng.bounded(2) == 0 ? p : swapped(p));
        }
    }
    return schedule;
}

enum class PairOutcome { IdWin, OracleWin, Tie, Invalid };

inline const char* pair_outcome_name(PairOutcome o) {
    switch (o) {
        case PairOutcome::IdWin: return "id_win";
        case PairOutcome::OracleWin: return "oracle_win";
        case PairOutcome::Tie: return "tie";
        case PairOutcome::Invalid: return "invalid";
    }
    throw std::logic_error("pair_outcome_name: bad outcome");
}

struct ArenaResult {
    double id_loss_rate = std::numeric_limits<double>::quiet_NaN();
    double id_win_rate = std::numeric_limits<double>::quiet_NaN();
    double tie_rate = std::numeric_limits<double>::quiet_NaN();
    std::size_t valid_count = 0;
    std::size_t invalid_count = 0;
    std::vector<std::pair<std::string, PairOutcome>> per_pair;  // ordered by pair_id
};

namespace detail {

inline PairOutcome map_verdict(const ResponsePair& pair, const Verdict& v) {
    switch (v.outcome) {
        case VerdictOutcome::Invalid: return PairOutcome::Invalid;
        case VerdictOutcome::Tie: return PairOutcome::Tie;
        case VerdictOutcome::A:
            return pair.a_is == ASlot::IdModel ? PairOutcome::IdWin : PairOutcome::OracleWin;
        case VerdictOutcome::B:
            return pair.a_is == ASlot::IdModel ? PairOutcome::OracleWin : PairOutcome::IdWin;
    }
    throw std::logic_error("map_verdict: bad verdict");
}

} // namespace detail

// Deterministic fold over judgments grouped by pair_id. Under BothOrders a
// pair's two verdicts must agree after slot mapping; any disagreement
// (including a single Tie) counts as a Tie, and any Invalid voids the pair.
// Rates are normalized over valid pairs only; with zero valid pairs the
// rates stay NaN rather than reading as 0.
inline ArenaResult aggregate(const std::vector<std::pair<ResponsePair, Verdict>>& judged,
                             DebiasMode mode) {
    std::map<std::string, std::vector<PairOutcome>> by_pair;
    std::map<std::string, int> orientations;  // bitmask: 1 = id-in-A seen, 2 = oracle-in-A seen
    for (const auto& [pair, verdict] : judged) {
        by_pair[pair.pair_id].push_back(detail::map_verdict(pair, verdict));
        orientations[pair.pair_id] |= pair.a_is == ASlot::IdModel ? 1 : 2;
    }
    ArenaResult result;
    std::size_t id_wins = 0, oracle_wins = 0, ties = 0;
    for (const auto& [pair_id, outcomes] : by_pair) {
        PairOutcome outcome;
        if (mode == DebiasMode::BothOrders) {
            if (outcomes.size() != 2 || orientations[pair_id] != 3) {
                throw InputError("aggregate: pair '" + pair_id +
                                 "' lacks a matched swapped duo under both_orders");
            }
            if (outcomes[0] == PairOutcome::Invalid || outcomes[1] == PairOutcome::Invalid) {
                outcome = PairOutcome::Invalid;
            } else if (outcomes[0] == outcomes[1]) {
                outcome = outcomes[0];
            } else {
                outcome = PairOutcome::Tie;
            }
        } else {
            if (outcomes.size() != 1) {
                throw InputError("aggregate: pair '" + pair_id + "' judged more than once");
            }
            outcome = outcomes[0];
        }
        result.per_pair.emplace_back(pair_id, outcome);
        switch (outcome) {
            case PairOutcome::IdWin: ++id_wins; break;
            case PairOutcome::OracleWin: ++oracle_wins; break;
            case PairOutcome::Tie: ++ties; break;
            case PairOutcome::Invalid: ++result.invalid_count; break;
        }
    }
    result.valid_count = id_wins + oracle_wins + ties;
    if (result.valid_count > 0) {
        const double valid = static_cast<double>(result.valid_count);
        result.id_loss_rate = static_cast<double>(oracle_wins) / valid;
        result.id_win_rate = static_cast<double>(id_wins) / valid;
        result.tie_rate = static_cast<double>(ties) / valid;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Judge clients
// ---------------------------------------------------------------------------

// Wire-level abstraction over the judge service; the harness never embeds a
// model vendor. `key` identifies the scheduled judgment (pair_id, with a
// "#swap" suffix for the second orientation under both_orders) and is used
// for stub replay and error context.
class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual std::string submit(const std::string& key, const std::string& prompt) = 0;
};

// Offline replay of canned judge outputs, keyed by scheduled-judgment key.
class StubJudgeClient : public JudgeClient {
public:
    explicit StubJudgeClient(std::map<std::string, std::string> outputs)
        : outputs_(std::move(outputs)) {}

    static StubJudgeClient from_json(const json& obj) {
        if (!obj.is_object()) throw InputError("judge stub file must be a JSON object");
        std::map<std::string, std::string> outputs;
        for (const auto& [key, value] : obj.items()) outputs[key] = value.get<std::string>();
        return StubJudgeClient(std::move(outputs));
    }

    std::string submit(const std::string& key, const std::string&) override {
        auto it = outputs_.find(key);
        if (it == outputs_.end()) {
            throw InputError("judge stub has no canned output for '" + key + "'");
        }
        return it->second;
    }

private:
    std::map<std::string, std::string> outputs_;
};

// POSTs {"prompt": ...} with bearer auth and expects {"output": ...} back.
// Transport failures (connection errors, non-2xx) are retried with
// exponential backoff up to max_attempts; malformed bodies are not retried.
//
// The HTTP round-trip is injected so the client logic stays testable without
// a socket; production wiring lives in the CLI.
class HttpJudgeClient : public JudgeClient {
public:
    using Transport = std::function<std::pair<int, std::string>(const std::string& body)>;

    HttpJudgeClient(Transport transport, std::size_t max_attempts = 3,
                    std::chrono::milliseconds initial_backoff = std::chrono::milliseconds(500))
        : transport_(std::move(transport)),
          max_attempts_(max_attempts),
          initial_backoff_(initial_backoff) {}

    std::string submit(const std::string& key, const std::string& prompt) override {
        json body;
        body["prompt"] = prompt;
        const std::string payload = body.dump();
        std::chrono::milliseconds backoff = initial_backoff_;
        std::string last_error;
        for (std::size_t attempt = 1; attempt <= max_attempts_; ++attempt) {
            int status = 0;
            std::string response;
            try {
                std::tie(status, response) = transport_(payload);
            } catch (const std::exception& e) {
                status = 0;
                last_error = e.what();
            }
            if (status >= 200 && status < 300) {
                json parsed;
                try {
                    parsed = json::parse(response);
                } catch (const json::parse_error&) {
                    throw InputError("judge returned non-JSON response for '" + key + "'");
                }
                if (!parsed.is_object() || !parsed.contains("output") ||
                    !parsed["output"].is_string()) {
                    throw InputError("judge response missing 'output' field for '" + key + "'");
                }
                return parsed["output"].get<std::string>();
            }
            if (status != 0) last_error = "HTTP status " + std::to_string(status);
            if (attempt < max_attempts_) {
                if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
        }
        throw InputError("judge transport failed for '" + key + "' after " +
                         std::to_string(max_attempts_) + " attempts: " + last_error);
    }

private:
    Transport transport_;
    std::size_t max_attempts_;
    std::chrono::milliseconds initial_backoff_;
};

// Submit every scheduled judgment and parse the verdicts. The second
// occurrence of a pair_id in the schedule gets the "#swap" key suffix.
inline std::vector<std::pair<ResponsePair, Verdict>> run_arena(
    const std::vector<ResponsePair>& schedule, JudgeClient& client) {
    std::vector<std::pair<ResponsePair, Verdict>> judged;
    judged.reserve(schedule.size());
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& pair : schedule) {
        std::string key = pair.pair_id;
        if (seen[pair.pair_id]++ > 0) key += "#swap";
        const std::string output = client.submit(key, build_judge_prompt(pair));
        judged.emplace_back(pair, parse_verdict(output));
    }
    return judged;
}

// ---------------------------------------------------------------------------
// Arena file formats
// ---------------------------------------------------------------------------

struct ArenaInput {
    std::string pair_id;
    std::string question;
    std::string id_answer;
    std::string oracle_answer;
};

inline std::vector<ArenaInput> load_arena_inputs(std::istream& in) {
    std::vector<ArenaInput> inputs;
    std::string line;
    std::size_t line_no = 0;
    std::unordered_map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError("arena line " + std::to_string(line_no) + ": " + e.what());
        }
        ArenaInput input;
        for (const char* key : {"pair_id", "question", "id_answer", "oracle_answer"}) {
            if (!obj.contains(key) || !obj[key].is_string() || obj[key].get<std::string>().empty()) {
                throw InputError("arena line " + std::to_string(line_no) +
                                 ": missing or empty field '" + key + "'");
            }
        }
        input.pair_id = obj["pair_id"].get<std::string>();
        input.question = obj["question"].get<std::string>();
        input.id_answer = obj["id_answer"].get<std::string>();
        input.oracle_answer = obj["oracle_answer"].get<std::string>();
        auto it = seen.find(input.pair_id);
        if (it != seen.end()) {
            throw InputError("arena: duplicate pair_id '" + input.pair_id + "' on lines " +
                             std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        seen.emplace(input.pair_id, line_no);
        inputs.push_back(std::move(input));
    }
    return inputs;
}

// ID answer in the A slot; debias_schedule decides the judged orientation(s).
inline std::vector<ResponsePair> to_response_pairs(const std::vector<ArenaInput>& inputs) {
    std::vector<ResponsePair> pairs;
    pairs.reserve(inputs.size());
    for (const auto& input : inputs) {
        pairs.push_back({input.question, input.id_answer, input.oracle_answer, ASlot::IdModel,
                         input.pair_id});
    }
    return pairs;
}

inline json arena_result_to_json(const ArenaResult& result, DebiasMode mode) {
    json out;
    out["format"] = "driftlens-arena-result";
    out["version"] = 1;
    out["mode"] = mode == DebiasMode::BothOrders ? "both_orders" : "random_order";
    if (result.valid_count > 0) {
        out["id_loss_rate"] = result.id_loss_rate;
        out["id_win_rate"] = result.id_win_rate;
        out["tie_rate"] = result.tie_rate;
    } else {
        out["id_loss_rate"] = nullptr;
        out["id_win_rate"] = nullptr;
        out["tie_rate"] = nullptr;
    }
    out["valid_count"] = result.valid_count;
    out["invalid_count"] = result.invalid_count;
    json pairs = json::array();
    for (const auto& [pair_id, outcome] : result.per_pair) {
        pairs.push_back({{"pair_id", pair_id}, {"outcome", pair_outcome_name(outcome)}});
    }
    out["pairs"] = std::move(pairs);
    return out;
}

} // namespace driftlens
