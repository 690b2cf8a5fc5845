#include "kginstruct/evalkit.hpp"

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "kginstruct/errors.hpp"
#include "kginstruct/templates.hpp"

namespace kgi {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// First well-formed <tag>…</tag> span, trimmed; nullopt when absent.
std::optional<std::string> tag_span(const std::string& text, std::string_view open,
                                    std::string_view close) {
    size_t o = text.find(open);
    if (o == std::string::npos) return std::nullopt;
    size_t body = o + open.size();
    size_t c = text.find(close, body);
    if (c == std::string::npos) return std::nullopt;
    return trim(std::string_view(text).substr(body, c - body));
}

std::optional<std::string> last_nonempty_line(const std::string& text) {
    size_t end = text.size();
    while (end > 0) {
        size_t begin = text.rfind('\n', end - 1);
        size_t line_start = begin == std::string::npos ? 0 : begin + 1;
        std::string line = trim(std::string_view(text).substr(line_start, end - line_start));
        if (!line.empty()) return line;
        if (begin == std::string::npos) break;
        end = begin;
    }
    return std::nullopt;
}

// First run of decimal digits, parsed; nullopt when the text has none.
std::optional<long long> first_integer(const std::string& s) {
    size_t i = 0;
    while (i < s.size() && !std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == s.size()) return std::nullopt;
    size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    long long value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + j, value);
    if (ec != std::errc()) return std::nullopt;  // overflow: treat as no usable integer
    (void)ptr;
    return value;
}

// "D", "d", "D.", "(D)", "D. Bony Fish" → 'D'. Anything that does not start
// with a lone letter in one of those shapes is rejected.
std::optional<char> option_letter(const std::string& s) {
    std::string t = trim(s);
    if (!t.empty() && t.front() == '(') t.erase(t.begin());
    if (t.empty() || !std::isalpha(static_cast<unsigned char>(t.front()))) return std::nullopt;
    char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(t.front())));
    if (t.size() == 1) return letter;
    char next = t[1];
    if (next == '.' || next == ')' || next == ':' || next == ',' ||
        std::isspace(static_cast<unsigned char>(next)))
        return letter;
    return std::nullopt;  // "Delta" must not read as option D
}

// Lowercase with internal whitespace runs collapsed to single spaces.
std::string normalize_label(const std::string& s) {
    std::string out;
    bool pending_space = false;
    for (char c : trim(s)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

}  // namespace

PredictionRecord parse_prediction(const std::string& raw, ParseMode mode) {
    PredictionRecord rec;
    rec.raw_text = raw;
    rec.think = tag_span(raw, "<think>", "</think>");
    rec.answer = tag_span(raw, "<answer>", "</answer>");
    if (!rec.answer) {
        if (mode == ParseMode::strict)
            throw Error(Err::Unparseable, "no <answer> tag in model output");
        rec.answer = last_nonempty_line(raw);
        rec.lenient = rec.answer.has_value();
    }
    return rec;
}

bool exact_match(const std::string& pred, const std::string& gold, TaskId task, bool* non_numeric) {
    if (non_numeric) *non_numeric = false;
    switch (task) {
        case TaskId::EC:
        case TaskId::RC:
        case TaskId::IC:
        case TaskId::TC: {
            auto p = first_integer(pred);
            auto g = first_integer(gold);
            if (!p && non_numeric) *non_numeric = true;
            return p && g && *p == *g;
        }
        case TaskId::ER:
        case TaskId::RR: {
            auto p = option_letter(pred);
            auto g = option_letter(gold);
            return p && g && *p == *g;
        }
        case TaskId::ED:
            return normalize_label(pred) == normalize_label(gold);
        case TaskId::SD:
            throw std::invalid_argument("description task has no exact-match criterion");
    }
    throw std::invalid_argument("unknown task");
}

JudgeResult judge_score(const std::string& pred_text, const std::string& gold_text, JudgeKind kind,
                        ChatClient& client) {
    const char* tmpl = kind == JudgeKind::description ? templates::judge_description_prompt()
                                                      : templates::judge_cot_prompt();
    std::string prompt = templates::fill_slots(tmpl, gold_text, pred_text);

    std::string reply;
    try {
        reply = client.complete("", prompt);
    } catch (const Error& e) {
        if (e.code() == Err::BackendUnavailable || e.code() == Err::EmptyBackendResponse)
            throw Error(Err::JudgeUnavailable, e.what());
        throw;
    }

    JudgeResult result;
    std::string t = trim(reply);
    long long direct = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), direct);
    if (ec == std::errc() && ptr == t.data() + t.size()) {
        result.score = static_cast<int>(direct);
    } else {
        auto dug = first_integer(t);
        if (!dug) throw Error(Err::ScoreParseFailure, "judge reply has no integer: " + t);
        result.score = static_cast<int>(*dug);
        result.lenient = true;
    }
    if (result.score < 0 || result.score > 100)
        throw Error(Err::ScoreParseFailure,
                    "judge score out of range: " + std::to_string(result.score));
    return result;
}

double summary_average(const std::array<std::optional<double>, 8>& terms, bool* partial) {
    double sum = 0.0;
    size_t present = 0;
    for (const auto& t : terms)
        if (t) {
            sum += *t;
            ++present;
        }
    if (partial) *partial = present < terms.size();
    return present == 0 ? 0.0 : sum / static_cast<double>(present);
}

EvalReport aggregate(const std::vector<RecordScore>& records, const std::string& judge_model) {
    EvalReport report;
    report.judge_model = judge_model;

    std::array<double, 8> judge_sums{};
    for (const auto& r : records) {
        auto& task = report.tasks[static_cast<size_t>(r.task) - 1];
        ++task.total;
        if (r.task != TaskId::SD && r.exact) ++task.correct;
        if (r.non_numeric) ++task.non_numeric;
        if (r.judge) {
            ++task.judged;
            judge_sums[static_cast<size_t>(r.task) - 1] += *r.judge;
        }
        if (r.judge_failed) ++task.judge_excluded;
    }

    std::array<std::optional<double>, 8> terms;
    for (size_t i = 0; i < 8; ++i) {
        auto& task = report.tasks[i];
        TaskId id = static_cast<TaskId>(i + 1);
        if (id != TaskId::SD && task.total > 0)
            task.acc = 100.0 * static_cast<double>(task.correct) / static_cast<double>(task.total);
        if (task.judged > 0) task.judge_mean = judge_sums[i] / static_cast<double>(task.judged);
        terms[i] = id == TaskId::SD ? task.judge_mean : task.acc;
    }
    report.avg = summary_average(terms, &report.avg_partial);
    return report;
}

std::string report_json(const EvalReport& report) {
    ordered_json doc;
    doc["tasks"] = ordered_json::object();
    for (size_t i = 0; i < 8; ++i) {
        const auto& t = report.tasks[i];
        ordered_json entry;
        entry["total"] = t.total;
        entry["correct"] = t.correct;
        entry["non_numeric"] = t.non_numeric;
        entry["acc"] = t.acc ? ordered_json(*t.acc) : ordered_json(nullptr);
        entry["judge_mean"] = t.judge_mean ? ordered_json(*t.judge_mean) : ordered_json(nullptr);
        entry["judged"] = t.judged;
        entry["judge_excluded"] = t.judge_excluded;
        doc["tasks"][task_short_name(static_cast<TaskId>(i + 1))] = entry;
    }
    doc["avg"] = report.avg;
    doc["avg_partial"] = report.avg_partial;
    doc["judge_model"] = report.judge_model;
    return doc.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
    std::ostringstream out;
    out << "task  total  correct      acc    judge  excluded\n";
    auto cell = [&](std::optional<double> v) {
        std::ostringstream c;
        if (v)
            c << std::fixed << std::setprecision(2) << *v;
        else
            c << "-";
        return c.str();
    };
    for (size_t i = 0; i < 8; ++i) {
        const auto& t = report.tasks[i];
        out << std::left << std::setw(6) << task_short_name(static_cast<TaskId>(i + 1))
            << std::right << std::setw(5) << t.total << std::setw(9) << t.correct << std::setw(9)
            << cell(t.acc) << std::setw(9) << cell(t.judge_mean) << std::setw(10)
            << t.judge_excluded << "\n";
    }
    out << "avg   " << std::fixed << std::setprecision(2) << report.avg
        << (report.avg_partial ? "  (partial: some tasks absent)" : "") << "\n";
    return out.str();
}

std::vector<PreferencePair> build_preference_pairs(const std::vector<GoldSample>& golds,
                                                   const std::vector<RawPrediction>& predictions,
                                                   bool include_descriptions) {
    std::unordered_map<std::string, const GoldSample*> by_id;
    by_id.reserve(golds.size());
    for (const auto& g : golds) by_id[g.id] = &g;

    std::vector<PreferencePair> pairs;
    for (const auto& pred : predictions) {
        auto it = by_id.find(pred.id);
        if (it == by_id.end())
            throw Error(Err::ParseError, "prediction references unknown sample id: " + pred.id);
        const GoldSample& gold = *it->second;

        bool failed = false;
        if (gold.task == TaskId::SD) {
            if (!include_descriptions) continue;
            // Best offline proxy for description failure: output that does not
            // even follow the answer grammar. Judge-thresholded selection is a
            // caller-side policy.
            try {
                parse_prediction(pred.output, ParseMode::strict);
            } catch (const Error&) {
                failed = true;
            }
        } else {
            // A gold answer that fails the grammar is a corrupt dataset, not a
            // model failure — let it propagate.
            auto gold_parsed = parse_prediction(gold.answer, ParseMode::strict);
            try {
                auto parsed = parse_prediction(pred.output, ParseMode::strict);
                failed = !exact_match(*parsed.answer, *gold_parsed.answer, gold.task);
            } catch (const Error& e) {
                if (e.code() != Err::Unparseable) throw;
                failed = true;
            }
        }
        if (!failed || pred.output == gold.answer) continue;
        pairs.push_back({gold.image, gold.question, gold.answer, pred.output});
    }
    return pairs;
}

double dpo_loss(double logp_pol_pref, double logp_ref_pref, double logp_pol_unpref,
                double logp_ref_unpref, double beta) {
    if (!std::isfinite(logp_pol_pref) || !std::isfinite(logp_ref_pref) ||
        !std::isfinite(logp_pol_unpref) || !std::isfinite(logp_ref_unpref) ||
        !std::isfinite(beta))
        throw std::invalid_argument("dpo_loss requires finite inputs");
    if (beta < 0) throw std::invalid_argument("dpo_loss requires beta >= 0");

    double margin = (logp_pol_pref - logp_ref_pref) - (logp_pol_unpref - logp_ref_unpref);
    double x = beta * margin;
    // −log σ(x) = softplus(−x), split to avoid overflow on either tail.
    if (x > 0) return std::log1p(std::exp(-x));
    return -x + std::log1p(std::exp(x));
}

namespace {

json parse_jsonl_line(const std::string& line, long lineno, const std::filesystem::path& file) {
    json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object())
        throw Error(Err::ParseError, file.string() + ": not a JSON object", lineno);
    return doc;
}

std::string string_field(const json& doc, const char* key, long lineno,
                         const std::filesystem::path& file) {
    if (!doc.contains(key))
        throw Error(Err::ParseError, file.string() + ": missing key '" + key + "'", lineno);
    const json& v = doc[key];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw Error(Err::ParseError, file.string() + ": key '" + key + "' is not a string", lineno);
}

std::ifstream open_input(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(Err::MissingFile, file.string());
    return in;
}

}  // namespace

std::vector<RawPrediction> load_predictions(const std::filesystem::path& file) {
    auto in = open_input(file);
    std::vector<RawPrediction> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json doc = parse_jsonl_line(line, lineno, file);
        out.push_back({string_field(doc, "id", lineno, file),
                       string_field(doc, "output", lineno, file)});
    }
    return out;
}

std::vector<GoldSample> load_gold_samples(const std::filesystem::path& file) {
    auto in = open_input(file);
    std::vector<GoldSample> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json doc = parse_jsonl_line(line, lineno, file);
        GoldSample g;
        g.id = string_field(doc, "id", lineno, file);
        auto task = task_from_string(string_field(doc, "task", lineno, file));
        if (!task) throw Error(Err::ParseError, file.string() + ": unknown task", lineno);
        g.task = *task;
        g.image = string_field(doc, "image", lineno, file);
        g.question = string_field(doc, "question", lineno, file);
        g.answer = string_field(doc, "answer", lineno, file);
        out.push_back(std::move(g));
    }
    return out;
}

void write_preference_pairs(const std::filesystem::path& file,
                            const std::vector<PreferencePair>& pairs) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Err::MissingFile, "cannot write " + file.string());
    for (const auto& p : pairs) {
        ordered_json doc;
        doc["image"] = p.image;
        doc["question"] = p.question;
        doc["chosen"] = p.chosen;
        doc["rejected"] = p.rejected;
        out << doc.dump() << "\n";
    }
}

}  // namespace kgi
