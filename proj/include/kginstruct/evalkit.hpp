#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kginstruct/chat_client.hpp"
#include "kginstruct/taskgen.hpp"

namespace kgi {

// ---------------------------------------------------------------------------
// Prediction parsing

// A model output split into its grammar segments. parsed fields are set iff
// the corresponding tag pair was found well-formed.
struct PredictionRecord {
    std::string raw_text;
    std::optional<std::string> think;
    std::optional<std::string> answer;
    bool lenient = false;  // answer recovered from a bare final line
};

enum class ParseMode { strict, lenient };

// Extracts the first <think>…</think> and first <answer>…</answer> spans,
// whitespace-trimmed. Lenient mode falls back to the last nonempty line when
// no answer tag exists, marking the record lenient. Strict mode throws
// Unparseable when the answer tag is missing.
PredictionRecord parse_prediction(const std::string& raw, ParseMode mode = ParseMode::strict);

// ---------------------------------------------------------------------------
// Exact match

// Compares an answer payload against the gold payload under the task's
// canonicalization: counting tasks compare first decimal integers, ER/RR
// compare option letters ("D", "d", "D.", "(D)" all mean D), ED compares
// labels case-insensitively with whitespace collapsed. SD has no exact-match
// criterion and is rejected with std::invalid_argument. A counting answer
// containing no integer scores false; *non_numeric reports it when given.
bool exact_match(const std::string& pred, const std::string& gold, TaskId task,
                 bool* non_numeric = nullptr);

// ---------------------------------------------------------------------------
// LLM-as-judge

enum class JudgeKind { cot, description };

struct JudgeResult {
    int score = 0;         // 0..100
    bool lenient = false;  // integer had to be dug out of surrounding prose
};

// Builds the fixed judge prompt for `kind` (reference first, candidate
// second), sends one chat request, and parses the reply as an integer in
// [0,100] — direct parse first, then first-integer extraction flagged
// lenient. Backend failures surface as JudgeUnavailable; replies without a
// usable in-range integer as ScoreParseFailure.
JudgeResult judge_score(const std::string& pred_text, const std::string& gold_text, JudgeKind kind,
                        ChatClient& client);

// ---------------------------------------------------------------------------
// Aggregation

// Per-record scoring input for aggregate(): exact-match verdict for the
// seven objective tasks, optional judge score for any task.
struct RecordScore {
    TaskId task = TaskId::EC;
    bool exact = false;
    bool non_numeric = false;
    std::optional<int> judge;
    bool judge_failed = false;  // reply unusable; excluded from the mean
};

struct TaskReport {
    size_t total = 0;
    size_t correct = 0;
    size_t non_numeric = 0;
    std::optional<double> acc;         // percent; absent for SD or empty tasks
    std::optional<double> judge_mean;  // mean of judged scores, 0-100
    size_t judged = 0;
    size_t judge_excluded = 0;
};

struct EvalReport {
    std::array<TaskReport, 8> tasks;  // indexed by task number - 1
    double avg = 0.0;
    bool avg_partial = false;  // some of the eight summary terms were absent
    std::string judge_model;
};

// Mean of the eight summary terms in task order (seven accuracies plus the
// description score), skipping absent terms. All absent → 0 and partial.
double summary_average(const std::array<std::optional<double>, 8>& terms, bool* partial = nullptr);

// Folds per-record scores into the report. Tasks with zero records stay
// absent and surface through avg_partial.
EvalReport aggregate(const std::vector<RecordScore>& records, const std::string& judge_model = "");

// Serialized report: a JSON document and a fixed-width table for terminals.
std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

// ---------------------------------------------------------------------------
// Preference pairs

// One dataset line as the scoring side consumes it.
struct GoldSample {
    std::string id;
    TaskId task = TaskId::EC;
    std::string image;
    std::string question;
    std::string answer;
};

// One model output line.
struct RawPrediction {
    std::string id;
    std::string output;
};

struct PreferencePair {
    std::string image;
    std::string question;
    std::string chosen;    // gold answer text
    std::string rejected;  // raw model output
};

// One pair per failed prediction: unparseable output, or exact mismatch on
// the objective tasks. Description records carry no correctness signal and
// are skipped unless include_descriptions. Predictions lacking a gold line
// raise ParseError; identical chosen/rejected texts are never emitted.
std::vector<PreferencePair> build_preference_pairs(const std::vector<GoldSample>& golds,
                                                   const std::vector<RawPrediction>& predictions,
                                                   bool include_descriptions = false);

// ---------------------------------------------------------------------------
// DPO reference loss

// −log σ(β·[(logp_pol_pref − logp_ref_pref) − (logp_pol_unpref − logp_ref_unpref)])
// computed through a numerically stable softplus; β = 0 gives ln 2 exactly.
// Non-finite inputs or negative β raise std::invalid_argument.
double dpo_loss(double logp_pol_pref, double logp_ref_pref, double logp_pol_unpref,
                double logp_ref_unpref, double beta);

// ---------------------------------------------------------------------------
// File formats

// Predictions: JSONL, keys `id` and `output`. Errors carry line numbers.
std::vector<RawPrediction> load_predictions(const std::filesystem::path& file);

// Dataset split: JSONL as written by the synthesis pipeline.
std::vector<GoldSample> load_gold_samples(const std::filesystem::path& file);

// Preference pairs: JSONL, keys `image`, `question`, `chosen`, `rejected`.
void write_preference_pairs(const std::filesystem::path& file,
                            const std::vector<PreferencePair>& pairs);

}  // namespace kgi
