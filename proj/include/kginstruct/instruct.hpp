#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kginstruct/chat_client.hpp"
#include "kginstruct/render.hpp"
#include "kginstruct/sampler.hpp"
#include "kginstruct/taskgen.hpp"

namespace kgi {

enum class Split { train, valid, test };
const char* split_name(Split split);  // "train" / "valid" / "test"

// How think sections and descriptions get written: fully templated (offline,
// deterministic) or delegated to a chat-completion backend.
struct CotBackend {
    enum class Mode { templated, llm };
    Mode mode = Mode::templated;
    ChatEndpoint endpoint;  // used only in llm mode

    const char* source_name() const { return mode == Mode::llm ? "llm" : "templated"; }
};

// One dataset line. `image` is relative to the dataset root; `id` is the
// image stem ("ec_17").
struct InstructionSample {
    std::string id;
    TaskId task = TaskId::EC;
    std::string image;
    std::string question;
    std::string answer;
    std::string cot_source;
    uint64_t seed = 0;
    Split split = Split::train;
};

// Verbatim question template for the instance's task; for ER/RR the trailing
// slot is filled with the lettered option block.
std::string build_question(const TaskInstance& inst);

// Gold answer text. Counting tasks are fully programmatic from the processed
// subgraph (element list, then the closing count line, then the answer tag).
// Reasoning tasks wrap a think section — deterministic in templated mode,
// backend-written in llm mode — around the gold element. The description task
// returns free text seeded with the gold fact list. llm mode requires
// `client`; templated mode never touches it and never fails.
std::string build_gold_answer(const TaskInstance& inst, const CotBackend& backend,
                              ChatClient* client = nullptr);

// Glues the parts into a sample after checking the answer grammar and that
// the answer payload agrees with the instance gold (GrammarViolation
// otherwise). The description task is exempt from both checks.
InstructionSample assemble(const TaskInstance& inst, const std::string& image_rel,
                           std::string question, std::string answer, std::string cot_source,
                           std::string id);

// ---------------------------------------------------------------------------
// Splitting

struct SplitCounts {
    size_t train = 0;
    size_t valid = 0;
    size_t test = 0;

    size_t total() const { return train + valid + test; }
};

// Floor-allocated 8:1:1 cut: train gets floor(n*8/10), the remainder is
// halved between valid and test with the odd one to test. 9 → 7/1/1,
// 10 → 8/1/1, 8000 → 6400/800/800.
SplitCounts split_counts(size_t n, const std::array<int, 3>& ratios = {8, 1, 1});

// Assigns each sample a split: per-task seeded shuffle of that task's
// samples, then a contiguous cut at the split_counts boundaries. Sample
// order in the vector is preserved; only the split field changes.
void split_dataset(std::vector<InstructionSample>& samples, uint64_t seed,
                   const std::array<int, 3>& ratios = {8, 1, 1});

// ---------------------------------------------------------------------------
// Synthesis

struct SynthConfig {
    uint64_t seed = 0;
    size_t per_task = 8000;
    std::vector<TaskId> tasks{kAllTasks.begin(), kAllTasks.end()};
    std::filesystem::path out_dir;
    RenderConfig render;      // work_dir is forced to out_dir
    SampleBudget budget;
    double bfs_probability = 0.5;
    std::vector<double> kg_weights;  // parallel to the KG list; empty = equal
    int jobs = 1;
    CotBackend backend;
    bool keep_dot = true;           // keep dots/<id>.dot next to images/
    int max_sample_retries = 32;    // fresh subsamples after precondition failures

    // When set, a raised flag stops the run at the next sample boundary;
    // synthesis then writes the aborted-state manifest and throws Cancelled.
    const std::atomic<bool>* cancel = nullptr;
};

// Dry-run arithmetic: what a run would produce, with no I/O.
struct SynthPlan {
    size_t per_task = 0;
    std::vector<TaskId> tasks;
    SplitCounts per_task_splits;  // one task's split sizes
    SplitCounts totals;           // all tasks combined
};
SynthPlan plan_synthesis(const SynthConfig& cfg);

struct DatasetManifest {
    uint64_t seed = 0;
    size_t per_task = 0;
    std::vector<TaskId> tasks;
    std::string cot_source;
    bool complete = false;           // false: aborted, counts are partial
    size_t samples_written = 0;
    SplitCounts totals;
    std::map<std::string, SplitCounts> per_task_counts;  // keyed by short name
    std::map<std::string, std::string> file_digests;     // split file → fnv64
};

// Runs the whole pipeline: per (task, index) it samples a subgraph, builds
// the task instance, renders the graph image, writes question/answer, then
// splits and writes {split}.jsonl plus manifest.json under cfg.out_dir.
// Every sample's bytes depend only on (config, seed); stage errors abort the
// run after writing a partial manifest.
DatasetManifest synthesize_dataset(const std::vector<const MultiModalKG*>& kgs,
                                   const SynthConfig& cfg);

// The manifest as written to manifest.json.
std::string manifest_json(const DatasetManifest& manifest);

}  // namespace kgi
