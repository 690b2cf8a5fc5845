#include "kginstruct/instruct.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <fstream>
#include <stdexcept>

#include "kginstruct/digest.hpp"
#include "kginstruct/errors.hpp"
#include "kginstruct/evalkit.hpp"
#include "kginstruct/parallel.hpp"
#include "kginstruct/rng.hpp"
#include "kginstruct/templates.hpp"

namespace kgi {

using ordered_json = nlohmann::ordered_json;

const char* split_name(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "?";
}

namespace {

const std::string& label_of(const ProcessedSubgraph& p, const EntityId& id) {
    const ProcEntity* e = p.find(id);
    if (!e) throw std::invalid_argument("triple endpoint missing from processed subgraph: " + id);
    return e->label;
}

std::string fact_line(const ProcessedSubgraph& p, const ProcTriple& t) {
    return label_of(p, t.head) + " " + t.relation + " " + label_of(p, t.tail);
}

// "<open>\n<item>\n…<item>\n" — every item on its own line.
void append_list(std::string& out, std::string_view open, const std::vector<std::string>& items) {
    out += open;
    out += "\n";
    for (const auto& item : items) {
        out += item;
        out += "\n";
    }
}

std::string wrap_answer(const std::string& think, const std::string& payload) {
    return "<think>\n" + think + "\n</think>\n<answer>" + payload + "</answer>";
}

std::string join(const std::vector<std::string>& items, const char* sep) {
    std::string out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::vector<std::string> facts_involving(const ProcessedSubgraph& p, const EntityId& id) {
    std::vector<std::string> out;
    for (const auto& t : p.triples)
        if (t.head == id || t.tail == id) out.push_back(fact_line(p, t));
    return out;
}

// The textual serialization handed to the llm backend: all triples, then all
// entity descriptions.
std::string serialize_for_prompt(const ProcessedSubgraph& p) {
    std::string out = "Knowledge triples:\n";
    for (const auto& t : p.triples) {
        out += fact_line(p, t);
        out += "\n";
    }
    std::string described;
    for (const auto& e : p.entities)
        if (!e.description.empty()) described += e.label + ": " + e.description + "\n";
    if (!described.empty()) {
        out += "Entity descriptions:\n";
        out += described;
    }
    return out;
}

std::string ask_backend(ChatClient* client, const std::string& prompt) {
    if (!client)
        throw Error(Err::ConfigError, "llm cot mode requires a configured chat client");
    std::string text = client->complete("", prompt);
    // Trim so the grammar glue controls all whitespace.
    size_t b = text.find_first_not_of(" \t\r\n");
    size_t e = text.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : text.substr(b, e - b + 1);
}

std::string counting_think(const TaskInstance& inst) {
    const ProcessedSubgraph& p = inst.processed;
    long gold = std::get<CountGold>(inst.gold).value;
    std::string think;
    switch (inst.task) {
        case TaskId::EC: {
            std::vector<std::string> labels;
            for (const auto& e : p.entities) labels.push_back(e.label);
            append_list(think, templates::kThinkEntitiesOpen, labels);
            think += templates::kThinkEntitiesClose;
            break;
        }
        case TaskId::RC: {
            std::vector<std::string> rels;  // first-appearance order over sorted triples
            for (const auto& t : p.triples)
                if (std::find(rels.begin(), rels.end(), t.relation) == rels.end())
                    rels.push_back(t.relation);
            append_list(think, templates::kThinkRelationsOpen, rels);
            think += templates::kThinkRelationsClose;
            break;
        }
        case TaskId::IC: {
            std::vector<std::string> with, without;
            for (const auto& e : p.entities) (e.image ? with : without).push_back(e.label);
            append_list(think, templates::kThinkImagesOpen, with);
            append_list(think, templates::kThinkImagesOther, without);
            think += templates::kThinkImagesClose;
            break;
        }
        case TaskId::TC: {
            std::vector<std::string> lines;
            for (const auto& t : p.triples) lines.push_back(fact_line(p, t));
            append_list(think, templates::kThinkTriplesOpen, lines);
            think += templates::kThinkTriplesClose;
            break;
        }
        default:
            throw std::invalid_argument("not a counting task");
    }
    think += std::to_string(gold);
    return think;
}

// Deterministic description: every gold fact as one sentence.
std::string templated_description(const FactsGold& gold) {
    std::string out;
    for (const auto& fact : gold.facts) {
        out += fact;
        char last = fact.empty() ? '.' : fact.back();
        if (last != '.' && last != '!' && last != '?') out += '.';
        out += '\n';
    }
    if (!out.empty()) out.pop_back();  // no trailing newline
    return out;
}

}  // namespace

std::string build_question(const TaskInstance& inst) {
    const char* tmpl = templates::question(inst.task);
    if (inst.task != TaskId::ER && inst.task != TaskId::RR) return tmpl;
    const auto* choice = std::get_if<ChoiceGold>(&inst.gold);
    if (!choice) throw std::invalid_argument("choice task instance without choice gold");
    return templates::fill_slot(tmpl, templates::option_block(choice->options));
}

std::string build_gold_answer(const TaskInstance& inst, const CotBackend& backend,
                              ChatClient* client) {
    const ProcessedSubgraph& p = inst.processed;
    bool llm = backend.mode == CotBackend::Mode::llm;

    switch (inst.task) {
        case TaskId::EC:
        case TaskId::RC:
        case TaskId::IC:
        case TaskId::TC: {
            long gold = std::get<CountGold>(inst.gold).value;
            return wrap_answer(counting_think(inst), std::to_string(gold));
        }
        case TaskId::SD: {
            const auto& gold = std::get<FactsGold>(inst.gold);
            if (!llm) return templated_description(gold);
            std::string prompt = serialize_for_prompt(p);
            prompt +=
                "\nWrite a short paragraph describing this knowledge graph in natural "
                "language. Mention every entity and relation listed above. Output only the "
                "description.";
            return ask_backend(client, prompt);
        }
        case TaskId::ED: {
            const auto& gold = std::get<EntityGold>(inst.gold);
            std::string think;
            if (llm) {
                std::string prompt = serialize_for_prompt(p);
                prompt += "\nThe entity \"" + gold.label +
                          "\" is factually wrong in this graph. Write a short reasoning "
                          "paragraph explaining why it does not fit, concluding that \"" +
                          gold.label + "\" is the wrong entity. Output only the reasoning.";
                think = ask_backend(client, prompt);
            } else {
                think = "Checking each entity against the knowledge triples, " + gold.label +
                        " does not fit its context: " +
                        join(facts_involving(p, gold.id), "; ") +
                        ". The remaining entities form a consistent graph, so the wrong entity "
                        "is " +
                        gold.label + ".";
            }
            return wrap_answer(think, gold.label);
        }
        case TaskId::ER:
        case TaskId::RR: {
            const auto& gold = std::get<ChoiceGold>(inst.gold);
            std::string letter(1, gold.correct_letter);
            std::string think;
            if (llm) {
                std::string prompt = serialize_for_prompt(p);
                prompt += "\nOptions:\n" + templates::option_block(gold.options);
                prompt += "\nThe correct option for the [MASK] is " + letter + ". " +
                          gold.correct_text +
                          ". Write a short reasoning paragraph justifying that choice against "
                          "the other options. Output only the reasoning.";
                think = ask_backend(client, prompt);
            } else if (inst.task == TaskId::ER) {
                think = "The [MASK] node appears in these triples: " +
                        join(facts_involving(p, [&] {
                                 for (const auto& e : p.entities)
                                     if (e.masked) return e.id;
                                 throw std::invalid_argument("er instance without masked entity");
                             }()),
                             "; ") +
                        ". Of the options, only " + gold.correct_text +
                        " satisfies all of them, so the answer is " + letter + ".";
            } else {
                const ProcTriple* masked = nullptr;
                for (const auto& t : p.triples)
                    if (t.relation_masked) masked = &t;
                if (!masked) throw std::invalid_argument("rr instance without masked triple");
                think = "The masked relation links " + label_of(p, masked->head) + " and " +
                        label_of(p, masked->tail) + ". Of the options, " + gold.correct_text +
                        " is the relation that holds between them, so the answer is " + letter +
                        ".";
            }
            return wrap_answer(think, letter);
        }
    }
    throw std::invalid_argument("unknown task");
}

namespace {

bool only_ws(std::string_view s) {
    for (char c : s)
        if (c != ' ' && c != '\t' && c != '\r' && c != '\n') return false;
    return true;
}

// `<think>…</think>\n<answer>…</answer>` with nothing but whitespace outside
// the tags.
void check_grammar(const std::string& answer) {
    auto fail = [](const char* why) { throw Error(Err::GrammarViolation, why); };
    size_t t_open = answer.find("<think>");
    if (t_open == std::string::npos || !only_ws(answer.substr(0, t_open)))
        fail("answer must open with <think>");
    size_t t_close = answer.find("</think>", t_open + 7);
    if (t_close == std::string::npos) fail("unterminated <think> section");
    size_t a_open = answer.find("<answer>", t_close + 8);
    if (a_open == std::string::npos || !only_ws(answer.substr(t_close + 8, a_open - t_close - 8)))
        fail("<answer> must directly follow </think>");
    size_t a_close = answer.find("</answer>", a_open + 8);
    if (a_close == std::string::npos) fail("unterminated <answer> tag");
    if (!only_ws(answer.substr(a_close + 9))) fail("trailing text after </answer>");
}

void check_payload(const TaskInstance& inst, const std::string& payload) {
    auto fail = [](const std::string& why) { throw Error(Err::GrammarViolation, why); };
    if (const auto* count = std::get_if<CountGold>(&inst.gold)) {
        long value = 0;
        auto [ptr, ec] = std::from_chars(payload.data(), payload.data() + payload.size(), value);
        if (ec != std::errc() || ptr != payload.data() + payload.size() || value != count->value)
            fail("answer payload '" + payload + "' does not equal the gold count " +
                 std::to_string(count->value));
    } else if (const auto* entity = std::get_if<EntityGold>(&inst.gold)) {
        if (payload != entity->label)
            fail("answer payload '" + payload + "' is not the gold entity '" + entity->label +
                 "'");
    } else if (const auto* choice = std::get_if<ChoiceGold>(&inst.gold)) {
        if (payload.size() != 1 || payload[0] != choice->correct_letter)
            fail("answer payload '" + payload + "' is not the gold option letter " +
                 std::string(1, choice->correct_letter));
    }
}

}  // namespace

InstructionSample assemble(const TaskInstance& inst, const std::string& image_rel,
                           std::string question, std::string answer, std::string cot_source,
                           std::string id) {
    if (question.rfind("<image>", 0) != 0)
        throw Error(Err::GrammarViolation, "question must start with the <image> token");
    if (inst.task != TaskId::SD) {
        check_grammar(answer);
        PredictionRecord parsed = parse_prediction(answer, ParseMode::strict);
        check_payload(inst, *parsed.answer);
    }
    InstructionSample sample;
    sample.id = std::move(id);
    sample.task = inst.task;
    sample.image = image_rel;
    sample.question = std::move(question);
    sample.answer = std::move(answer);
    sample.cot_source = std::move(cot_source);
    sample.seed = inst.seed;
    return sample;
}

SplitCounts split_counts(size_t n, const std::array<int, 3>& ratios) {
    if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0)
        throw std::invalid_argument("split ratios must be positive");
    size_t denom = static_cast<size_t>(ratios[0]) + ratios[1] + ratios[2];
    SplitCounts c;
    c.train = n * static_cast<size_t>(ratios[0]) / denom;
    size_t rest = n - c.train;
    c.valid = rest * static_cast<size_t>(ratios[1]) /
              (static_cast<size_t>(ratios[1]) + static_cast<size_t>(ratios[2]));
    c.test = rest - c.valid;
    return c;
}

void split_dataset(std::vector<InstructionSample>& samples, uint64_t seed,
                   const std::array<int, 3>& ratios) {
    for (TaskId task : kAllTasks) {
        std::vector<size_t> indices;
        for (size_t i = 0; i < samples.size(); ++i)
            if (samples[i].task == task) indices.push_back(i);
        if (indices.empty()) continue;

        SplitMix64 rng(mix_seed(seed, static_cast<uint64_t>(task)));
        shuffle(indices, rng);
        SplitCounts counts = split_counts(indices.size(), ratios);
        for (size_t k = 0; k < indices.size(); ++k) {
            Split split = k < counts.train                  ? Split::train
                          : k < counts.train + counts.valid ? Split::valid
                                                            : Split::test;
            samples[indices[k]].split = split;
        }
    }
}

SynthPlan plan_synthesis(const SynthConfig& cfg) {
    SynthPlan plan;
    plan.per_task = cfg.per_task;
    plan.tasks = cfg.tasks;
    plan.per_task_splits = split_counts(cfg.per_task);
    plan.totals.train = plan.per_task_splits.train * cfg.tasks.size();
    plan.totals.valid = plan.per_task_splits.valid * cfg.tasks.size();
    plan.totals.test = plan.per_task_splits.test * cfg.tasks.size();
    return plan;
}

namespace {

// Smooth weighted round-robin: argmax of accumulated weight, then pay back
// the total. Equal weights degrade to plain round-robin.
std::vector<size_t> kg_schedule(size_t total, size_t kg_count, std::vector<double> weights) {
    if (weights.empty()) weights.assign(kg_count, 1.0);
    if (weights.size() != kg_count)
        throw Error(Err::ConfigError, "kg_weights size does not match the number of graphs");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw Error(Err::ConfigError, "kg_weights must be positive");
        sum += w;
    }
    std::vector<size_t> schedule(total);
    std::vector<double> current(kg_count, 0.0);
    for (size_t g = 0; g < total; ++g) {
        size_t best = 0;
        for (size_t i = 0; i < kg_count; ++i) {
            current[i] += weights[i];
            if (current[i] > current[best]) best = i;
        }
        current[best] -= sum;
        schedule[g] = best;
    }
    return schedule;
}

bool retryable_precondition(Err code) {
    return code == Err::ExhaustedRetries || code == Err::NoImages || code == Err::NoDistractor ||
           code == Err::InsufficientDistractors;
}

TaskInstance make_instance(TaskId task, const Subgraph& sub, const MultiModalKG& kg,
                           uint64_t seed) {
    switch (task) {
        case TaskId::EC:
        case TaskId::RC:
        case TaskId::TC: return make_counting(sub, task);
        case TaskId::IC: return make_image_counting(sub, seed);
        case TaskId::SD: return make_description(sub);
        case TaskId::ED: return make_error_detection(sub, kg, seed);
        case TaskId::ER:
        case TaskId::RR: return make_masked_choice(sub, kg, task, seed);
    }
    throw std::invalid_argument("unknown task");
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Err::MissingFile, "cannot write " + file.string());
    out << text;
}

std::string sample_line(const InstructionSample& s) {
    ordered_json doc;
    doc["id"] = s.id;
    doc["task"] = task_short_name(s.task);
    doc["image"] = s.image;
    doc["question"] = s.question;
    doc["answer"] = s.answer;
    doc["cot_source"] = s.cot_source;
    doc["seed"] = s.seed;
    return doc.dump();
}

}  // namespace

std::string manifest_json(const DatasetManifest& m) {
    ordered_json doc;
    doc["seed"] = m.seed;
    doc["per_task"] = m.per_task;
    ordered_json tasks = ordered_json::array();
    for (TaskId t : m.tasks) tasks.push_back(task_short_name(t));
    doc["tasks"] = tasks;
    doc["cot_source"] = m.cot_source;
    doc["status"] = m.complete ? "complete" : "aborted";
    doc["samples_written"] = m.samples_written;
    doc["counts"] = {{"train", m.totals.train}, {"valid", m.totals.valid}, {"test", m.totals.test}};
    ordered_json per_task = ordered_json::object();
    for (const auto& [name, c] : m.per_task_counts)
        per_task[name] = {{"train", c.train}, {"valid", c.valid}, {"test", c.test}};
    doc["per_task_counts"] = per_task;
    ordered_json files = ordered_json::object();
    for (const auto& [name, digest] : m.file_digests) files[name] = digest;
    doc["file_digests"] = files;
    return doc.dump(2) + "\n";
}

DatasetManifest synthesize_dataset(const std::vector<const MultiModalKG*>& kgs,
                                   const SynthConfig& cfg) {
    if (kgs.empty()) throw Error(Err::ConfigError, "synthesis needs at least one loaded graph");
    if (cfg.out_dir.empty()) throw Error(Err::ConfigError, "synthesis out_dir is not set");
    for (const auto* kg : kgs)
        if (!kg) throw std::invalid_argument("null graph handed to synthesize_dataset");

    const size_t total = cfg.per_task * cfg.tasks.size();
    auto schedule = kg_schedule(total, kgs.size(), cfg.kg_weights);

    std::filesystem::create_directories(cfg.out_dir / "images");
    if (cfg.keep_dot) std::filesystem::create_directories(cfg.out_dir / "dots");

    RenderConfig render = cfg.render;
    render.work_dir = cfg.out_dir;

    std::unique_ptr<ChatClient> client;
    if (cfg.backend.mode == CotBackend::Mode::llm)
        client = std::make_unique<ChatClient>(cfg.backend.endpoint);

    DatasetManifest manifest;
    manifest.seed = cfg.seed;
    manifest.per_task = cfg.per_task;
    manifest.tasks = cfg.tasks;
    manifest.cot_source = cfg.backend.source_name();

    std::vector<InstructionSample> samples(total);
    std::atomic<size_t> completed{0};

    auto build_one = [&](size_t g) {
        if (cfg.cancel && cfg.cancel->load(std::memory_order_relaxed))
            throw Error(Err::Cancelled, "synthesis cancelled");
        TaskId task = cfg.tasks[g / cfg.per_task];
        size_t index = g % cfg.per_task;
        const MultiModalKG& kg = *kgs[schedule[g]];
        uint64_t base_seed = mix_seed(cfg.seed, g);

        TaskInstance inst;
        Subgraph sub;
        bool built = false;
        int attempts = cfg.max_sample_retries < 0 ? 1 : cfg.max_sample_retries + 1;
        for (int attempt = 0; attempt < attempts && !built; ++attempt) {
            uint64_t s = mix_seed(base_seed, static_cast<uint64_t>(attempt));
            try {
                WalkConfig walk;
                walk.bfs_probability = cfg.bfs_probability;
                walk.seed = mix_seed(s, 1);
                sub = sample_subgraph(kg, walk, cfg.budget);
                assign_images(kg, sub, mix_seed(s, 2));
                inst = make_instance(task, sub, kg, mix_seed(s, 3));
                built = true;
            } catch (const Error& e) {
                if (attempt + 1 >= attempts || !retryable_precondition(e.code())) throw;
            }
        }
        inst.seed = base_seed;

        std::string id = std::string(task_short_name(task)) + "_" + std::to_string(index);
        DotDocument dot = to_dot(inst, render);
        if (cfg.keep_dot) write_text_file(cfg.out_dir / "dots" / (id + ".dot"), dot.text);
        std::string image_rel =
            "images/" + id + "." + format_name(render.output_format);
        rasterize(dot, render, cfg.out_dir / image_rel);

        std::string question = build_question(inst);
        std::string answer = build_gold_answer(inst, cfg.backend, client.get());
        samples[g] =
            assemble(inst, image_rel, std::move(question), std::move(answer),
                     cfg.backend.source_name(), std::move(id));
        completed.fetch_add(1, std::memory_order_relaxed);
    };

    auto write_outputs = [&](bool aborted) {
        if (!aborted) split_dataset(samples, mix_seed(cfg.seed, UINT64_MAX));
        for (Split split : {Split::train, Split::valid, Split::test}) {
            std::string name = std::string(split_name(split)) + ".jsonl";
            std::ofstream out(cfg.out_dir / name, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(Err::MissingFile, "cannot write " + (cfg.out_dir / name).string());
            if (!aborted) {
                for (const auto& s : samples)
                    if (s.split == split) {
                        out << sample_line(s) << "\n";
                        auto& counts = manifest.per_task_counts[task_short_name(s.task)];
                        (split == Split::train  ? counts.train
                         : split == Split::valid ? counts.valid
                                                 : counts.test)++;
                    }
            }
            out.flush();
            manifest.file_digests[name] = digest_file(cfg.out_dir / name);
        }
        for (const auto& [name, c] : manifest.per_task_counts) {
            (void)name;
            manifest.totals.train += c.train;
            manifest.totals.valid += c.valid;
            manifest.totals.test += c.test;
        }
        manifest.complete = !aborted;
        manifest.samples_written = aborted ? completed.load() : samples.size();
        write_text_file(cfg.out_dir / "manifest.json", manifest_json(manifest));
    };

    try {
        parallel_for(total, cfg.jobs, build_one);
    } catch (...) {
        // Leave a truthful partial manifest behind, then surface the error.
        try {
            write_outputs(/*aborted=*/true);
        } catch (...) {
        }
        throw;
    }
    write_outputs(/*aborted=*/false);
    return manifest;
}

}  // namespace kgi
