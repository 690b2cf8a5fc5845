#include <CLI11.hpp>
#include <json.hpp>

#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kginstruct/errors.hpp"
#include "kginstruct/evalkit.hpp"
#include "kginstruct/ingest.hpp"
#include "kginstruct/instruct.hpp"
#include "kginstruct/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace kgi;

// 0 success, 1 data/validation error, 2 usage/environment error, 130 interrupt.
int exit_code_for(Err code) {
    switch (code) {
        case Err::MissingFile:
        case Err::RendererFailure:
        case Err::RendererTimeout:
        case Err::BackendUnavailable:
        case Err::EmptyBackendResponse:
        case Err::JudgeUnavailable:
        case Err::ConfigError: return 2;
        case Err::Cancelled: return 130;
        default: return 1;
    }
}

std::atomic<bool> g_cancel{false};

void handle_interrupt(int) { g_cancel.store(true); }

// ---------------------------------------------------------------------------
// Config file: one JSON object, sections per subcommand, flags override.

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw Error(Err::ConfigError, "cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Err::ConfigError, std::string("config file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error(Err::ConfigError, "config root must be a JSON object");
    return doc;
}

std::string joined_key(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

// Unknown keys are rejected so a typo cannot silently fall back to a default.
void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& prefix) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) known = known || it.key() == k;
        if (!known)
            throw Error(Err::ConfigError, "unknown config key " + joined_key(prefix, it.key()));
    }
}

json section(const json& parent, const char* name) {
    if (!parent.contains(name)) return json::object();
    const json& s = parent.at(name);
    if (!s.is_object())
        throw Error(Err::ConfigError, std::string("config section ") + name + " must be an object");
    return s;
}

template <class T>
T config_value(const json& sec, const std::string& prefix, const char* key, T fallback) {
    if (!sec.contains(key)) return fallback;
    try {
        return sec.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(Err::ConfigError, "config key " + joined_key(prefix, key) + " has the wrong type");
    }
}

// Effective setting: an explicitly passed flag wins over the config file,
// which wins over the built-in default.
template <class T>
T pick(const CLI::Option* opt, const T& flag_value, const json& sec, const std::string& prefix,
       const char* key, T fallback) {
    if (opt && opt->count() > 0) return flag_value;
    return config_value<T>(sec, prefix, key, std::move(fallback));
}

// ---------------------------------------------------------------------------
// Small parsers

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    auto flush = [&] {
        size_t b = cur.find_first_not_of(" \t");
        size_t e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) parts.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char c : text) {
        if (c == ',')
            flush();
        else
            cur.push_back(c);
    }
    flush();
    return parts;
}

std::vector<TaskId> parse_task_list(const std::vector<std::string>& names) {
    if (names.empty()) throw Error(Err::ConfigError, "task list is empty");
    std::vector<TaskId> tasks;
    for (const auto& name : names) {
        auto task = task_from_string(name);
        if (!task)
            throw Error(Err::ConfigError,
                        "unknown task \"" + name + "\" (expected ec, rc, ic, tc, sd, ed, er, rr)");
        for (TaskId prev : tasks)
            if (prev == *task)
                throw Error(Err::ConfigError, "task \"" + name + "\" listed more than once");
        tasks.push_back(*task);
    }
    return tasks;
}

std::vector<double> parse_weight_list(const std::vector<std::string>& parts) {
    std::vector<double> weights;
    for (const auto& p : parts) {
        size_t used = 0;
        double w = 0.0;
        try {
            w = std::stod(p, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != p.size())
            throw Error(Err::ConfigError, "bad weight \"" + p + "\" in --kg-weights");
        weights.push_back(w);
    }
    return weights;
}

// Resolves `exe` the way the shell would: a name containing a slash must be
// an executable file as given; a bare name is searched along PATH.
std::optional<fs::path> find_executable(const fs::path& exe) {
    auto usable = [](const fs::path& p) {
        std::error_code ec;
        return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
    };
    if (exe.native().find('/') != std::string::npos)
        return usable(exe) ? std::optional(fs::absolute(exe)) : std::nullopt;
    const char* path_env = std::getenv("PATH");
    if (!path_env) return std::nullopt;
    std::string paths = path_env;
    size_t start = 0;
    while (start <= paths.size()) {
        size_t end = paths.find(':', start);
        std::string dir =
            end == std::string::npos ? paths.substr(start) : paths.substr(start, end - start);
        if (!dir.empty() && usable(fs::path(dir) / exe)) return fs::path(dir) / exe;
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return std::nullopt;
}

bool counting_task(TaskId t) {
    return t == TaskId::EC || t == TaskId::RC || t == TaskId::IC || t == TaskId::TC;
}

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Err::MissingFile, "cannot write " + file.string());
    out << text;
}

// Chat endpoint flag block, shared by the synthesis backend and the judge.
// Secrets never appear on the command line: only the NAME of the environment
// variable holding the token is configurable.
struct EndpointFlags {
    std::string url;
    std::string model;
    std::string token_env = "KGINSTRUCT_API_TOKEN";
    double rps = 0.0;
    double temperature = 0.0;
    int timeout = 30;
    int retries = 3;
    CLI::Option* url_opt = nullptr;
    CLI::Option* model_opt = nullptr;
    CLI::Option* token_opt = nullptr;
    CLI::Option* rps_opt = nullptr;
    CLI::Option* temp_opt = nullptr;
    CLI::Option* timeout_opt = nullptr;
    CLI::Option* retries_opt = nullptr;

    void attach(CLI::App* sub, const std::string& stem, const std::string& what) {
        url_opt = sub->add_option("--" + stem + "-url", url, what + " base URL");
        model_opt = sub->add_option("--" + stem + "-model", model, what + " model name");
        token_opt = sub->add_option("--" + stem + "-token-env", token_env,
                                    "env var holding the " + what + " API token");
        rps_opt = sub->add_option("--" + stem + "-rps", rps,
                                  what + " requests per second (0 = unlimited)");
        temp_opt = sub->add_option("--" + stem + "-temperature", temperature,
                                   what + " sampling temperature");
        timeout_opt =
            sub->add_option("--" + stem + "-timeout", timeout, what + " request timeout, seconds");
        retries_opt = sub->add_option("--" + stem + "-retries", retries,
                                      what + " retries for transient failures");
    }

    ChatEndpoint resolve(const json& sec, const std::string& prefix) const {
        check_keys(sec,
                   {"url", "model", "path", "api_token_env", "temperature", "timeout_seconds",
                    "max_retries", "requests_per_second"},
                   prefix);
        ChatEndpoint ep;
        ep.base_url = pick(url_opt, url, sec, prefix, "url", std::string());
        ep.model = pick(model_opt, model, sec, prefix, "model", std::string());
        ep.path = config_value(sec, prefix, "path", std::string("/v1/chat/completions"));
        ep.api_token_env =
            pick(token_opt, token_env, sec, prefix, "api_token_env",
                 std::string("KGINSTRUCT_API_TOKEN"));
        ep.requests_per_second = pick(rps_opt, rps, sec, prefix, "requests_per_second", 0.0);
        ep.temperature = pick(temp_opt, temperature, sec, prefix, "temperature", 0.0);
        ep.timeout_seconds = pick(timeout_opt, timeout, sec, prefix, "timeout_seconds", 30);
        ep.max_retries = pick(retries_opt, retries, sec, prefix, "max_retries", 3);
        return ep;
    }
};

constexpr std::initializer_list<const char*> kTopKeys = {"seed",  "jobs", "strict", "ingest",
                                                         "synth", "eval", "pa"};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-modal knowledge-graph instruction data engine"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");
    uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "master RNG seed");
    int jobs = 1;
    auto* jobs_opt = app.add_option("--jobs", jobs, "worker thread count");
    bool strict = false;
    auto* strict_opt =
        app.add_flag("--strict", strict, "abort on data issues instead of dropping or recovering");
    bool dry_run = false;
    app.add_flag("--dry-run", dry_run, "validate the configuration and plan; write nothing");

    int rc = 0;

    // ---- ingest -----------------------------------------------------------
    auto* cmd_ingest = app.add_subcommand("ingest", "validate a graph directory, print statistics");
    cmd_ingest->fallthrough();
    std::string ingest_dir;
    auto* ingest_dir_opt = cmd_ingest->add_option(
        "dir", ingest_dir, "graph directory (triples.tsv + entities.jsonl [+ images/])");

    cmd_ingest->callback([&] {
        json cfg = load_config_file(config_path);
        check_keys(cfg, kTopKeys, "");
        json sec = section(cfg, "ingest");
        check_keys(sec, {"dir"}, "ingest");

        std::string dir = pick(ingest_dir_opt, ingest_dir, sec, "ingest", "dir", std::string());
        if (dir.empty()) throw Error(Err::ConfigError, "ingest needs a graph directory");
        LoadOptions opts;
        opts.strict = pick(strict_opt, strict, cfg, "", "strict", false);

        LoadResult res = load_kg(dir, opts);
        KGStats st = stats(res.kg);
        std::cout << st.entity_count << " entities, " << st.relation_count << " relations, "
                  << st.triple_count << " triples\n"
                  << st.entities_with_images << " entities with images, "
                  << st.entities_with_descriptions << " with descriptions\n";
        if (res.dropped_triples > 0 || res.dropped_images > 0)
            std::cout << "dropped " << res.dropped_triples << " triples, " << res.dropped_images
                      << " image references\n";
        rc = 0;
    });

    // ---- synth ------------------------------------------------------------
    auto* cmd_synth =
        app.add_subcommand("synth", "sample subgraphs, render images, write dataset splits");
    cmd_synth->fallthrough();
    std::vector<std::string> kg_dirs;
    auto* kg_opt = cmd_synth->add_option("--kg", kg_dirs, "graph directory (repeatable)");
    std::string out_dir;
    auto* out_opt = cmd_synth->add_option("--out", out_dir, "dataset output directory");
    size_t per_task = 8000;
    auto* per_task_opt =
        cmd_synth->add_option("--per-task", per_task, "instances per task (default 8000)");
    std::string tasks_csv;
    auto* tasks_opt =
        cmd_synth->add_option("--tasks", tasks_csv, "comma list of tasks (default: all eight)");
    std::string weights_csv;
    auto* weights_opt = cmd_synth->add_option("--kg-weights", weights_csv,
                                              "comma list of per-graph mixing weights");
    std::string renderer;
    auto* renderer_opt =
        cmd_synth->add_option("--renderer", renderer, "DOT renderer executable (default dot)");
    std::string render_format;
    auto* format_opt =
        cmd_synth->add_option("--render-format", render_format, "image format: png or svg");
    int dpi = 96;
    auto* dpi_opt = cmd_synth->add_option("--dpi", dpi, "render resolution");
    bool no_dot = false;
    auto* no_dot_opt =
        cmd_synth->add_flag("--no-dot", no_dot, "do not keep DOT sources next to the images");
    std::string cot_mode;
    auto* cot_opt =
        cmd_synth->add_option("--cot", cot_mode, "think-section source: templated or llm");
    double bfs_prob = 0.5;
    auto* bfs_opt =
        cmd_synth->add_option("--bfs-prob", bfs_prob, "probability of a breadth-first step");
    size_t max_entities = 9;
    auto* max_ent_opt =
        cmd_synth->add_option("--max-entities", max_entities, "subgraph entity cap");
    size_t min_entities = 3;
    auto* min_ent_opt =
        cmd_synth->add_option("--min-entities", min_entities, "minimum accepted subgraph size");
    int sample_retries = 32;
    auto* retries_opt = cmd_synth->add_option("--retries", sample_retries,
                                              "resample attempts per instance");
    EndpointFlags backend_flags;
    backend_flags.attach(cmd_synth, "backend", "chat backend");

    cmd_synth->callback([&] {
        json cfg = load_config_file(config_path);
        check_keys(cfg, kTopKeys, "");
        json sec = section(cfg, "synth");
        check_keys(sec,
                   {"kg_dirs", "kg_weights", "out_dir", "per_task", "tasks", "cot", "keep_dot",
                    "bfs_probability", "max_sample_retries", "budget", "render", "backend"},
                   "synth");

        SynthConfig sc;
        sc.seed = pick(seed_opt, seed, cfg, "", "seed", uint64_t{0});
        sc.jobs = pick(jobs_opt, jobs, cfg, "", "jobs", 1);
        if (sc.jobs < 1) throw Error(Err::ConfigError, "--jobs must be at least 1");
        sc.per_task = pick(per_task_opt, per_task, sec, "synth", "per_task", size_t{8000});

        std::vector<std::string> task_names =
            tasks_opt->count() ? split_csv(tasks_csv)
                               : config_value(sec, "synth", "tasks", std::vector<std::string>{});
        if (!task_names.empty()) sc.tasks = parse_task_list(task_names);

        std::vector<std::string> dirs =
            kg_opt->count() ? kg_dirs
                            : config_value(sec, "synth", "kg_dirs", std::vector<std::string>{});
        if (dirs.empty())
            throw Error(Err::ConfigError, "synth needs at least one graph directory (--kg)");
        std::string out = pick(out_opt, out_dir, sec, "synth", "out_dir", std::string());
        if (out.empty()) throw Error(Err::ConfigError, "synth needs an output directory (--out)");
        sc.out_dir = out;

        if (weights_opt->count())
            sc.kg_weights = parse_weight_list(split_csv(weights_csv));
        else
            sc.kg_weights = config_value(sec, "synth", "kg_weights", std::vector<double>{});

        sc.bfs_probability = pick(bfs_opt, bfs_prob, sec, "synth", "bfs_probability", 0.5);
        sc.keep_dot = no_dot_opt->count() ? !no_dot
                                          : config_value(sec, "synth", "keep_dot", true);
        sc.max_sample_retries =
            pick(retries_opt, sample_retries, sec, "synth", "max_sample_retries", 32);

        json budget_sec = section(sec, "budget");
        check_keys(budget_sec, {"max_entities", "min_entities", "max_expansion_steps",
                                "max_restarts"},
                   "synth.budget");
        sc.budget.max_entities =
            pick(max_ent_opt, max_entities, budget_sec, "synth.budget", "max_entities", size_t{9});
        sc.budget.min_entities =
            pick(min_ent_opt, min_entities, budget_sec, "synth.budget", "min_entities", size_t{3});
        sc.budget.max_expansion_steps =
            config_value(budget_sec, "synth.budget", "max_expansion_steps", size_t{0});
        sc.budget.max_restarts = config_value(budget_sec, "synth.budget", "max_restarts", 16);

        json render_sec = section(sec, "render");
        check_keys(render_sec,
                   {"renderer", "format", "dpi", "thumbnail_px", "description_truncation_chars",
                    "timeout_seconds"},
                   "synth.render");
        sc.render.renderer_executable =
            pick(renderer_opt, renderer, render_sec, "synth.render", "renderer",
                 std::string("dot"));
        std::string fmt =
            pick(format_opt, render_format, render_sec, "synth.render", "format",
                 std::string("png"));
        if (fmt == "png")
            sc.render.output_format = RenderConfig::Format::png;
        else if (fmt == "svg")
            sc.render.output_format = RenderConfig::Format::svg;
        else
            throw Error(Err::ConfigError, "render format must be png or svg, got \"" + fmt + "\"");
        sc.render.dpi = pick(dpi_opt, dpi, render_sec, "synth.render", "dpi", 96);
        sc.render.thumbnail_px = config_value(render_sec, "synth.render", "thumbnail_px", 128);
        sc.render.description_truncation_chars =
            config_value(render_sec, "synth.render", "description_truncation_chars", 140);
        sc.render.timeout_seconds =
            config_value(render_sec, "synth.render", "timeout_seconds", 30);

        std::string cot = pick(cot_opt, cot_mode, sec, "synth", "cot", std::string("templated"));
        if (cot == "llm")
            sc.backend.mode = CotBackend::Mode::llm;
        else if (cot != "templated")
            throw Error(Err::ConfigError, "--cot must be templated or llm, got \"" + cot + "\"");
        sc.backend.endpoint = backend_flags.resolve(section(sec, "backend"), "synth.backend");
        if (sc.backend.mode == CotBackend::Mode::llm && sc.backend.endpoint.base_url.empty())
            throw Error(Err::ConfigError, "--cot llm needs a chat backend (--backend-url)");

        for (const auto& dir : dirs)
            if (!fs::is_directory(dir))
                throw Error(Err::MissingFile, "graph directory not found: " + dir);

        if (dry_run) {
            SynthPlan plan = plan_synthesis(sc);
            std::cout << "plan: " << plan.tasks.size() << " tasks x " << plan.per_task
                      << " instances = " << plan.per_task * plan.tasks.size() << " samples\n"
                      << "per task: " << plan.per_task_splits.train << "/"
                      << plan.per_task_splits.valid << "/" << plan.per_task_splits.test
                      << " train/valid/test\n"
                      << "totals: " << plan.totals.train << "/" << plan.totals.valid << "/"
                      << plan.totals.test << " train/valid/test\n";
            for (const auto& dir : dirs) {
                if (!fs::is_regular_file(fs::path(dir) / "triples.tsv") ||
                    !fs::is_regular_file(fs::path(dir) / "entities.jsonl"))
                    throw Error(Err::MissingFile,
                                "graph directory lacks triples.tsv/entities.jsonl: " + dir);
                std::cout << "graph: " << dir << " (ok)\n";
            }
            auto exe = find_executable(sc.render.renderer_executable);
            if (!exe)
                throw Error(Err::RendererFailure,
                            "renderer not found: " + sc.render.renderer_executable.string());
            std::cout << "renderer: " << exe->string() << "\n"
                      << "dry run: nothing written\n";
            rc = 0;
            return;
        }

        LoadOptions lo;
        lo.strict = pick(strict_opt, strict, cfg, "", "strict", false);
        std::vector<LoadResult> loaded;
        loaded.reserve(dirs.size());
        for (const auto& dir : dirs) {
            loaded.push_back(load_kg(dir, lo));
            const KGStats st = stats(loaded.back().kg);
            std::cout << "loaded " << dir << ": " << st.entity_count << " entities, "
                      << st.triple_count << " triples\n";
        }
        std::vector<const MultiModalKG*> graphs;
        for (const auto& l : loaded) graphs.push_back(&l.kg);

        std::signal(SIGINT, handle_interrupt);
        sc.cancel = &g_cancel;
        DatasetManifest manifest = synthesize_dataset(graphs, sc);
        std::cout << "wrote " << manifest.totals.train << "/" << manifest.totals.valid << "/"
                  << manifest.totals.test << " train/valid/test samples to " << out << "\n"
                  << "manifest: " << (sc.out_dir / "manifest.json").string() << "\n";
        rc = 0;
    });

    // ---- eval -------------------------------------------------------------
    auto* cmd_eval =
        app.add_subcommand("eval", "score a predictions file against a dataset split");
    cmd_eval->fallthrough();
    std::string gold_path;
    auto* gold_opt = cmd_eval->add_option("--gold", gold_path, "dataset split JSONL (the gold)");
    std::string pred_path;
    auto* pred_opt =
        cmd_eval->add_option("--pred", pred_path, "predictions JSONL with keys id and output");
    std::string report_kind;
    auto* report_opt =
        cmd_eval->add_option("--report", report_kind, "stdout format: table (default) or json");
    std::string eval_out;
    auto* eval_out_opt =
        cmd_eval->add_option("--out", eval_out, "also write the JSON report to this file");
    bool judge_ed = false;
    auto* judge_ed_opt = cmd_eval->add_flag(
        "--judge-ed", judge_ed, "let the judge adjudicate error-detection answers that fail "
                                "exact match");
    int judge_ed_threshold = 50;
    auto* judge_ed_thresh_opt = cmd_eval->add_option(
        "--judge-ed-threshold", judge_ed_threshold,
        "judge score from which an adjudicated answer counts correct (default 50)");
    EndpointFlags judge_flags;
    judge_flags.attach(cmd_eval, "judge", "judge");

    cmd_eval->callback([&] {
        json cfg = load_config_file(config_path);
        check_keys(cfg, kTopKeys, "");
        json sec = section(cfg, "eval");
        check_keys(sec, {"gold", "predictions", "report", "out", "judge", "judge_ed",
                         "judge_ed_threshold"},
                   "eval");

        std::string gold_file = pick(gold_opt, gold_path, sec, "eval", "gold", std::string());
        std::string pred_file =
            pick(pred_opt, pred_path, sec, "eval", "predictions", std::string());
        if (gold_file.empty() || pred_file.empty())
            throw Error(Err::ConfigError, "eval needs --gold and --pred files");
        std::string report_fmt =
            pick(report_opt, report_kind, sec, "eval", "report", std::string("table"));
        if (report_fmt != "table" && report_fmt != "json")
            throw Error(Err::ConfigError, "--report must be table or json");
        std::string out_file = pick(eval_out_opt, eval_out, sec, "eval", "out", std::string());
        bool adjudicate_ed =
            judge_ed_opt->count() ? judge_ed : config_value(sec, "eval", "judge_ed", false);
        int threshold = pick(judge_ed_thresh_opt, judge_ed_threshold, sec, "eval",
                             "judge_ed_threshold", 50);
        if (threshold < 0 || threshold > 100)
            throw Error(Err::ConfigError, "--judge-ed-threshold must be in 0..100");
        ChatEndpoint judge_ep = judge_flags.resolve(section(sec, "judge"), "eval.judge");
        bool use_judge = !judge_ep.base_url.empty();
        if (adjudicate_ed && !use_judge)
            throw Error(Err::ConfigError, "--judge-ed needs a judge backend (--judge-url)");
        ParseMode mode =
            pick(strict_opt, strict, cfg, "", "strict", false) ? ParseMode::strict
                                                               : ParseMode::lenient;
        int workers = pick(jobs_opt, jobs, cfg, "", "jobs", 1);
        if (workers < 1) throw Error(Err::ConfigError, "--jobs must be at least 1");

        auto golds = load_gold_samples(gold_file);
        auto preds = load_predictions(pred_file);
        if (dry_run) {
            std::cout << golds.size() << " gold samples, " << preds.size() << " predictions\n"
                      << "dry run: nothing scored\n";
            rc = 0;
            return;
        }

        std::map<std::string, const GoldSample*> by_id;
        for (const auto& g : golds) by_id[g.id] = &g;
        struct Row {
            const GoldSample* gold;
            const RawPrediction* pred;
        };
        std::vector<Row> rows;
        for (const auto& p : preds) {
            auto it = by_id.find(p.id);
            if (it == by_id.end())
                throw Error(Err::ParseError, "prediction references unknown sample id: " + p.id);
            rows.push_back({it->second, &p});
        }

        std::vector<RecordScore> scores(rows.size());
        struct JudgeJob {
            size_t row;
            std::string reference;
            std::string candidate;
            bool adjudicates_exact;
        };
        std::vector<JudgeJob> judge_jobs;

        for (size_t i = 0; i < rows.size(); ++i) {
            const Row& row = rows[i];
            RecordScore& rs = scores[i];
            rs.task = row.gold->task;

            std::optional<PredictionRecord> rec;
            try {
                rec = parse_prediction(row.pred->output, mode);
            } catch (const Error& e) {
                if (e.code() != Err::Unparseable) throw;
            }

            if (rs.task == TaskId::SD) {
                // Free text; the only signal is the judge. Tag-wrapped output
                // is unwrapped, anything else is judged verbatim.
                if (use_judge) {
                    std::string candidate = rec && rec->answer && !rec->lenient
                                                ? *rec->answer
                                                : row.pred->output;
                    judge_jobs.push_back({i, row.gold->answer, candidate, false});
                }
                continue;
            }

            std::string gold_payload;
            try {
                gold_payload = *parse_prediction(row.gold->answer, ParseMode::strict).answer;
            } catch (const Error&) {
                throw Error(Err::ParseError, "gold answer for sample " + row.gold->id +
                                                 " does not follow the answer grammar");
            }
            if (rec && rec->answer) {
                bool non_numeric = false;
                rs.exact = exact_match(*rec->answer, gold_payload, rs.task, &non_numeric);
                rs.non_numeric = non_numeric;
            } else {
                rs.exact = false;
                rs.non_numeric = counting_task(rs.task);
            }
            if (rs.task == TaskId::ED && adjudicate_ed && !rs.exact) {
                std::string candidate =
                    rec && rec->answer ? *rec->answer : row.pred->output;
                judge_jobs.push_back({i, gold_payload, candidate, true});
            }
        }

        if (!judge_jobs.empty()) {
            ChatClient client(judge_ep);
            parallel_for(judge_jobs.size(), workers, [&](size_t k) {
                const JudgeJob& job = judge_jobs[k];
                RecordScore& rs = scores[job.row];
                try {
                    JudgeResult result =
                        judge_score(job.candidate, job.reference, JudgeKind::description, client);
                    rs.judge = result.score;
                    if (job.adjudicates_exact && result.score >= threshold) rs.exact = true;
                } catch (const Error& e) {
                    if (e.code() != Err::ScoreParseFailure) throw;
                    rs.judge_failed = true;
                }
            });
        }

        EvalReport report = aggregate(scores, use_judge ? judge_ep.model : "");
        if (!out_file.empty()) write_text(out_file, report_json(report));
        std::cout << (report_fmt == "json" ? report_json(report) : report_table(report));
        rc = 0;
    });

    // ---- pa-build ---------------------------------------------------------
    auto* cmd_pa = app.add_subcommand(
        "pa-build", "turn failed predictions into preference pairs for alignment training");
    cmd_pa->fallthrough();
    std::string pa_gold;
    auto* pa_gold_opt = cmd_pa->add_option("--gold", pa_gold, "dataset split JSONL (the gold)");
    std::string pa_pred;
    auto* pa_pred_opt =
        cmd_pa->add_option("--pred", pa_pred, "predictions JSONL with keys id and output");
    std::string pa_out;
    auto* pa_out_opt = cmd_pa->add_option("--out", pa_out, "preference-pair JSONL to write");
    bool include_sd = false;
    auto* include_sd_opt = cmd_pa->add_flag(
        "--include-descriptions", include_sd,
        "also pair description records whose output breaks the answer grammar");

    cmd_pa->callback([&] {
        json cfg = load_config_file(config_path);
        check_keys(cfg, kTopKeys, "");
        json sec = section(cfg, "pa");
        check_keys(sec, {"gold", "predictions", "out", "include_descriptions"}, "pa");

        std::string gold_file = pick(pa_gold_opt, pa_gold, sec, "pa", "gold", std::string());
        std::string pred_file =
            pick(pa_pred_opt, pa_pred, sec, "pa", "predictions", std::string());
        std::string out_file = pick(pa_out_opt, pa_out, sec, "pa", "out", std::string());
        if (gold_file.empty() || pred_file.empty())
            throw Error(Err::ConfigError, "pa-build needs --gold and --pred files");
        if (out_file.empty() && !dry_run)
            throw Error(Err::ConfigError, "pa-build needs an output file (--out)");
        bool include = include_sd_opt->count()
                           ? include_sd
                           : config_value(sec, "pa", "include_descriptions", false);

        auto golds = load_gold_samples(gold_file);
        auto preds = load_predictions(pred_file);
        auto pairs = build_preference_pairs(golds, preds, include);
        if (dry_run) {
            std::cout << pairs.size() << " preference pairs from " << preds.size()
                      << " predictions\n"
                      << "dry run: nothing written\n";
            rc = 0;
            return;
        }
        write_preference_pairs(out_file, pairs);
        std::cout << pairs.size() << " preference pairs -> " << out_file << "\n";
        rc = 0;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
