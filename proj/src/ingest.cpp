#include "kginstruct/ingest.hpp"

#include <fstream>
#include <string>
#include <unordered_set>

#include <json.hpp>

#include "kginstruct/errors.hpp"

namespace kgi {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Strips a trailing '\r' so CRLF files load the same as LF files.
void chomp(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::ifstream open_or_throw(const fs::path& p) {
    if (!fs::exists(p))
        throw Error(Err::MissingFile, p.string() + " not found");
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error(Err::MissingFile, "cannot open " + p.string());
    return in;
}

std::string get_string(const json& obj, const char* key, long line, bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (required)
            throw Error(Err::ParseError, std::string("entity missing \"") + key + "\"", line);
        return {};
    }
    if (!it->is_string())
        throw Error(Err::ParseError, std::string("\"") + key + "\" is not a string", line);
    return it->get<std::string>();
}

std::unordered_set<std::string> load_entities(const fs::path& root, const LoadOptions& opts,
                                              KGBuilder& builder, long& dropped_images) {
    auto in = open_or_throw(root / "entities.jsonl");
    std::unordered_set<std::string> seen_ids;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        chomp(line);
        if (line.empty()) continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(Err::ParseError, std::string("bad entity json: ") + e.what(), lineno);
        }
        if (!obj.is_object())
            throw Error(Err::ParseError, "entity line is not a json object", lineno);

        Entity ent;
        ent.id = get_string(obj, "id", lineno, /*required=*/true);
        if (ent.id.empty())
            throw Error(Err::ParseError, "entity has empty \"id\"", lineno);
        if (!seen_ids.insert(ent.id).second)
            throw Error(Err::ParseError, "duplicate entity id \"" + ent.id + "\"", lineno);
        ent.label = get_string(obj, "label", lineno, /*required=*/false);
        ent.description = get_string(obj, "description", lineno, /*required=*/false);

        if (auto it = obj.find("images"); it != obj.end()) {
            if (!it->is_array())
                throw Error(Err::ParseError, "\"images\" is not an array", lineno);
            for (const auto& item : *it) {
                if (!item.is_string())
                    throw Error(Err::ParseError, "\"images\" entry is not a string", lineno);
                auto rel = item.get<std::string>();
                if (rel.empty())
                    throw Error(Err::ParseError, "\"images\" entry is empty", lineno);
                const bool present = fs::exists(root / rel);
                if (!present && opts.verify_images) {
                    if (opts.strict)
                        throw Error(Err::MissingImage,
                                    "image \"" + rel + "\" for entity \"" + ent.id +
                                        "\" does not exist",
                                    lineno);
                    ++dropped_images;
                    continue;
                }
                ent.image_paths.push_back(std::move(rel));
            }
        }
        builder.add_entity(std::move(ent));
    }
    return seen_ids;
}

// Splits a TSV line into exactly three non-empty fields.
Triple parse_triple_line(const std::string& line, long lineno) {
    auto first = line.find('\t');
    if (first == std::string::npos)
        throw Error(Err::ParseError, "expected 3 tab-separated fields", lineno);
    auto second = line.find('\t', first + 1);
    if (second == std::string::npos)
        throw Error(Err::ParseError, "expected 3 tab-separated fields", lineno);
    if (line.find('\t', second + 1) != std::string::npos)
        throw Error(Err::ParseError, "expected 3 tab-separated fields, got more", lineno);

    Triple t;
    t.head = line.substr(0, first);
    t.relation = line.substr(first + 1, second - first - 1);
    t.tail = line.substr(second + 1);
    if (t.head.empty() || t.relation.empty() || t.tail.empty())
        throw Error(Err::ParseError, "empty field in triple", lineno);
    return t;
}

void load_triples(const fs::path& root, const LoadOptions& opts,
                  const std::unordered_set<std::string>& known_entities,
                  KGBuilder& builder, long& kept, long& dropped) {
    auto in = open_or_throw(root / "triples.tsv");
    std::unordered_set<std::string> seen;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        chomp(line);
        if (line.empty()) continue;

        Triple t = parse_triple_line(line, lineno);

        const bool head_known = known_entities.count(t.head) > 0;
        const bool tail_known = known_entities.count(t.tail) > 0;
        if (!head_known || !tail_known) {
            if (opts.strict)
                throw Error(Err::DanglingReference,
                            "triple references unknown entity \"" +
                                (head_known ? t.tail : t.head) + "\"",
                            lineno);
            ++dropped;
            continue;
        }

        std::string key = t.head + '\t' + t.relation + '\t' + t.tail;
        if (!seen.insert(std::move(key)).second) {
            if (opts.strict)
                throw Error(Err::ParseError, "duplicate triple", lineno);
            ++dropped;
            continue;
        }
        builder.add_triple(std::move(t));
        ++kept;
    }
}

}  // namespace

LoadResult load_kg(const fs::path& root_dir, const LoadOptions& opts) {
    if (!fs::is_directory(root_dir))
        throw Error(Err::MissingFile, root_dir.string() + " is not a directory");

    KGBuilder builder(root_dir.filename().string());
    builder.set_root_dir(root_dir);

    LoadResult result;
    auto ids = load_entities(root_dir, opts, builder, result.dropped_images);

    long kept = 0;
    load_triples(root_dir, opts, ids, builder, kept, result.dropped_triples);
    if (kept == 0 && !opts.allow_empty)
        throw Error(Err::NoTriples, "triples.tsv contains no usable triples");

    result.kg = std::move(builder).finalize();
    return result;
}

void write_kg(const MultiModalKG& g, const fs::path& dir) {
    fs::create_directories(dir / "images");

    {
        std::ofstream out(dir / "entities.jsonl", std::ios::binary);
        if (!out)
            throw Error(Err::MissingFile, "cannot create " + (dir / "entities.jsonl").string());
        for (const Entity& e : g.entities()) {
            nlohmann::ordered_json obj;
            obj["id"] = e.id;
            obj["label"] = e.label;
            obj["description"] = e.description;
            obj["images"] = e.image_paths;
            out << obj.dump() << '\n';
        }
    }
    {
        std::ofstream out(dir / "triples.tsv", std::ios::binary);
        if (!out)
            throw Error(Err::MissingFile, "cannot create " + (dir / "triples.tsv").string());
        for (const Triple& t : g.triples())
            out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
    }
}

KGStats stats(const MultiModalKG& g) {
    KGStats s;
    s.entity_count = static_cast<long>(g.entities().size());
    s.relation_count = static_cast<long>(g.relations().size());
    s.triple_count = static_cast<long>(g.triples().size());
    for (const Entity& e : g.entities()) {
        if (!e.image_paths.empty()) ++s.entities_with_images;
        if (!e.description.empty()) ++s.entities_with_descriptions;
    }
    return s;
}

}  // namespace kgi
