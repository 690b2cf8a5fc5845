#pragma once

#include <filesystem>

#include "kginstruct/kg.hpp"

namespace kgi {

struct KGStats {
    long entity_count = 0;
    long relation_count = 0;
    long triple_count = 0;
    long entities_with_images = 0;
    long entities_with_descriptions = 0;
};

struct LoadOptions {
    // strict: dangling triples, duplicate triples and missing image files
    // abort the load. lenient: they are dropped and counted instead.
    bool strict = true;
    bool allow_empty = false;    // accept a triples file with zero triples
    bool verify_images = true;   // check referenced image files exist (strict only)
};

struct LoadResult {
    MultiModalKG kg;
    long dropped_triples = 0;    // lenient mode: dangling or duplicate
    long dropped_images = 0;     // lenient mode: missing image files
};

// Loads a graph from the on-disk interchange layout:
//   triples.tsv     head_id<TAB>relation_id<TAB>tail_id, one per line, no header
//   entities.jsonl  {"id", "label", "description", "images": [...]} per line
//   images/         files referenced by the entities (optional)
// The returned graph always passes validate_graph with an empty report.
LoadResult load_kg(const std::filesystem::path& root_dir, const LoadOptions& opts = {});

// Writes the interchange files for `g` into `dir` (creates it). Image files
// themselves are not copied; paths are preserved verbatim, so a round trip
// through write_kg/load_kg is identity on graph content.
void write_kg(const MultiModalKG& g, const std::filesystem::path& dir);

KGStats stats(const MultiModalKG& g);

}  // namespace kgi
