#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgi {

using EntityId = std::string;
using RelationId = std::string;

struct Entity {
    EntityId id;
    std::string label;
    std::string description;                // may be empty
    std::vector<std::string> image_paths;   // relative to the graph root, may be empty
};

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    friend bool operator==(const Triple& a, const Triple& b) {
        return a.head == b.head && a.relation == b.relation && a.tail == b.tail;
    }
    friend bool operator<(const Triple& a, const Triple& b) {
        if (a.head != b.head) return a.head < b.head;
        if (a.relation != b.relation) return a.relation < b.relation;
        return a.tail < b.tail;
    }
};

struct ValidationIssue {
    enum class Kind {
        DanglingHead,
        DanglingTail,
        UnknownRelation,
        DuplicateTriple,
        EmptyLabel,
        BadImagePath,
        ExceedsCap,
        Disconnected,
    };
    Kind kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    size_t count(ValidationIssue::Kind k) const;
};

// Immutable after finalize(). Entities are kept sorted by id so every
// iteration order downstream is deterministic.
class MultiModalKG {
public:
    const std::vector<Entity>& entities() const { return entities_; }
    const std::vector<RelationId>& relations() const { return relations_; }
    const std::vector<Triple>& triples() const { return triples_; }

    const Entity* find_entity(const EntityId& id) const;
    bool has_relation(const RelationId& r) const;

    // Indices into triples() incident to the entity at entity index `i`
    // (either endpoint; a self-loop appears once).
    const std::vector<uint32_t>& incident(uint32_t entity_index) const { return incident_[entity_index]; }
    std::optional<uint32_t> entity_index(const EntityId& id) const;

    // Entity indices with degree >= 1, the eligible walk-start pool.
    const std::vector<uint32_t>& start_pool() const { return start_pool_; }

    const std::string& name() const { return name_; }
    const std::filesystem::path& root_dir() const { return root_dir_; }

private:
    friend class KGBuilder;
    std::vector<Entity> entities_;
    std::vector<RelationId> relations_;
    std::vector<Triple> triples_;
    std::unordered_map<std::string, uint32_t> entity_lookup_;
    std::unordered_map<std::string, uint32_t> relation_lookup_;
    std::vector<std::vector<uint32_t>> incident_;
    std::vector<uint32_t> start_pool_;
    std::string name_;
    std::filesystem::path root_dir_;
};

// Accumulates a graph in any order, then finalize() sorts, indexes and
// returns the immutable form. The builder itself performs no validation so
// that validate_graph can be exercised on deliberately broken graphs.
class KGBuilder {
public:
    explicit KGBuilder(std::string name = "", bool auto_declare_relations = true)
        : auto_declare_(auto_declare_relations) {
        kg_.name_ = std::move(name);
    }

    void set_root_dir(std::filesystem::path p) { kg_.root_dir_ = std::move(p); }
    void add_entity(Entity e);
    void declare_relation(const RelationId& r);
    void add_triple(Triple t);

    MultiModalKG finalize();

private:
    MultiModalKG kg_;
    bool auto_declare_ = true;
};

// Reports every invariant violation: dangling endpoints, relations not in
// the declared vocabulary, duplicate identical triples, empty labels, and
// image paths that are absolute or escape the graph root. Never throws;
// an empty report means the graph is valid. Idempotent.
ValidationReport validate_graph(const MultiModalKG& g);

// A sampled fragment of a parent graph. Entity ids and triples are kept
// sorted; image_assignment maps each included entity to at most one of its
// own image paths.
struct Subgraph {
    const MultiModalKG* parent = nullptr;
    std::vector<EntityId> entity_ids;                                  // sorted
    std::vector<Triple> triples;                                       // sorted
    std::map<EntityId, std::optional<std::string>> image_assignment;   // one path or nullopt per entity
    bool whole_component = false;   // set when the walk exhausted a component smaller than the budget

    bool contains_entity(const EntityId& id) const;
};

// True iff every entity is reachable from every other when edge direction
// is ignored. A single entity with no triples counts as connected.
bool weakly_connected(const Subgraph& sub);

// Checks the Subgraph construction invariants against its parent graph:
// endpoint closure, weak connectivity, the entity cap, and that each
// assigned image path belongs to that entity.
ValidationReport validate_subgraph(const Subgraph& sub, size_t max_entities);

}  // namespace kgi
