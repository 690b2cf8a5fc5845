#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kginstruct/kg.hpp"

namespace kgi {

// The eight seed tasks. Numbering is part of the data contract.
enum class TaskId {
    EC = 1,  // entity counting
    RC = 2,  // relation counting
    IC = 3,  // image counting
    TC = 4,  // triple counting
    SD = 5,  // subgraph description
    ED = 6,  // error detection
    ER = 7,  // entity reasoning (masked choice)
    RR = 8,  // relation reasoning (masked choice)
};

inline constexpr std::array<TaskId, 8> kAllTasks = {
    TaskId::EC, TaskId::RC, TaskId::IC, TaskId::TC,
    TaskId::SD, TaskId::ED, TaskId::ER, TaskId::RR,
};

const char* task_short_name(TaskId task);                    // "ec" … "rr"
std::optional<TaskId> task_from_string(std::string_view s);  // "ec", "EC", "7"

// An entity/triple as it appears after task processing. Masked elements carry
// the literal "[MASK]" in place of their text and lose description and image.
struct ProcEntity {
    EntityId id;
    std::string label;
    std::string description;
    std::optional<std::string> image;  // relative to asset_root
    bool masked = false;
};

struct ProcTriple {
    EntityId head;
    RelationId relation;
    EntityId tail;
    bool relation_masked = false;

    friend bool operator==(const ProcTriple&, const ProcTriple&) = default;
};

struct ProcessedSubgraph {
    std::vector<ProcEntity> entities;  // sorted by id
    std::vector<ProcTriple> triples;   // sorted by (head, relation, tail)
    std::filesystem::path asset_root;  // directory image paths resolve against
    bool degenerate = false;           // single-image IC case: nothing removable

    const ProcEntity* find(const EntityId& id) const;
};

struct CountGold {
    long value = 0;
};
struct EntityGold {
    EntityId id;
    std::string label;
};
struct ChoiceGold {
    std::array<std::string, 5> options;  // display order, letters A-E
    char correct_letter = 'A';
    std::string correct_text;
};
struct FactsGold {
    std::vector<std::string> facts;  // judge reference: triple lines, then descriptions
};
using GoldPayload = std::variant<CountGold, EntityGold, ChoiceGold, FactsGold>;

struct TaskInstance {
    TaskId task = TaskId::EC;
    ProcessedSubgraph processed;
    GoldPayload gold;
    uint64_t seed = 0;
    std::string source_graph_name;
};

// EC / RC / TC: the subgraph passes through untouched; gold is the entity,
// distinct-relation, or triple count.
TaskInstance make_counting(const Subgraph& sub, TaskId task);

// IC: removes k images from the processed copy, k uniform in
// {1, …, with_images−1}; a single-image subgraph keeps it and is flagged
// degenerate. Gold is the retained image count. Throws NoImages when no
// entity has an assigned image.
TaskInstance make_image_counting(const Subgraph& sub, uint64_t seed);

// ED: swaps one uniformly chosen entity for a pool entity outside the
// subgraph (label, description, image and incident triples all move to the
// replacement). Gold identifies the foreign entity. Throws NoDistractor when
// the pool has nothing outside the subgraph.
TaskInstance make_error_detection(const Subgraph& sub, const MultiModalKG& pool, uint64_t seed);

// ER / RR: masks one entity label (ER) or one triple's relation (RR) and
// builds a five-option choice set: the true element plus four distractors
// drawn from the pool excluding everything the subgraph already shows.
// Throws InsufficientDistractors when fewer than four exist.
TaskInstance make_masked_choice(const Subgraph& sub, const MultiModalKG& pool, TaskId task,
                                uint64_t seed);

// SD: untouched subgraph; gold is the stable-ordered fact list (triple lines
// as "<head label> <relation> <tail label>", then "<label>: <description>"
// for every described entity) used later as the judge reference.
TaskInstance make_description(const Subgraph& sub);

}  // namespace kgi
