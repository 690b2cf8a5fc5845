#include "kginstruct/taskgen.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>
#include <tuple>

#include "kginstruct/errors.hpp"
#include "kginstruct/rng.hpp"

namespace kgi {

const char* task_short_name(TaskId task) {
    switch (task) {
        case TaskId::EC: return "ec";
        case TaskId::RC: return "rc";
        case TaskId::IC: return "ic";
        case TaskId::TC: return "tc";
        case TaskId::SD: return "sd";
        case TaskId::ED: return "ed";
        case TaskId::ER: return "er";
        case TaskId::RR: return "rr";
    }
    return "??";
}

std::optional<TaskId> task_from_string(std::string_view s) {
    std::string lower;
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (TaskId t : kAllTasks) {
        if (lower == task_short_name(t)) return t;
        if (lower == std::to_string(static_cast<int>(t))) return t;
    }
    return std::nullopt;
}

const ProcEntity* ProcessedSubgraph::find(const EntityId& id) const {
    auto it = std::lower_bound(entities.begin(), entities.end(), id,
                               [](const ProcEntity& e, const EntityId& v) { return e.id < v; });
    return (it != entities.end() && it->id == id) ? &*it : nullptr;
}

namespace {

void sort_processed(ProcessedSubgraph& p) {
    std::sort(p.entities.begin(), p.entities.end(),
              [](const ProcEntity& a, const ProcEntity& b) { return a.id < b.id; });
    std::sort(p.triples.begin(), p.triples.end(), [](const ProcTriple& a, const ProcTriple& b) {
        return std::tie(a.head, a.relation, a.tail) < std::tie(b.head, b.relation, b.tail);
    });
}

ProcessedSubgraph from_subgraph(const Subgraph& sub) {
    if (!sub.parent) throw std::invalid_argument("subgraph has no parent graph");
    ProcessedSubgraph p;
    p.asset_root = sub.parent->root_dir();
    for (const EntityId& id : sub.entity_ids) {
        const Entity* e = sub.parent->find_entity(id);
        if (!e) throw std::invalid_argument("subgraph entity \"" + id + "\" not in parent");
        ProcEntity pe;
        pe.id = e->id;
        pe.label = e->label;
        pe.description = e->description;
        if (auto it = sub.image_assignment.find(id); it != sub.image_assignment.end())
            pe.image = it->second;
        p.entities.push_back(std::move(pe));
    }
    for (const Triple& t : sub.triples) p.triples.push_back({t.head, t.relation, t.tail, false});
    sort_processed(p);
    return p;
}

TaskInstance base_instance(const Subgraph& sub, TaskId task, uint64_t seed) {
    TaskInstance inst;
    inst.task = task;
    inst.processed = from_subgraph(sub);
    inst.seed = seed;
    inst.source_graph_name = sub.parent->name();
    return inst;
}

// Uniform pick of a pool entity whose id is outside `excluded`: rejection
// sampling first (pools dwarf subgraphs in practice), deterministic full scan
// when unlucky or when the pool is nearly covered.
const Entity* pick_outside(const MultiModalKG& pool, const std::set<EntityId>& excluded,
                           SplitMix64& rng) {
    const auto& all = pool.entities();
    if (all.size() > excluded.size()) {
        for (int tries = 0; tries < 64; ++tries) {
            const Entity& e = all[rng.next_below(all.size())];
            if (!excluded.count(e.id)) return &e;
        }
    }
    std::vector<const Entity*> outside;
    for (const Entity& e : all)
        if (!excluded.count(e.id)) outside.push_back(&e);
    if (outside.empty()) return nullptr;
    return outside[rng.next_below(outside.size())];
}

}  // namespace

TaskInstance make_counting(const Subgraph& sub, TaskId task) {
    if (task != TaskId::EC && task != TaskId::RC && task != TaskId::TC)
        throw std::invalid_argument("make_counting handles EC/RC/TC only");
    TaskInstance inst = base_instance(sub, task, 0);
    long value = 0;
    switch (task) {
        case TaskId::EC:
            value = static_cast<long>(inst.processed.entities.size());
            break;
        case TaskId::RC: {
            std::set<RelationId> distinct;
            for (const auto& t : inst.processed.triples) distinct.insert(t.relation);
            value = static_cast<long>(distinct.size());
            break;
        }
        default:
            value = static_cast<long>(inst.processed.triples.size());
            break;
    }
    inst.gold = CountGold{value};
    return inst;
}

TaskInstance make_image_counting(const Subgraph& sub, uint64_t seed) {
    TaskInstance inst = base_instance(sub, TaskId::IC, seed);

    std::vector<size_t> with_image;
    for (size_t i = 0; i < inst.processed.entities.size(); ++i)
        if (inst.processed.entities[i].image) with_image.push_back(i);
    if (with_image.empty())
        throw Error(Err::NoImages, "no entity in the subgraph has an assigned image");

    SplitMix64 rng(seed);
    size_t removed = 0;
    if (with_image.size() == 1) {
        inst.processed.degenerate = true;  // nothing can go without emptying the task
    } else {
        removed = 1 + rng.next_below(with_image.size() - 1);
        shuffle(with_image, rng);
        for (size_t i = 0; i < removed; ++i)
            inst.processed.entities[with_image[i]].image.reset();
    }
    inst.gold = CountGold{static_cast<long>(with_image.size() - removed)};
    return inst;
}

TaskInstance make_error_detection(const Subgraph& sub, const MultiModalKG& pool, uint64_t seed) {
    TaskInstance inst = base_instance(sub, TaskId::ED, seed);
    auto& p = inst.processed;

    SplitMix64 rng(seed);
    const size_t victim_idx = rng.next_below(p.entities.size());
    const EntityId victim_id = p.entities[victim_idx].id;

    std::set<EntityId> excluded(sub.entity_ids.begin(), sub.entity_ids.end());
    const Entity* repl = pick_outside(pool, excluded, rng);
    if (!repl)
        throw Error(Err::NoDistractor, "every pool entity already appears in the subgraph");

    ProcEntity swapped;
    swapped.id = repl->id;
    swapped.label = repl->label;
    swapped.description = repl->description;
    if (!repl->image_paths.empty())
        swapped.image = repl->image_paths[rng.next_below(repl->image_paths.size())];
    p.entities[victim_idx] = std::move(swapped);

    // Rewire: the foreign entity inherits every edge of the one it displaced.
    // Since the replacement id was not present before, this renaming cannot
    // collide two triples into one.
    for (auto& t : p.triples) {
        if (t.head == victim_id) t.head = repl->id;
        if (t.tail == victim_id) t.tail = repl->id;
    }
    sort_processed(p);

    inst.gold = EntityGold{repl->id, repl->label};
    return inst;
}

TaskInstance make_masked_choice(const Subgraph& sub, const MultiModalKG& pool, TaskId task,
                                uint64_t seed) {
    if (task != TaskId::ER && task != TaskId::RR)
        throw std::invalid_argument("make_masked_choice handles ER/RR only");
    TaskInstance inst = base_instance(sub, task, seed);
    auto& p = inst.processed;
    SplitMix64 rng(seed);

    std::string correct;
    std::vector<std::string> distractors;

    if (task == TaskId::ER) {
        if (p.entities.size() < 2)
            throw std::invalid_argument("entity masking needs at least 2 entities");
        ProcEntity& victim = p.entities[rng.next_below(p.entities.size())];
        correct = victim.label;
        victim.label = "[MASK]";
        victim.description.clear();
        victim.image.reset();
        victim.masked = true;

        // Distractor labels: anything the subgraph does not already show.
        std::set<std::string> shown;
        for (const EntityId& id : sub.entity_ids) shown.insert(sub.parent->find_entity(id)->label);
        const auto& all = pool.entities();
        std::set<std::string> chosen;
        for (int tries = 0; tries < 256 && chosen.size() < 4; ++tries) {
            const std::string& cand = all[rng.next_below(all.size())].label;
            if (!shown.count(cand)) chosen.insert(cand);
        }
        if (chosen.size() < 4) {
            // Small pools: enumerate every usable label and draw the rest.
            std::set<std::string> candidates;
            for (const Entity& e : all)
                if (!shown.count(e.label)) candidates.insert(e.label);
            std::vector<std::string> flat(candidates.begin(), candidates.end());
            shuffle(flat, rng);
            for (const auto& c : flat) {
                if (chosen.size() >= 4) break;
                chosen.insert(c);
            }
        }
        if (chosen.size() < 4)
            throw Error(Err::InsufficientDistractors,
                        "pool offers only " + std::to_string(chosen.size()) +
                            " usable entity labels");
        distractors.assign(chosen.begin(), chosen.end());
    } else {
        if (p.triples.empty())
            throw std::invalid_argument("relation masking needs at least 1 triple");
        ProcTriple& victim = p.triples[rng.next_below(p.triples.size())];
        correct = victim.relation;
        victim.relation = "[MASK]";
        victim.relation_masked = true;

        std::set<RelationId> shown;
        for (const Triple& t : sub.triples) shown.insert(t.relation);
        std::vector<std::string> candidates;
        for (const RelationId& r : pool.relations())
            if (!shown.count(r)) candidates.push_back(r);
        if (candidates.size() < 4)
            throw Error(Err::InsufficientDistractors,
                        "relation vocabulary offers only " + std::to_string(candidates.size()) +
                            " distractors");
        shuffle(candidates, rng);
        distractors.assign(candidates.begin(), candidates.begin() + 4);
    }

    ChoiceGold gold;
    std::vector<std::string> options;
    options.push_back(correct);
    for (size_t i = 0; i < 4; ++i) options.push_back(distractors[i]);
    shuffle(options, rng);
    for (size_t i = 0; i < 5; ++i) {
        gold.options[i] = options[i];
        if (options[i] == correct) gold.correct_letter = static_cast<char>('A' + i);
    }
    gold.correct_text = correct;
    inst.gold = gold;

    // RR victims move under the sort key when the mask renames the relation.
    sort_processed(p);
    return inst;
}

TaskInstance make_description(const Subgraph& sub) {
    TaskInstance inst = base_instance(sub, TaskId::SD, 0);
    FactsGold gold;
    for (const auto& t : inst.processed.triples) {
        const ProcEntity* h = inst.processed.find(t.head);
        const ProcEntity* l = inst.processed.find(t.tail);
        gold.facts.push_back((h ? h->label : t.head) + " " + t.relation + " " +
                             (l ? l->label : t.tail));
    }
    for (const auto& e : inst.processed.entities)
        if (!e.description.empty()) gold.facts.push_back(e.label + ": " + e.description);
    inst.gold = std::move(gold);
    return inst;
}

}  // namespace kgi
