#include "kginstruct/sampler.hpp"

#include <algorithm>
#include <unordered_set>

#include "kginstruct/errors.hpp"

namespace kgi {
namespace {

// One frontier walk. Expands by traversing one untraversed incident triple of
// the chosen frontier entity per step; a frontier entity with nothing left to
// traverse is retired. When the frontier drains before the entity cap is hit,
// the walk has captured its entire weakly connected component, every triple
// included.
Subgraph walk(const MultiModalKG& g, size_t start, SplitMix64& rng, double bfs_probability,
              const SampleBudget& budget) {
    std::vector<uint32_t> frontier{static_cast<uint32_t>(start)};
    std::unordered_set<uint32_t> in_sub{static_cast<uint32_t>(start)};
    std::unordered_set<uint32_t> traversed;
    std::vector<uint32_t> sub_triples;
    size_t steps = 0;

    while (!frontier.empty() && in_sub.size() < budget.max_entities) {
        if (budget.max_expansion_steps && steps >= budget.max_expansion_steps) break;

        const bool breadth = rng.next_bool(bfs_probability);
        const size_t pos = breadth ? 0 : frontier.size() - 1;
        const uint32_t node = frontier[pos];

        // Candidates in ascending triple order keeps the pick reproducible.
        std::vector<uint32_t> candidates;
        for (uint32_t t : g.incident(node))
            if (!traversed.count(t)) candidates.push_back(t);
        if (candidates.empty()) {
            frontier.erase(frontier.begin() + static_cast<long>(pos));
            continue;
        }

        const uint32_t chosen = candidates[rng.next_below(candidates.size())];
        traversed.insert(chosen);
        sub_triples.push_back(chosen);
        ++steps;

        const Triple& tr = g.triples()[chosen];
        for (const EntityId& end : {tr.head, tr.tail}) {
            auto idx = g.entity_index(end);
            if (idx && !in_sub.count(static_cast<uint32_t>(*idx))) {
                in_sub.insert(static_cast<uint32_t>(*idx));
                frontier.push_back(static_cast<uint32_t>(*idx));
            }
        }
    }

    Subgraph sub;
    sub.parent = &g;
    sub.whole_component = frontier.empty();
    for (uint32_t i : in_sub) sub.entity_ids.push_back(g.entities()[i].id);
    std::sort(sub.entity_ids.begin(), sub.entity_ids.end());
    for (uint32_t t : sub_triples) sub.triples.push_back(g.triples()[t]);
    std::sort(sub.triples.begin(), sub.triples.end());
    return sub;
}

}  // namespace

Subgraph sample_subgraph(const MultiModalKG& g, const WalkConfig& cfg,
                         const SampleBudget& budget) {
    if (g.triples().empty())
        throw Error(Err::NoTriples, "graph \"" + g.name() + "\" has no triples");

    const auto& pool = g.start_pool();
    SplitMix64 rng(cfg.seed);

    Subgraph fallback;
    bool have_fallback = false;
    const int attempts = budget.max_restarts > 0 ? budget.max_restarts : 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        size_t start = pool[rng.next_below(pool.size())];
        Subgraph sub = walk(g, start, rng, cfg.bfs_probability, budget);
        if (sub.entity_ids.size() >= budget.min_entities) return sub;
        // Undersized walks drained their component; keep the biggest around.
        if (!sub.triples.empty() &&
            (!have_fallback || sub.entity_ids.size() > fallback.entity_ids.size())) {
            fallback = std::move(sub);
            have_fallback = true;
        }
    }
    if (have_fallback) return fallback;
    throw Error(Err::ExhaustedRetries,
                "no subgraph with at least one triple after " + std::to_string(attempts) +
                    " attempts");
}

Subgraph sample_subgraph_from(const MultiModalKG& g, size_t start_index, const WalkConfig& cfg,
                              const SampleBudget& budget) {
    if (g.triples().empty())
        throw Error(Err::NoTriples, "graph \"" + g.name() + "\" has no triples");
    if (start_index >= g.entities().size())
        throw Error(Err::ExhaustedRetries, "start index out of range");

    SplitMix64 rng(cfg.seed);
    Subgraph sub = walk(g, start_index, rng, cfg.bfs_probability, budget);
    if (sub.entity_ids.size() >= budget.min_entities) return sub;
    if (!sub.triples.empty()) return sub;  // undersized whole component
    throw Error(Err::ExhaustedRetries,
                "walk from \"" + g.entities()[start_index].id + "\" captured no triples");
}

void assign_images(const MultiModalKG& g, Subgraph& sub, uint64_t seed) {
    SplitMix64 rng(seed);
    sub.image_assignment.clear();
    for (const EntityId& id : sub.entity_ids) {
        const Entity* e = g.find_entity(id);
        if (e && !e->image_paths.empty())
            sub.image_assignment[id] = e->image_paths[rng.next_below(e->image_paths.size())];
        else
            sub.image_assignment[id] = std::nullopt;
    }
}

}  // namespace kgi
