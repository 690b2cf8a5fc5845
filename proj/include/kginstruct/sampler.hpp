#pragma once

#include <cstdint>

#include "kginstruct/kg.hpp"
#include "kginstruct/rng.hpp"

namespace kgi {

struct SampleBudget {
    size_t max_entities = 9;          // hard cap on subgraph size
    size_t min_entities = 3;          // below this a walk result needs a restart
    size_t max_expansion_steps = 0;   // defensive cap on triple traversals, 0 = off
    int max_restarts = 16;            // fresh starts before falling back
};

struct WalkConfig {
    // Per expansion step a coin with this probability chooses breadth-first
    // (expand the oldest frontier entity) over depth-first (the newest).
    double bfs_probability = 0.5;
    uint64_t seed = 0;
};

// Samples a connected subgraph by randomized frontier expansion from a uniform
// start among entities with at least one incident triple. Restarts (fresh
// start, same RNG stream) until a walk reaches min_entities; when every
// attempt lands in an undersized component, returns the largest whole
// component seen with whole_component=true. Throws NoTriples when the graph
// has no triples at all, ExhaustedRetries when nothing with at least one
// triple can be produced.
Subgraph sample_subgraph(const MultiModalKG& g, const WalkConfig& cfg,
                         const SampleBudget& budget = {});

// Single walk from a caller-chosen start entity; same acceptance rules but no
// restarts. An isolated start yields one entity and zero triples, which is
// never acceptable, so it throws ExhaustedRetries.
Subgraph sample_subgraph_from(const MultiModalKG& g, size_t start_index,
                              const WalkConfig& cfg, const SampleBudget& budget = {});

// Picks one display image per subgraph entity that has any, uniformly from
// that entity's own images; entities without images get an empty assignment.
// One RNG stream over entities in sorted-id order, so the result depends only
// on (subgraph, seed).
void assign_images(const MultiModalKG& g, Subgraph& sub, uint64_t seed);

}  // namespace kgi
