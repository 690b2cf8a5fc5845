#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "kginstruct/errors.hpp"
#include "kginstruct/sampler.hpp"
#include "testutil.hpp"

using namespace kgi;
using test::toy_graph;

namespace {

// Path 0-1-2-...-(n-1), ids zero-padded so sorted order equals path order.
MultiModalKG path_graph(int n) {
    KGBuilder b("path");
    auto id = [](int i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "p%03d", i);
        return std::string(buf);
    };
    for (int i = 0; i < n; ++i) b.add_entity({id(i), "P" + std::to_string(i), "", {}});
    for (int i = 0; i + 1 < n; ++i) b.add_triple({id(i), "next", id(i + 1)});
    return std::move(b).finalize();
}

// Complete binary tree with `depth` edge levels below the root.
MultiModalKG binary_tree(int depth) {
    KGBuilder b("tree");
    auto id = [](int i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "t%03d", i);
        return std::string(buf);
    };
    int total = (1 << (depth + 1)) - 1;
    for (int i = 0; i < total; ++i) b.add_entity({id(i), "T" + std::to_string(i), "", {}});
    for (int i = 1; i < total; ++i) b.add_triple({id((i - 1) / 2), "child", id(i)});
    return std::move(b).finalize();
}

// All triples of g incident to any entity of `ids` (the component closure
// check for whole-component samples).
std::vector<Triple> incident_closure(const MultiModalKG& g, const std::set<EntityId>& ids) {
    std::vector<Triple> out;
    for (const auto& t : g.triples())
        if (ids.count(t.head) || ids.count(t.tail)) out.push_back(t);
    return out;
}

}  // namespace

TEST_CASE("graph without triples is rejected") {
    KGBuilder b("empty");
    b.add_entity({"a", "A", "", {}});
    auto g = std::move(b).finalize();
    CHECK_THROWS_AS(sample_subgraph(g, {}), Error);
    try {
        sample_subgraph(g, {});
    } catch (const Error& e) {
        CHECK(e.code() == Err::NoTriples);
    }
}

TEST_CASE("walk from an isolated entity cannot produce a sample") {
    auto g = toy_graph();  // f is isolated
    auto f_idx = g.entity_index("f");
    REQUIRE(f_idx.has_value());
    try {
        sample_subgraph_from(g, *f_idx, {});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Err::ExhaustedRetries);
    }
}

TEST_CASE("small component comes back whole, flagged, with every triple") {
    auto g = toy_graph();  // one component of 5 entities + isolated f
    WalkConfig cfg;
    cfg.seed = 7;
    auto sub = sample_subgraph(g, cfg);

    CHECK(sub.entity_ids == std::vector<EntityId>{"a", "b", "c", "d", "e"});
    CHECK(sub.triples.size() == 5);
    CHECK(sub.whole_component);
    CHECK(validate_subgraph(sub, 9).ok());

    std::set<EntityId> ids(sub.entity_ids.begin(), sub.entity_ids.end());
    CHECK(sub.triples == incident_closure(g, ids));
}

TEST_CASE("undersized components fall back after restarts") {
    // Two tiny components (one triple each); min_entities=3 is unreachable, so
    // the sampler must fall back to a whole component instead of throwing.
    KGBuilder b("tiny");
    for (const char* id : {"a", "b", "c", "d"})
        b.add_entity({id, std::string(1, std::toupper(id[0])), "", {}});
    b.add_triple({"a", "r", "b"});
    b.add_triple({"c", "r", "d"});
    auto g = std::move(b).finalize();

    WalkConfig cfg;
    cfg.seed = 11;
    auto sub = sample_subgraph(g, cfg);
    CHECK(sub.entity_ids.size() == 2);
    CHECK(sub.triples.size() == 1);
    CHECK(sub.whole_component);
}

TEST_CASE("sampling is deterministic in the seed") {
    auto g = path_graph(200);
    WalkConfig a;
    a.seed = 123;
    auto s1 = sample_subgraph(g, a);
    auto s2 = sample_subgraph(g, a);
    CHECK(s1.entity_ids == s2.entity_ids);
    CHECK(s1.triples == s2.triples);

    // Different seeds should explore different regions at least sometimes.
    int distinct = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        WalkConfig c;
        c.seed = seed;
        if (sample_subgraph(g, c).entity_ids != s1.entity_ids) ++distinct;
    }
    CHECK(distinct > 0);
}

TEST_CASE("walk invariants hold across many seeds") {
    // Random-ish connected graph: a 300-entity ring with 200 chords.
    KGBuilder b("ring");
    auto id = [](int i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "n%03d", i);
        return std::string(buf);
    };
    for (int i = 0; i < 300; ++i) b.add_entity({id(i), "N", "", {}});
    for (int i = 0; i < 300; ++i) b.add_triple({id(i), "ring", id((i + 1) % 300)});
    SplitMix64 gen(99);
    std::set<std::pair<int, int>> used;
    int added = 0;
    while (added < 200) {
        int h = static_cast<int>(gen.next_below(300));
        int t = static_cast<int>(gen.next_below(300));
        if (h == t || !used.insert({h, t}).second) continue;
        b.add_triple({id(h), "chord", id(t)});
        ++added;
    }
    auto g = std::move(b).finalize();

    SampleBudget budget;
    for (uint64_t seed = 0; seed < 2000; ++seed) {
        WalkConfig cfg;
        cfg.seed = seed;
        auto sub = sample_subgraph(g, cfg, budget);
        REQUIRE(sub.entity_ids.size() >= budget.min_entities);
        REQUIRE(sub.entity_ids.size() <= budget.max_entities);
        REQUIRE(validate_subgraph(sub, budget.max_entities).ok());
        REQUIRE(test::oracle_weakly_connected(sub));
        REQUIRE(!sub.triples.empty());
    }
}

TEST_CASE("first expansion picks incident triples uniformly") {
    // Star: center with 4 spokes. A 2-entity walk keeps exactly one spoke;
    // each should appear in roughly a quarter of many runs.
    KGBuilder b("star");
    b.add_entity({"center", "C", "", {}});
    for (int i = 0; i < 4; ++i)
        b.add_entity({"s" + std::to_string(i), "S", "", {}});
    for (int i = 0; i < 4; ++i)
        b.add_triple({"center", "spoke", "s" + std::to_string(i)});
    auto g = std::move(b).finalize();
    auto center = g.entity_index("center");
    REQUIRE(center.has_value());

    SampleBudget budget;
    budget.max_entities = 2;
    budget.min_entities = 2;
    std::map<EntityId, int> hits;
    const int draws = 3000;
    for (int i = 0; i < draws; ++i) {
        WalkConfig cfg;
        cfg.seed = 1000 + static_cast<uint64_t>(i);
        auto sub = sample_subgraph_from(g, *center, cfg, budget);
        REQUIRE(sub.triples.size() == 1);
        hits[sub.triples[0].tail]++;
    }
    for (const auto& [tail, count] : hits) {
        CAPTURE(tail);
        double share = 100.0 * count / draws;
        CHECK(share > 20.0);  // expected 25 +/- 5
        CHECK(share < 30.0);
    }
}

TEST_CASE("breadth and depth coins shape the walk") {
    auto g = binary_tree(4);  // 31 entities
    auto root = g.entity_index("t000");
    REQUIRE(root.has_value());
    SampleBudget budget;
    budget.max_entities = 5;
    budget.min_entities = 5;

    auto max_depth = [&](const Subgraph& sub) {
        int best = 0;
        for (const auto& id : sub.entity_ids) {
            int n = std::stoi(id.substr(1));
            int d = 0;
            while (n > 0) {
                n = (n - 1) / 2;
                ++d;
            }
            best = std::max(best, d);
        }
        return best;
    };

    for (uint64_t seed = 0; seed < 50; ++seed) {
        WalkConfig bfs;
        bfs.bfs_probability = 1.0;
        bfs.seed = seed;
        // 5 entities breadth-first from the root never leave the top 2 levels.
        CHECK(max_depth(sample_subgraph_from(g, *root, bfs, budget)) <= 2);

        WalkConfig dfs;
        dfs.bfs_probability = 0.0;
        dfs.seed = seed;
        // Depth-first always dives: root + a chain of 4.
        CHECK(max_depth(sample_subgraph_from(g, *root, dfs, budget)) == 4);
    }
}

TEST_CASE("image assignment is per-entity, owned, and seed-stable") {
    test::TmpDir tmp;
    auto g = toy_graph(tmp.path);
    WalkConfig cfg;
    cfg.seed = 5;
    auto sub = sample_subgraph(g, cfg);

    assign_images(g, sub, 42);
    CHECK(validate_subgraph(sub, 9).ok());
    CHECK(sub.image_assignment.size() == sub.entity_ids.size());
    CHECK(sub.image_assignment.at("c") == std::nullopt);
    REQUIRE(sub.image_assignment.at("a").has_value());
    CHECK(*sub.image_assignment.at("a") == "images/a.png");

    auto first = sub.image_assignment;
    assign_images(g, sub, 42);
    CHECK(sub.image_assignment == first);

    // d has two images; across seeds both must show up.
    std::set<std::string> seen;
    for (uint64_t s = 0; s < 40; ++s) {
        assign_images(g, sub, s);
        seen.insert(*sub.image_assignment.at("d"));
    }
    CHECK(seen == std::set<std::string>{"images/d1.png", "images/d2.png"});
}
