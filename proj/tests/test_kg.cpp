#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <set>

#include "kginstruct/kg.hpp"
#include "kginstruct/rng.hpp"
#include "testutil.hpp"

using namespace kgi;
using test::toy_graph;

TEST_CASE("builder finalizes into sorted, deduplicated views") {
    KGBuilder b("g");
    b.add_entity({"z", "Z", "", {}});
    b.add_entity({"m", "M", "", {}});
    b.add_entity({"a", "A", "", {}});
    b.add_triple({"z", "rel_b", "m"});
    b.add_triple({"a", "rel_a", "z"});
    b.add_triple({"m", "rel_a", "a"});
    auto g = std::move(b).finalize();

    REQUIRE(g.entities().size() == 3);
    CHECK(g.entities()[0].id == "a");
    CHECK(g.entities()[1].id == "m");
    CHECK(g.entities()[2].id == "z");
    CHECK(g.relations() == std::vector<RelationId>{"rel_a", "rel_b"});
    CHECK(std::is_sorted(g.triples().begin(), g.triples().end()));
    CHECK(g.name() == "g");
}

TEST_CASE("entity lookup and incidence") {
    auto g = toy_graph();
    REQUIRE(g.find_entity("d") != nullptr);
    CHECK(g.find_entity("d")->label == "Delta");
    CHECK(g.find_entity("nope") == nullptr);

    // d touches: c->d, d->a, d->e
    auto idx = g.entity_index("d");
    REQUIRE(idx.has_value());
    CHECK(g.incident(*idx).size() == 3);

    // f is isolated and must not be in the walk start pool.
    auto f_idx = g.entity_index("f");
    REQUIRE(f_idx.has_value());
    CHECK(g.incident(*f_idx).empty());
    auto pool = g.start_pool();
    CHECK(pool.size() == 5);
    CHECK(std::find(pool.begin(), pool.end(), *f_idx) == pool.end());
}

TEST_CASE("self-loop appears once in incidence") {
    KGBuilder b("loop");
    b.add_entity({"x", "X", "", {}});
    b.add_triple({"x", "self", "x"});
    auto g = std::move(b).finalize();
    CHECK(g.incident(0).size() == 1);
}

TEST_CASE("validate_graph flags each defect kind") {
    using Kind = ValidationIssue::Kind;

    SUBCASE("clean graph passes") {
        auto r = validate_graph(toy_graph());
        CHECK(r.ok());
    }
    SUBCASE("empty label") {
        KGBuilder b("g");
        b.add_entity({"a", "", "", {}});
        b.add_entity({"b", "B", "", {}});
        b.add_triple({"a", "r", "b"});
        auto r = validate_graph(std::move(b).finalize());
        CHECK(r.count(Kind::EmptyLabel) == 1);
    }
    SUBCASE("absolute and escaping image paths") {
        KGBuilder b("g");
        b.add_entity({"a", "A", "", {"/etc/passwd"}});
        b.add_entity({"b", "B", "", {"../up.png"}});
        b.add_triple({"a", "r", "b"});
        auto r = validate_graph(std::move(b).finalize());
        CHECK(r.count(Kind::BadImagePath) == 2);
    }
    SUBCASE("dangling endpoints") {
        KGBuilder b("g");
        b.add_entity({"a", "A", "", {}});
        b.add_triple({"a", "r", "ghost"});
        b.add_triple({"phantom", "r", "a"});
        auto r = validate_graph(std::move(b).finalize());
        CHECK(r.count(Kind::DanglingTail) == 1);
        CHECK(r.count(Kind::DanglingHead) == 1);
    }
    SUBCASE("undeclared relation when auto-declare is off") {
        KGBuilder b("g", /*auto_declare_relations=*/false);
        b.add_entity({"a", "A", "", {}});
        b.add_entity({"b", "B", "", {}});
        b.declare_relation("known");
        b.add_triple({"a", "known", "b"});
        b.add_triple({"b", "unknown", "a"});
        auto r = validate_graph(std::move(b).finalize());
        CHECK(r.count(Kind::UnknownRelation) == 1);
    }
    SUBCASE("duplicate triples") {
        KGBuilder b("g");
        b.add_entity({"a", "A", "", {}});
        b.add_entity({"b", "B", "", {}});
        b.add_triple({"a", "r", "b"});
        b.add_triple({"a", "r", "b"});
        b.add_triple({"a", "r", "b"});
        auto r = validate_graph(std::move(b).finalize());
        // Three copies -> two extras.
        CHECK(r.count(Kind::DuplicateTriple) == 2);
    }
}

TEST_CASE("subgraph connectivity and validation") {
    auto g = toy_graph();

    Subgraph sub;
    sub.parent = &g;
    sub.entity_ids = {"a", "b", "c"};
    sub.triples = {{"a", "linked_to", "b"}, {"b", "linked_to", "c"}};
    CHECK(weakly_connected(sub));
    CHECK(validate_subgraph(sub, 9).ok());

    SUBCASE("disconnected pair flagged") {
        sub.entity_ids = {"a", "b", "e"};
        sub.triples = {{"a", "linked_to", "b"}};
        CHECK_FALSE(weakly_connected(sub));
        auto r = validate_subgraph(sub, 9);
        CHECK(r.count(ValidationIssue::Kind::Disconnected) == 1);
    }
    SUBCASE("entity cap enforced") {
        auto r = validate_subgraph(sub, 2);
        CHECK(r.count(ValidationIssue::Kind::ExceedsCap) == 1);
    }
    SUBCASE("triple endpoint outside the entity set") {
        sub.triples.push_back({"c", "part_of", "d"});  // d not in entity_ids
        auto r = validate_subgraph(sub, 9);
        CHECK_FALSE(r.ok());
    }
    SUBCASE("image assignment must come from the entity's own images") {
        sub.image_assignment["a"] = "images/b.png";  // belongs to b
        auto r = validate_subgraph(sub, 9);
        CHECK_FALSE(r.ok());
        sub.image_assignment["a"] = "images/a.png";
        sub.image_assignment["b"] = std::nullopt;
        CHECK(validate_subgraph(sub, 9).ok());
    }
}

TEST_CASE("weakly_connected agrees with a union-find oracle on random subgraphs") {
    // Random graph over 40 entities, then random entity subsets with all
    // induced triples; the two connectivity answers must always agree.
    KGBuilder b("rand");
    for (int i = 0; i < 40; ++i)
        b.add_entity({"n" + std::to_string(i), "N" + std::to_string(i), "", {}});
    SplitMix64 rng(20240817);
    std::set<std::array<uint64_t, 2>> used;
    for (int i = 0; i < 70; ++i) {
        uint64_t h = rng.next_below(40), t = rng.next_below(40);
        if (!used.insert({h, t}).second) continue;
        b.add_triple({"n" + std::to_string(h), "r", "n" + std::to_string(t)});
    }
    auto g = std::move(b).finalize();

    for (int trial = 0; trial < 500; ++trial) {
        std::set<EntityId> picked;
        size_t want = 1 + rng.next_below(9);
        while (picked.size() < want)
            picked.insert(g.entities()[rng.next_below(g.entities().size())].id);

        Subgraph sub;
        sub.parent = &g;
        sub.entity_ids.assign(picked.begin(), picked.end());
        for (const auto& t : g.triples())
            if (picked.count(t.head) && picked.count(t.tail)) sub.triples.push_back(t);

        CHECK(weakly_connected(sub) == test::oracle_weakly_connected(sub));
    }
}
