#include "kginstruct/kg.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>

namespace kgi {

size_t ValidationReport::count(ValidationIssue::Kind k) const {
    size_t n = 0;
    for (const auto& issue : issues)
        if (issue.kind == k) ++n;
    return n;
}

const Entity* MultiModalKG::find_entity(const EntityId& id) const {
    auto it = entity_lookup_.find(id);
    return it == entity_lookup_.end() ? nullptr : &entities_[it->second];
}

bool MultiModalKG::has_relation(const RelationId& r) const {
    return relation_lookup_.count(r) > 0;
}

std::optional<uint32_t> MultiModalKG::entity_index(const EntityId& id) const {
    auto it = entity_lookup_.find(id);
    if (it == entity_lookup_.end()) return std::nullopt;
    return it->second;
}

void KGBuilder::add_entity(Entity e) {
    kg_.entities_.push_back(std::move(e));
}

void KGBuilder::declare_relation(const RelationId& r) {
    kg_.relations_.push_back(r);
}

void KGBuilder::add_triple(Triple t) {
    if (auto_declare_) kg_.relations_.push_back(t.relation);
    kg_.triples_.push_back(std::move(t));
}

MultiModalKG KGBuilder::finalize() {
    auto& kg = kg_;
    std::sort(kg.entities_.begin(), kg.entities_.end(),
              [](const Entity& a, const Entity& b) { return a.id < b.id; });
    std::sort(kg.relations_.begin(), kg.relations_.end());
    kg.relations_.erase(std::unique(kg.relations_.begin(), kg.relations_.end()),
                        kg.relations_.end());
    // Duplicates survive the sort on purpose: validate_graph reports them.
    std::sort(kg.triples_.begin(), kg.triples_.end());

    kg.entity_lookup_.clear();
    kg.entity_lookup_.reserve(kg.entities_.size() * 2);
    for (uint32_t i = 0; i < kg.entities_.size(); ++i)
        kg.entity_lookup_.emplace(kg.entities_[i].id, i);
    kg.relation_lookup_.clear();
    for (uint32_t i = 0; i < kg.relations_.size(); ++i)
        kg.relation_lookup_.emplace(kg.relations_[i], i);

    // Adjacency over resolvable endpoints only; validate_graph reports the rest.
    kg.incident_.assign(kg.entities_.size(), {});
    for (uint32_t t = 0; t < kg.triples_.size(); ++t) {
        const Triple& tr = kg.triples_[t];
        auto h = kg.entity_lookup_.find(tr.head);
        auto l = kg.entity_lookup_.find(tr.tail);
        if (h != kg.entity_lookup_.end()) kg.incident_[h->second].push_back(t);
        if (l != kg.entity_lookup_.end() && (h == kg.entity_lookup_.end() || l->second != h->second))
            kg.incident_[l->second].push_back(t);
    }
    kg.start_pool_.clear();
    for (uint32_t i = 0; i < kg.entities_.size(); ++i)
        if (!kg.incident_[i].empty()) kg.start_pool_.push_back(i);

    return std::move(kg_);
}

namespace {

bool sane_relative_path(const std::string& p) {
    if (p.empty()) return false;
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return false;
    for (const auto& part : fp)
        if (part == "..") return false;
    return true;
}

}  // namespace

ValidationReport validate_graph(const MultiModalKG& g) {
    ValidationReport report;

    for (const Entity& e : g.entities()) {
        if (e.label.empty())
            report.issues.push_back({ValidationIssue::Kind::EmptyLabel, "entity " + e.id});
        for (const std::string& p : e.image_paths)
            if (!sane_relative_path(p))
                report.issues.push_back(
                    {ValidationIssue::Kind::BadImagePath, "entity " + e.id + ": " + p});
    }

    for (const Triple& t : g.triples()) {
        if (!g.find_entity(t.head))
            report.issues.push_back({ValidationIssue::Kind::DanglingHead,
                                     t.head + " in (" + t.head + "," + t.relation + "," + t.tail + ")"});
        if (!g.find_entity(t.tail))
            report.issues.push_back({ValidationIssue::Kind::DanglingTail,
                                     t.tail + " in (" + t.head + "," + t.relation + "," + t.tail + ")"});
        if (!g.has_relation(t.relation))
            report.issues.push_back({ValidationIssue::Kind::UnknownRelation, t.relation});
    }

    // Duplicate detection via sorted index scan; avoids hashing every triple
    // into a transient set on million-triple graphs.
    const auto& triples = g.triples();
    std::vector<uint32_t> order(triples.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](uint32_t a, uint32_t b) { return triples[a] < triples[b]; });
    for (size_t i = 1; i < order.size(); ++i) {
        const Triple& prev = triples[order[i - 1]];
        const Triple& cur = triples[order[i]];
        if (prev == cur)
            report.issues.push_back({ValidationIssue::Kind::DuplicateTriple,
                                     "(" + cur.head + "," + cur.relation + "," + cur.tail + ")"});
    }

    return report;
}

bool Subgraph::contains_entity(const EntityId& id) const {
    return std::binary_search(entity_ids.begin(), entity_ids.end(), id);
}

bool weakly_connected(const Subgraph& sub) {
    if (sub.entity_ids.empty()) return true;

    std::map<EntityId, std::vector<const Triple*>> adj;
    for (const EntityId& id : sub.entity_ids) adj[id];
    for (const Triple& t : sub.triples) {
        adj[t.head].push_back(&t);
        adj[t.tail].push_back(&t);
    }

    std::set<EntityId> seen;
    std::deque<EntityId> frontier;
    frontier.push_back(sub.entity_ids.front());
    seen.insert(sub.entity_ids.front());
    while (!frontier.empty()) {
        EntityId cur = frontier.front();
        frontier.pop_front();
        for (const Triple* t : adj[cur]) {
            const EntityId& other = t->head == cur ? t->tail : t->head;
            if (seen.insert(other).second) frontier.push_back(other);
        }
    }
    for (const EntityId& id : sub.entity_ids)
        if (!seen.count(id)) return false;
    return true;
}

ValidationReport validate_subgraph(const Subgraph& sub, size_t max_entities) {
    ValidationReport report;
    auto note = [&](ValidationIssue::Kind k, std::string msg) {
        report.issues.push_back({k, std::move(msg)});
    };

    if (sub.entity_ids.size() > max_entities)
        note(ValidationIssue::Kind::ExceedsCap,
             "entity count " + std::to_string(sub.entity_ids.size()) + " exceeds cap");

    for (const Triple& t : sub.triples) {
        if (!sub.contains_entity(t.head))
            note(ValidationIssue::Kind::DanglingHead, t.head);
        if (!sub.contains_entity(t.tail))
            note(ValidationIssue::Kind::DanglingTail, t.tail);
    }

    if (!weakly_connected(sub))
        note(ValidationIssue::Kind::Disconnected, "subgraph not weakly connected");

    if (sub.parent) {
        for (const auto& [id, chosen] : sub.image_assignment) {
            if (!chosen) continue;
            const Entity* e = sub.parent->find_entity(id);
            bool owned = e && std::find(e->image_paths.begin(), e->image_paths.end(), *chosen) !=
                                  e->image_paths.end();
            if (!owned)
                note(ValidationIssue::Kind::BadImagePath, id + ": " + *chosen);
        }
    }

    return report;
}

}  // namespace kgi
