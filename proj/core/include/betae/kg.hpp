#pragma once

// Knowledge-graph storage: vocabulary maps, triple loading, relation-indexed
// adjacency, and the cumulative train/valid/test overlays. Graphs are
// immutable once built and safe for concurrent reads.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace betae {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Bijective id <-> name maps with dense ids 0..size-1.
struct Vocab {
  std::vector<std::string> names;                    // index = id
  std::unordered_map<std::string, std::uint32_t> ids;

  std::size_t size() const { return names.size(); }
};

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(std::vector<Triple> triples, std::uint32_t num_entities,
                 std::uint32_t num_relations);

  std::uint32_t num_entities() const { return num_entities_; }
  std::uint32_t num_relations() const { return num_relations_; }
  std::size_t num_edges() const { return triples_.size(); }

  // A_r(v): tails reachable from v by relation r, sorted ascending. Absent
  // (v, r) yields an empty span.
  const std::vector<EntityId>& neighbors(EntityId v, RelationId r) const;

  // Heads u with an edge (u, r, v), sorted ascending.
  const std::vector<EntityId>& predecessors(EntityId v, RelationId r) const;

  // Relations r such that predecessors(v, r) is non-empty, sorted.
  const std::vector<RelationId>& in_relations(EntityId v) const;

  // Entities with at least one incoming edge, sorted.
  const std::vector<EntityId>& entities_with_in_edges() const {
    return has_in_edge_;
  }

  // Exact membership test on the loaded triple set (binary search; does not
  // consult the adjacency index).
  bool has_edge(EntityId h, RelationId r, EntityId t) const;

  // Sorted, deduplicated triples.
  const std::vector<Triple>& triples() const { return triples_; }

  // FNV-1a over the sorted triple list plus the vocabulary sizes.
  std::uint64_t checksum() const;

 private:
  static std::uint64_t key(EntityId v, RelationId r) {
    return (static_cast<std::uint64_t>(v) << 32) | r;
  }

  std::uint32_t num_entities_ = 0;
  std::uint32_t num_relations_ = 0;
  std::vector<Triple> triples_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> forward_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> backward_;
  std::unordered_map<EntityId, std::vector<RelationId>> in_relations_;
  std::vector<EntityId> has_in_edge_;
};

// Cumulative overlays: g_train holds training edges, g_valid adds validation
// edges, g_test adds test edges on top of that.
struct GraphSplits {
  KnowledgeGraph g_train;
  KnowledgeGraph g_valid;
  KnowledgeGraph g_test;
};

// `id<TAB>name` per line; ids must be dense from 0 and names unique.
Vocab load_vocab(const std::string& path);

// `head<TAB>relation<TAB>tail` integer ids per line, validated against the
// vocabulary sizes. Order preserved.
std::vector<Triple> load_triples(const std::string& path,
                                 std::uint32_t num_entities,
                                 std::uint32_t num_relations);

KnowledgeGraph build_graph(std::vector<Triple> triples,
                           std::uint32_t num_entities,
                           std::uint32_t num_relations);

// Splits are expected to be disjoint; overlaps are deduplicated with a
// warning.
GraphSplits build_splits(const std::vector<Triple>& train,
                         const std::vector<Triple>& valid,
                         const std::vector<Triple>& test,
                         std::uint32_t num_entities,
                         std::uint32_t num_relations);

// Materializes r^-1 as a distinct relation id r + num_relations for every
// triple, doubling the relation count.
std::vector<Triple> add_inverse_triples(const std::vector<Triple>& triples,
                                        std::uint32_t num_relations);

}  // namespace betae
