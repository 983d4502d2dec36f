#pragma once

// First-order-logic queries as tree-shaped computation graphs, plus the
// textual s-expression surface, the De Morgan / DNF rewrites, and exact
// set-semantics evaluation against a graph.
//
// Grammar:
//   query  := anchor | proj | conj | disj | neg
//   anchor := "(e" INT ")"
//   proj   := "(p" INT query ")"
//   conj   := "(and" query query+ ")"
//   disj   := "(or" query query+ ")"
//   neg    := "(not" query ")"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "betae/kg.hpp"

namespace betae {

enum class NodeKind : std::uint8_t {
  kAnchor,
  kProjection,
  kIntersection,
  kNegation,
  kUnion,
};

struct QueryNode {
  NodeKind kind = NodeKind::kAnchor;
  std::uint32_t id = 0;  // entity for anchors, relation for projections
  std::vector<QueryNode> children;

  friend bool operator==(const QueryNode&, const QueryNode&) = default;
};

using QueryGraph = QueryNode;
using AnswerSet = std::vector<EntityId>;  // sorted, unique

QueryNode make_anchor(EntityId v);
QueryNode make_projection(RelationId r, QueryNode child);
QueryNode make_intersection(std::vector<QueryNode> children);
QueryNode make_negation(QueryNode child);
QueryNode make_union(std::vector<QueryNode> children);

// Throws ParseError (with byte offset) on malformed input.
QueryGraph parse_query(std::string_view text);
std::string print_query(const QueryGraph& q);

// Checks anchor/relation ids against vocabulary bounds; throws
// std::out_of_range naming the offending id.
void validate_ids(const QueryGraph& q, std::uint32_t num_entities,
                  std::uint32_t num_relations);

// De Morgan rewrite: every union becomes a negated intersection of negated
// children; the result is union-free.
QueryGraph to_dm(const QueryGraph& q);

// Disjunctive normal form: lifts unions to the top, returning one
// union-free disjunct per combination. Throws std::invalid_argument when a
// negation directly encloses a union (out of template scope).
std::vector<QueryGraph> to_dnf(const QueryGraph& q);

// Exact set semantics by post-order traversal: projection unions adjacent
// entities, intersection intersects, negation complements against the full
// entity set, union merges.
AnswerSet evaluate(const QueryGraph& q, const KnowledgeGraph& g);

std::size_t node_count(const QueryGraph& q);
std::size_t count_kind(const QueryGraph& q, NodeKind kind);

// The 14 query structures used for generation and evaluation.
inline constexpr const char* kStructureNames[] = {
    "1p", "2p", "3p", "2i", "3i", "ip",  "pi",  "2u",  "up",
    "2in", "3in", "inp", "pin", "pni"};
inline constexpr std::size_t kNumStructures = 14;

// Structures a model trains on (evaluation-only: ip, pi, 2u, up).
bool is_trainable_structure(std::string_view name);
bool is_negation_structure(std::string_view name);
bool has_union(std::string_view name);

// Uninstantiated skeleton for a named structure (anchor/relation ids zero).
const QueryGraph& structure_skeleton(std::string_view name);

// Unique structure name whose skeleton matches q's shape (children of
// intersections/unions matched as a multiset); nullopt for other trees.
std::optional<std::string> structure_of(const QueryGraph& q);

}  // namespace betae
