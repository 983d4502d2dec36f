#pragma once

// Deterministic toy knowledge graphs for tests: a clustered generator whose
// held-out edges are predictable from cluster membership (so embedding
// models can generalize), plus uniformly random small graphs for oracle
// equivalence checks.

#include <string>
#include <vector>

#include "betae/kg.hpp"
#include "betae/rng.hpp"

namespace betae::testing {

struct ToySplitTriples {
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
};

// Entities split into `clusters` equal groups; each relation maps every
// cluster to a fixed target cluster (a seeded permutation) and connects
// each source entity to each entity of the target cluster with probability
// `edge_prob`.
std::vector<Triple> clustered_triples(std::uint32_t num_entities,
                                      std::uint32_t num_relations,
                                      std::uint32_t clusters,
                                      double edge_prob, Rng& rng);

// Independent uniform edges (deduplicated).
std::vector<Triple> random_triples(std::uint32_t num_entities,
                                   std::uint32_t num_relations,
                                   std::size_t count, Rng& rng);

// Moves random fractions of the edges into valid/test.
ToySplitTriples hold_out(std::vector<Triple> all, double valid_fraction,
                         double test_fraction, Rng& rng);

// Writes entities.dict / relations.dict / train.txt / valid.txt / test.txt.
void write_graph_dir(const std::string& dir, std::uint32_t num_entities,
                     std::uint32_t num_relations,
                     const ToySplitTriples& triples);

GraphSplits toy_splits(const ToySplitTriples& triples,
                       std::uint32_t num_entities,
                       std::uint32_t num_relations);

}  // namespace betae::testing
