#pragma once

// Query-benchmark generation: instantiate structure templates against a
// graph by pre-order traversal from a seed answer, split answers into
// easy/hard across graph overlays, and assemble train/valid/test datasets
// with non-trivial-answer filtering and answer-count caps.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "betae/kg.hpp"
#include "betae/query.hpp"
#include "betae/rng.hpp"

namespace betae {

struct QueryInstance {
  QueryGraph query;
  std::string structure;
  AnswerSet easy_answers;  // answers on the smaller graph
  AnswerSet hard_answers;  // answers only on the larger graph
};

enum class Split : std::uint8_t { kTrain = 0, kValid = 1, kTest = 2 };
const char* split_name(Split s);

struct SplitQueries {
  // Keyed by structure name, in kStructureNames order when iterated via
  // structures().
  std::map<std::string, std::vector<QueryInstance>> by_structure;

  std::size_t total() const;
};

struct QueryDataset {
  std::uint64_t seed = 0;
  // Checksums of the graphs each split was generated against
  // (small overlay, large overlay).
  std::uint64_t graph_checksum[3][2] = {};
  SplitQueries splits[3];

  SplitQueries& split(Split s) { return splits[static_cast<int>(s)]; }
  const SplitQueries& split(Split s) const {
    return splits[static_cast<int>(s)];
  }
};

struct GenerateConfig {
  std::uint64_t seed = 1;
  std::size_t train_per_structure = 200;  // per conjunctive structure
  double negation_fraction = 0.1;         // negation count = train * this
  std::size_t eval_per_structure = 50;    // valid/test, per structure
  std::size_t max_answers = 100;          // valid/test cap
  std::size_t retry_budget = 100;         // attempts per requested instance
  bool exhaustive_1p = false;             // enumerate new edges for 1p eval
};

// Instantiates `skeleton` so the sampled seed answer is guaranteed to be an
// answer on g. Returns nullopt on a sampling dead end (caller retries).
std::optional<QueryGraph> instantiate(const QueryGraph& skeleton,
                                      const KnowledgeGraph& g, Rng& rng);

// easy = evaluate(q, g_small); hard = evaluate(q, g_big) \ easy.
std::pair<AnswerSet, AnswerSet> split_answers(const QueryGraph& q,
                                              const KnowledgeGraph& g_small,
                                              const KnowledgeGraph& g_big);

// Fills per-structure query lists for all three splits. Emits a warning and
// returns a partial dataset when the retry budget is exhausted.
QueryDataset generate_dataset(const GraphSplits& graphs,
                              const GenerateConfig& config);

// Random (not answer-seeded) instantiation used for empty-answer pools.
QueryGraph sample_random_query(const QueryGraph& skeleton,
                               const KnowledgeGraph& g, Rng& rng);

// Queries of the given structure with evaluate(q, g) == empty, and queries
// with more than `min_answers` answers. Either pool may come back short of
// `count` when the attempt budget runs out.
std::vector<QueryGraph> sample_empty_queries(const std::string& structure,
                                             const KnowledgeGraph& g,
                                             std::size_t count, Rng& rng,
                                             std::size_t budget = 20000);
std::vector<QueryInstance> sample_answered_queries(
    const std::string& structure, const KnowledgeGraph& g, std::size_t count,
    std::size_t min_answers, Rng& rng, std::size_t budget = 20000);

// One file per split under `dir` (train.queries / valid.queries /
// test.queries). Line format:
//   structure<TAB>dsl<TAB>easy-ids(comma)<TAB>hard-ids(comma)
// preceded by a header carrying the seed and graph checksums.
void save_dataset(const QueryDataset& dataset, const std::string& dir);
QueryDataset load_dataset(const std::string& dir);

}  // namespace betae
