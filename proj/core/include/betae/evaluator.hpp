#pragma once

// Ranking and uncertainty evaluation: filtered mean reciprocal rank and
// Hits@K over non-trivial (hard) answers, rank correlations between query
// entropy and answer-set size, and entropy-based empty-answer
// classification scored with the rank-statistic ROC-AUC.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "betae/model.hpp"
#include "betae/sampler.hpp"

namespace betae {

struct StructureMetrics {
  double mrr = 0.0;
  double h1 = 0.0;
  double h3 = 0.0;
  double h10 = 0.0;
  std::size_t pairs = 0;    // evaluated (query, hard answer) pairs
  std::size_t queries = 0;
};

struct RankingMetrics {
  // Keyed by structure label; union structures get one entry per mode
  // ("2u dnf", "2u dm") when both are requested.
  std::map<std::string, StructureMetrics> per_structure;
  // Unweighted means over the union-free-label structures present, as in
  // the usual reporting layout (DNF rows stand in for 2u/up).
  std::optional<double> epfo_avg_mrr;
  std::optional<double> negation_avg_mrr;
};

struct RankRecord {
  std::uint64_t query_id = 0;
  EntityId answer = 0;
  double rank = 0.0;  // half-integers possible under tie averaging
  std::string structure;
};

struct UncertaintyReport {
  struct Entry {
    std::optional<double> srcc;
    std::optional<double> pcc;
    std::size_t queries = 0;
  };
  std::map<std::string, Entry> per_structure;
};

struct AucReport {
  std::map<std::string, double> per_structure;
  double overall = 0.0;
  std::size_t positives = 0;  // empty-answer queries
  std::size_t negatives = 0;
};

enum class EvalUnion : std::uint8_t { kDnf = 0, kDm = 1, kBoth = 2 };

// Filtered rank of `answer` among scores: candidates are the entities
// outside `filter` plus the answer itself; ties contribute half weight
// (mean of optimistic and pessimistic rank). Lower score = better.
double filtered_rank(const std::vector<double>& scores, EntityId answer,
                     const AnswerSet& filter);

// Scores every entity against one query (distance; DNF = min over
// disjuncts).
std::vector<double> score_all_entities(const Model& model,
                                       const std::vector<BetaVector>& entities,
                                       const QueryGraph& query, bool use_dnf);

// Metrics over the hard answers of `split`, restricted to `structures` when
// non-empty. `records` (optional) receives one row per (query, answer) pair
// in evaluation order. `threads` > 1 parallelizes query scoring.
RankingMetrics evaluate_split(const Model& model, const QueryDataset& dataset,
                              Split split, EvalUnion union_mode,
                              std::vector<RankRecord>* records = nullptr,
                              int threads = 1);

// Spearman and Pearson correlation between query-embedding entropy (De
// Morgan embedding) and answer-set cardinality, per structure. Structures
// with fewer than 3 queries or zero variance report absent values.
UncertaintyReport uncertainty_correlation(
    const Model& model,
    const std::map<std::string, std::vector<QueryInstance>>& queries,
    int threads = 1);

// Mann-Whitney ROC-AUC of entropy as an empty-answer score; `empty` are the
// positive class. Throws std::invalid_argument when a pool is empty.
AucReport empty_answer_auc(
    const Model& model,
    const std::map<std::string, std::vector<QueryGraph>>& empty,
    const std::map<std::string, std::vector<QueryInstance>>& answered);

// Aligned text table plus machine-readable `structure<TAB>metric<TAB>value`
// records.
void print_ranking_report(std::ostream& out, const RankingMetrics& metrics);
void write_ranking_records(std::ostream& out, const RankingMetrics& metrics);
void write_rank_dump(std::ostream& out,
                     const std::vector<RankRecord>& records);

// Helpers shared with tests and the correlation report.
std::optional<double> pearson(const std::vector<double>& x,
                              const std::vector<double>& y);
std::optional<double> spearman(const std::vector<double>& x,
                               const std::vector<double>& y);
double rank_statistic_auc(const std::vector<double>& positive_scores,
                          const std::vector<double>& negative_scores);

}  // namespace betae
