#include "betae/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "betae/errors.hpp"

namespace betae {

double filtered_rank(const std::vector<double>& scores, EntityId answer,
                     const AnswerSet& filter) {
  const double target = scores[answer];
  std::size_t better = 0;
  std::size_t ties = 0;
  for (EntityId v = 0; v < scores.size(); ++v) {
    if (v == answer) continue;
    if (std::binary_search(filter.begin(), filter.end(), v)) continue;
    if (scores[v] < target) {
      ++better;
    } else if (scores[v] == target) {
      ++ties;
    }
  }
  // Mean of the optimistic and pessimistic rank among score ties.
  return 1.0 + static_cast<double>(better) + static_cast<double>(ties) / 2.0;
}

std::vector<double> score_all_entities(const Model& model,
                                       const std::vector<BetaVector>& entities,
                                       const QueryGraph& query, bool use_dnf) {
  std::vector<BetaVector> embeddings;
  if (use_dnf) {
    embeddings = model.embed_query_dnf(query);
  } else {
    embeddings.push_back(model.embed_query(query));
  }
  std::vector<double> scores(entities.size(), 0.0);
  for (std::size_t v = 0; v < entities.size(); ++v) {
    double best = model.distance(entities[v], embeddings[0]);
    for (std::size_t d = 1; d < embeddings.size(); ++d) {
      best = std::min(best, model.distance(entities[v], embeddings[d]));
    }
    scores[v] = best;
  }
  return scores;
}

namespace {

AnswerSet merged_filter(const QueryInstance& inst) {
  AnswerSet filter;
  filter.reserve(inst.easy_answers.size() + inst.hard_answers.size());
  std::set_union(inst.easy_answers.begin(), inst.easy_answers.end(),
                 inst.hard_answers.begin(), inst.hard_answers.end(),
                 std::back_inserter(filter));
  return filter;
}

struct PairResult {
  EntityId answer;
  double rank;
};

// Ranks of all hard answers of one instance under one union mode.
std::vector<PairResult> rank_instance(const Model& model,
                                      const std::vector<BetaVector>& entities,
                                      const QueryInstance& inst,
                                      bool use_dnf) {
  const std::vector<double> scores =
      score_all_entities(model, entities, inst.query, use_dnf);
  const AnswerSet filter = merged_filter(inst);
  std::vector<PairResult> out;
  out.reserve(inst.hard_answers.size());
  for (EntityId v : inst.hard_answers) {
    out.push_back({v, filtered_rank(scores, v, filter)});
  }
  return out;
}

void for_each_indexed(std::size_t count, int threads,
                      const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min<std::size_t>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

RankingMetrics evaluate_split(const Model& model, const QueryDataset& dataset,
                              Split split, EvalUnion union_mode,
                              std::vector<RankRecord>* records, int threads) {
  const std::vector<BetaVector> entities = model.all_entity_embeddings();
  RankingMetrics metrics;
  std::uint64_t query_id = 0;

  for (std::size_t s = 0; s < kNumStructures; ++s) {
    const std::string name = kStructureNames[s];
    auto it = dataset.split(split).by_structure.find(name);
    if (it == dataset.split(split).by_structure.end() || it->second.empty()) {
      continue;
    }
    const std::vector<QueryInstance>& list = it->second;

    std::vector<std::pair<std::string, bool>> modes;
    if (has_union(name)) {
      if (union_mode == EvalUnion::kDnf || union_mode == EvalUnion::kBoth) {
        modes.emplace_back(name + " dnf", true);
      }
      if (union_mode == EvalUnion::kDm || union_mode == EvalUnion::kBoth) {
        modes.emplace_back(name + " dm", false);
      }
    } else {
      modes.emplace_back(name, union_mode == EvalUnion::kDnf ||
                                   union_mode == EvalUnion::kBoth);
    }

    for (const auto& [label, use_dnf] : modes) {
      std::vector<std::vector<PairResult>> results(list.size());
      for_each_indexed(list.size(), threads, [&](std::size_t i) {
        results[i] = rank_instance(model, entities, list[i], use_dnf);
      });

      StructureMetrics sm;
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (results[i].empty()) continue;
        sm.queries += 1;
        for (const PairResult& pr : results[i]) {
          sm.mrr += 1.0 / pr.rank;
          sm.h1 += pr.rank <= 1.0 ? 1.0 : 0.0;
          sm.h3 += pr.rank <= 3.0 ? 1.0 : 0.0;
          sm.h10 += pr.rank <= 10.0 ? 1.0 : 0.0;
          sm.pairs += 1;
          if (records) {
            records->push_back(
                {query_id + i, pr.answer, pr.rank, label});
          }
        }
      }
      if (sm.pairs > 0) {
        const double denom = static_cast<double>(sm.pairs);
        sm.mrr /= denom;
        sm.h1 /= denom;
        sm.h3 /= denom;
        sm.h10 /= denom;
      }
      metrics.per_structure[label] = sm;
    }
    query_id += list.size();
  }

  // Aggregates: EPFO structures (DNF rows stand in for the unions) and the
  // five negation structures, unweighted.
  double epfo_sum = 0.0;
  int epfo_n = 0;
  double neg_sum = 0.0;
  int neg_n = 0;
  for (std::size_t s = 0; s < kNumStructures; ++s) {
    const std::string name = kStructureNames[s];
    std::string label = name;
    if (has_union(name)) {
      if (metrics.per_structure.contains(name + " dnf")) {
        label = name + " dnf";
      } else if (metrics.per_structure.contains(name + " dm")) {
        label = name + " dm";
      }
    }
    auto it = metrics.per_structure.find(label);
    if (it == metrics.per_structure.end() || it->second.pairs == 0) continue;
    if (is_negation_structure(name)) {
      neg_sum += it->second.mrr;
      ++neg_n;
    } else {
      epfo_sum += it->second.mrr;
      ++epfo_n;
    }
  }
  if (epfo_n > 0) metrics.epfo_avg_mrr = epfo_sum / epfo_n;
  if (neg_n > 0) metrics.negation_avg_mrr = neg_sum / neg_n;
  return metrics;
}

// ---------------------------------------------------------------------------
// Correlations

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0
                       + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> pearson(const std::vector<double>& x,
                              const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 3) return std::nullopt;
  const double nd = static_cast<double>(n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= nd;
  my /= nd;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman(const std::vector<double>& x,
                               const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) return std::nullopt;
  return pearson(average_ranks(x), average_ranks(y));
}

UncertaintyReport uncertainty_correlation(
    const Model& model,
    const std::map<std::string, std::vector<QueryInstance>>& queries,
    int threads) {
  UncertaintyReport report;
  for (const auto& [name, list] : queries) {
    UncertaintyReport::Entry entry;
    entry.queries = list.size();
    std::vector<double> entropies(list.size(), 0.0);
    std::vector<double> cardinalities(list.size(), 0.0);
    for_each_indexed(list.size(), threads, [&](std::size_t i) {
      entropies[i] =
          Model::embedding_entropy(model.embed_query(list[i].query));
      cardinalities[i] = static_cast<double>(list[i].easy_answers.size() +
                                             list[i].hard_answers.size());
    });
    entry.srcc = spearman(entropies, cardinalities);
    entry.pcc = pearson(entropies, cardinalities);
    report.per_structure[name] = entry;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Empty-answer classification

double rank_statistic_auc(const std::vector<double>& positive_scores,
                          const std::vector<double>& negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) {
    throw std::invalid_argument("rank_statistic_auc: empty pool");
  }
  std::vector<double> all;
  all.reserve(positive_scores.size() + negative_scores.size());
  all.insert(all.end(), positive_scores.begin(), positive_scores.end());
  all.insert(all.end(), negative_scores.begin(), negative_scores.end());
  const std::vector<double> ranks = average_ranks(all);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < positive_scores.size(); ++i) {
    rank_sum += ranks[i];
  }
  const double np = static_cast<double>(positive_scores.size());
  const double nn = static_cast<double>(negative_scores.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

AucReport empty_answer_auc(
    const Model& model,
    const std::map<std::string, std::vector<QueryGraph>>& empty,
    const std::map<std::string, std::vector<QueryInstance>>& answered) {
  AucReport report;
  std::vector<double> all_pos, all_neg;
  for (const auto& [name, empties] : empty) {
    auto it = answered.find(name);
    if (it == answered.end()) continue;
    std::vector<double> pos, neg;
    for (const QueryGraph& q : empties) {
      pos.push_back(Model::embedding_entropy(model.embed_query(q)));
    }
    for (const QueryInstance& inst : it->second) {
      neg.push_back(Model::embedding_entropy(model.embed_query(inst.query)));
    }
    if (pos.empty() || neg.empty()) continue;
    report.per_structure[name] = rank_statistic_auc(pos, neg);
    all_pos.insert(all_pos.end(), pos.begin(), pos.end());
    all_neg.insert(all_neg.end(), neg.begin(), neg.end());
  }
  report.positives = all_pos.size();
  report.negatives = all_neg.size();
  report.overall = rank_statistic_auc(all_pos, all_neg);
  return report;
}

// ---------------------------------------------------------------------------
// Reports

void print_ranking_report(std::ostream& out, const RankingMetrics& metrics) {
  out << std::left << std::setw(10) << "structure" << std::right
      << std::setw(10) << "MRR" << std::setw(10) << "H@1" << std::setw(10)
      << "H@3" << std::setw(10) << "H@10" << std::setw(10) << "pairs"
      << "\n";
  out << std::string(60, '-') << "\n";
  auto row = [&](const std::string& label, const StructureMetrics& sm) {
    out << std::left << std::setw(10) << label << std::right << std::fixed
        << std::setprecision(4) << std::setw(10) << sm.mrr << std::setw(10)
        << sm.h1 << std::setw(10) << sm.h3 << std::setw(10) << sm.h10
        << std::setw(10) << sm.pairs << "\n";
  };
  for (const auto& [label, sm] : metrics.per_structure) row(label, sm);
  out << std::string(60, '-') << "\n";
  if (metrics.epfo_avg_mrr) {
    out << "avg MRR (epfo):     " << std::fixed << std::setprecision(4)
        << *metrics.epfo_avg_mrr << "\n";
  }
  if (metrics.negation_avg_mrr) {
    out << "avg MRR (negation): " << std::fixed << std::setprecision(4)
        << *metrics.negation_avg_mrr << "\n";
  }
}

void write_ranking_records(std::ostream& out, const RankingMetrics& metrics) {
  out << std::setprecision(17);
  for (const auto& [label, sm] : metrics.per_structure) {
    out << label << "\tmrr\t" << sm.mrr << "\n";
    out << label << "\th1\t" << sm.h1 << "\n";
    out << label << "\th3\t" << sm.h3 << "\n";
    out << label << "\th10\t" << sm.h10 << "\n";
    out << label << "\tpairs\t" << sm.pairs << "\n";
  }
  if (metrics.epfo_avg_mrr) {
    out << "avg:epfo\tmrr\t" << *metrics.epfo_avg_mrr << "\n";
  }
  if (metrics.negation_avg_mrr) {
    out << "avg:negation\tmrr\t" << *metrics.negation_avg_mrr << "\n";
  }
}

void write_rank_dump(std::ostream& out,
                     const std::vector<RankRecord>& records) {
  out << std::setprecision(17);
  for (const RankRecord& r : records) {
    out << r.query_id << '\t' << r.answer << '\t' << r.rank << '\n';
  }
}

}  // namespace betae
