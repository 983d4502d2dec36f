#include "support/toy_graphs.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace betae::testing {

std::vector<Triple> clustered_triples(std::uint32_t num_entities,
                                      std::uint32_t num_relations,
                                      std::uint32_t clusters,
                                      double edge_prob, Rng& rng) {
  const std::uint32_t cluster_size = num_entities / clusters;
  std::vector<Triple> out;
  for (RelationId r = 0; r < num_relations; ++r) {
    std::vector<std::uint32_t> target(clusters);
    std::iota(target.begin(), target.end(), 0);
    for (std::uint32_t c = clusters; c > 1; --c) {
      std::swap(target[c - 1], target[rng.below(c)]);
    }
    for (EntityId v = 0; v < num_entities; ++v) {
      const std::uint32_t source_cluster =
          std::min(v / cluster_size, clusters - 1);
      const std::uint32_t target_cluster = target[source_cluster];
      for (std::uint32_t j = 0; j < cluster_size; ++j) {
        const EntityId t = target_cluster * cluster_size + j;
        if (rng.real() < edge_prob) out.push_back(Triple{v, r, t});
      }
    }
  }
  return out;
}

std::vector<Triple> random_triples(std::uint32_t num_entities,
                                   std::uint32_t num_relations,
                                   std::size_t count, Rng& rng) {
  std::vector<Triple> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(Triple{static_cast<EntityId>(rng.below(num_entities)),
                         static_cast<RelationId>(rng.below(num_relations)),
                         static_cast<EntityId>(rng.below(num_entities))});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ToySplitTriples hold_out(std::vector<Triple> all, double valid_fraction,
                         double test_fraction, Rng& rng) {
  // Fisher-Yates, then slice.
  for (std::size_t i = all.size(); i > 1; --i) {
    std::swap(all[i - 1], all[rng.below(i)]);
  }
  const std::size_t n_valid =
      static_cast<std::size_t>(static_cast<double>(all.size()) *
                               valid_fraction);
  const std::size_t n_test = static_cast<std::size_t>(
      static_cast<double>(all.size()) * test_fraction);
  ToySplitTriples out;
  out.valid.assign(all.begin(), all.begin() + n_valid);
  out.test.assign(all.begin() + n_valid, all.begin() + n_valid + n_test);
  out.train.assign(all.begin() + n_valid + n_test, all.end());
  return out;
}

void write_graph_dir(const std::string& dir, std::uint32_t num_entities,
                     std::uint32_t num_relations,
                     const ToySplitTriples& triples) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/entities.dict", std::ios::trunc);
    for (std::uint32_t v = 0; v < num_entities; ++v) {
      out << v << '\t' << "entity_" << v << '\n';
    }
  }
  {
    std::ofstream out(dir + "/relations.dict", std::ios::trunc);
    for (std::uint32_t r = 0; r < num_relations; ++r) {
      out << r << '\t' << "relation_" << r << '\n';
    }
  }
  auto write_triples = [&](const std::string& name,
                           const std::vector<Triple>& list) {
    std::ofstream out(dir + "/" + name, std::ios::trunc);
    for (const Triple& t : list) {
      out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
    }
  };
  write_triples("train.txt", triples.train);
  write_triples("valid.txt", triples.valid);
  write_triples("test.txt", triples.test);
}

GraphSplits toy_splits(const ToySplitTriples& triples,
                       std::uint32_t num_entities,
                       std::uint32_t num_relations) {
  return build_splits(triples.train, triples.valid, triples.test,
                      num_entities, num_relations);
}

}  // namespace betae::testing
