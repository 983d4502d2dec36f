#include "betae/kg.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "betae/errors.hpp"

namespace betae {

namespace {

const std::vector<EntityId> kEmptyEntities;
const std::vector<RelationId> kEmptyRelations;

// Splits a line into exactly `n` tab-separated fields.
std::vector<std::string_view> split_fields(std::string_view line,
                                           std::size_t n,
                                           const std::string& path,
                                           std::size_t lineno) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  if (fields.size() != n) {
    throw FormatError(path, lineno,
                      "expected " + std::to_string(n) +
                          " tab-separated fields, got " +
                          std::to_string(fields.size()));
  }
  return fields;
}

std::uint64_t parse_uint(std::string_view text, const std::string& path,
                         std::size_t lineno) {
  std::uint64_t value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw FormatError(path, lineno,
                      "expected a non-negative integer, got '" +
                          std::string(text) + "'");
  }
  return value;
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples,
                               std::uint32_t num_entities,
                               std::uint32_t num_relations)
    : num_entities_(num_entities),
      num_relations_(num_relations),
      triples_(std::move(triples)) {
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()),
                 triples_.end());
  for (const Triple& t : triples_) {
    forward_[key(t.head, t.relation)].push_back(t.tail);
    backward_[key(t.tail, t.relation)].push_back(t.head);
    in_relations_[t.tail].push_back(t.relation);
  }
  for (auto& [k, v] : forward_) std::sort(v.begin(), v.end());
  for (auto& [k, v] : backward_) std::sort(v.begin(), v.end());
  for (auto& [k, v] : in_relations_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    has_in_edge_.push_back(k);
  }
  std::sort(has_in_edge_.begin(), has_in_edge_.end());
}

const std::vector<EntityId>& KnowledgeGraph::neighbors(EntityId v,
                                                       RelationId r) const {
  auto it = forward_.find(key(v, r));
  return it == forward_.end() ? kEmptyEntities : it->second;
}

const std::vector<EntityId>& KnowledgeGraph::predecessors(EntityId v,
                                                          RelationId r) const {
  auto it = backward_.find(key(v, r));
  return it == backward_.end() ? kEmptyEntities : it->second;
}

const std::vector<RelationId>& KnowledgeGraph::in_relations(EntityId v) const {
  auto it = in_relations_.find(v);
  return it == in_relations_.end() ? kEmptyRelations : it->second;
}

bool KnowledgeGraph::has_edge(EntityId h, RelationId r, EntityId t) const {
  return std::binary_search(triples_.begin(), triples_.end(),
                            Triple{h, r, t});
}

std::uint64_t KnowledgeGraph::checksum() const {
  std::uint64_t hash = 1469598103934665603ULL;
  auto mix = [&hash](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash ^= (v >> (8 * i)) & 0xff;
      hash *= 1099511628211ULL;
    }
  };
  mix(num_entities_);
  mix(num_relations_);
  for (const Triple& t : triples_) {
    mix(t.head);
    mix(t.relation);
    mix(t.tail);
  }
  return hash;
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, 0, "cannot open file");
  Vocab vocab;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<std::uint64_t, std::string>> entries;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_fields(line, 2, path, lineno);
    const std::uint64_t id = parse_uint(fields[0], path, lineno);
    entries.emplace_back(id, std::string(fields[1]));
  }
  vocab.names.resize(entries.size());
  std::vector<bool> seen(entries.size(), false);
  for (const auto& [id, name] : entries) {
    if (id >= entries.size() || seen[id]) {
      throw FormatError(path, 0,
                        "ids must be dense and unique; offending id " +
                            std::to_string(id));
    }
    seen[id] = true;
    if (!vocab.ids.emplace(name, static_cast<std::uint32_t>(id)).second) {
      throw FormatError(path, 0, "duplicate name '" + name + "'");
    }
    vocab.names[id] = name;
  }
  return vocab;
}

std::vector<Triple> load_triples(const std::string& path,
                                 std::uint32_t num_entities,
                                 std::uint32_t num_relations) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, 0, "cannot open file");
  std::vector<Triple> triples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_fields(line, 3, path, lineno);
    const std::uint64_t h = parse_uint(fields[0], path, lineno);
    const std::uint64_t r = parse_uint(fields[1], path, lineno);
    const std::uint64_t t = parse_uint(fields[2], path, lineno);
    if (h >= num_entities || t >= num_entities) {
      throw FormatError(path, lineno,
                        "entity id out of range (|V| = " +
                            std::to_string(num_entities) + ")");
    }
    if (r >= num_relations) {
      throw FormatError(path, lineno,
                        "relation id out of range (|R| = " +
                            std::to_string(num_relations) + ")");
    }
    triples.push_back(Triple{static_cast<EntityId>(h),
                             static_cast<RelationId>(r),
                             static_cast<EntityId>(t)});
  }
  return triples;
}

KnowledgeGraph build_graph(std::vector<Triple> triples,
                           std::uint32_t num_entities,
                           std::uint32_t num_relations) {
  return KnowledgeGraph(std::move(triples), num_entities, num_relations);
}

GraphSplits build_splits(const std::vector<Triple>& train,
                         const std::vector<Triple>& valid,
                         const std::vector<Triple>& test,
                         std::uint32_t num_entities,
                         std::uint32_t num_relations) {
  GraphSplits splits;
  std::vector<Triple> cumulative = train;
  splits.g_train = build_graph(cumulative, num_entities, num_relations);
  if (splits.g_train.num_edges() != train.size()) {
    log_warn("build_splits: " +
             std::to_string(train.size() - splits.g_train.num_edges()) +
             " duplicate training edges dropped");
  }

  cumulative.insert(cumulative.end(), valid.begin(), valid.end());
  splits.g_valid = build_graph(cumulative, num_entities, num_relations);
  const std::size_t valid_added =
      splits.g_valid.num_edges() - splits.g_train.num_edges();
  if (valid_added != valid.size()) {
    log_warn("build_splits: " + std::to_string(valid.size() - valid_added) +
             " validation edges overlap earlier splits; deduplicated");
  }

  cumulative.insert(cumulative.end(), test.begin(), test.end());
  splits.g_test = build_graph(cumulative, num_entities, num_relations);
  const std::size_t test_added =
      splits.g_test.num_edges() - splits.g_valid.num_edges();
  if (test_added != test.size()) {
    log_warn("build_splits: " + std::to_string(test.size() - test_added) +
             " test edges overlap earlier splits; deduplicated");
  }
  return splits;
}

std::vector<Triple> add_inverse_triples(const std::vector<Triple>& triples,
                                        std::uint32_t num_relations) {
  std::vector<Triple> out;
  out.reserve(triples.size() * 2);
  for (const Triple& t : triples) {
    out.push_back(t);
    out.push_back(Triple{t.tail, t.relation + num_relations, t.head});
  }
  return out;
}

}  // namespace betae
