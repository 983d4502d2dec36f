#include "betae/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "betae/errors.hpp"

namespace betae {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

std::size_t SplitQueries::total() const {
  std::size_t n = 0;
  for (const auto& [name, list] : by_structure) n += list.size();
  return n;
}

// ---------------------------------------------------------------------------
// Instantiation

namespace {

// Assigns ids walking the skeleton top-down from the value each node must
// produce. Returns false on a dead end (no incoming edges, or no distinct
// entity available for a negated branch).
bool assign(QueryNode& node, EntityId value, const KnowledgeGraph& g,
            Rng& rng) {
  switch (node.kind) {
    case NodeKind::kAnchor:
      node.id = value;
      return true;
    case NodeKind::kProjection: {
      const auto& rels = g.in_relations(value);
      if (rels.empty()) return false;
      const RelationId r = rels[rng.below(rels.size())];
      const auto& preds = g.predecessors(value, r);
      node.id = r;
      return assign(node.children[0], preds[rng.below(preds.size())], g, rng);
    }
    case NodeKind::kIntersection:
    case NodeKind::kUnion: {
      for (QueryNode& c : node.children) {
        if (!assign(c, value, g, rng)) return false;
      }
      return true;
    }
    case NodeKind::kNegation: {
      // The negated branch is grounded at a different entity, so its
      // pre-complement answer set is non-empty and has a chance of
      // excluding `value`. Verified against the evaluator afterwards.
      const auto& pool = g.entities_with_in_edges();
      if (pool.size() < 2) return false;
      EntityId other = pool[rng.below(pool.size())];
      for (int tries = 0; other == value && tries < 8; ++tries) {
        other = pool[rng.below(pool.size())];
      }
      if (other == value) return false;
      return assign(node.children[0], other, g, rng);
    }
  }
  return false;
}

}  // namespace

std::optional<QueryGraph> instantiate(const QueryGraph& skeleton,
                                      const KnowledgeGraph& g, Rng& rng) {
  const auto& pool = g.entities_with_in_edges();
  if (pool.empty()) return std::nullopt;
  const EntityId seed_answer = pool[rng.below(pool.size())];
  QueryGraph q = skeleton;
  if (!assign(q, seed_answer, g, rng)) return std::nullopt;
  // Negated branches can accidentally cover the seed; keep only queries the
  // seed actually answers.
  const AnswerSet answers = evaluate(q, g);
  if (!std::binary_search(answers.begin(), answers.end(), seed_answer)) {
    return std::nullopt;
  }
  return q;
}

std::pair<AnswerSet, AnswerSet> split_answers(const QueryGraph& q,
                                              const KnowledgeGraph& g_small,
                                              const KnowledgeGraph& g_big) {
  AnswerSet easy = evaluate(q, g_small);
  const AnswerSet all = evaluate(q, g_big);
  AnswerSet hard;
  std::set_difference(all.begin(), all.end(), easy.begin(), easy.end(),
                      std::back_inserter(hard));
  return {std::move(easy), std::move(hard)};
}

// ---------------------------------------------------------------------------
// Dataset generation

namespace {

struct SplitContext {
  Split split;
  const KnowledgeGraph* g_small;
  const KnowledgeGraph* g_big;
};

std::optional<QueryInstance> finish_instance(QueryGraph q,
                                             const std::string& name,
                                             const SplitContext& ctx,
                                             std::size_t max_answers) {
  QueryInstance inst;
  inst.structure = name;
  if (ctx.split == Split::kTrain) {
    inst.easy_answers = evaluate(q, *ctx.g_small);
    if (inst.easy_answers.empty()) return std::nullopt;
  } else {
    auto [easy, hard] = split_answers(q, *ctx.g_small, *ctx.g_big);
    if (hard.empty()) return std::nullopt;
    if (easy.size() + hard.size() > max_answers) return std::nullopt;
    inst.easy_answers = std::move(easy);
    inst.hard_answers = std::move(hard);
  }
  inst.query = std::move(q);
  return inst;
}

// All 1p queries (h, r, ?) that gained at least one new tail in this split.
std::vector<QueryInstance> exhaustive_1p(const SplitContext& ctx,
                                         std::size_t max_answers) {
  std::vector<QueryInstance> out;
  std::set<std::pair<EntityId, RelationId>> seen;
  for (const Triple& t : ctx.g_big->triples()) {
    if (ctx.g_small->has_edge(t.head, t.relation, t.tail)) continue;
    if (!seen.emplace(t.head, t.relation).second) continue;
    auto inst = finish_instance(
        make_projection(t.relation, make_anchor(t.head)), "1p", ctx,
        max_answers);
    if (inst) out.push_back(std::move(*inst));
  }
  return out;
}

}  // namespace

QueryDataset generate_dataset(const GraphSplits& graphs,
                              const GenerateConfig& config) {
  QueryDataset ds;
  ds.seed = config.seed;

  const SplitContext contexts[3] = {
      {Split::kTrain, &graphs.g_train, &graphs.g_train},
      {Split::kValid, &graphs.g_train, &graphs.g_valid},
      {Split::kTest, &graphs.g_valid, &graphs.g_test},
  };

  for (const SplitContext& ctx : contexts) {
    const int split_idx = static_cast<int>(ctx.split);
    ds.graph_checksum[split_idx][0] = ctx.g_small->checksum();
    ds.graph_checksum[split_idx][1] = ctx.g_big->checksum();

    for (std::size_t s = 0; s < kNumStructures; ++s) {
      const std::string name = kStructureNames[s];
      std::size_t count = 0;
      if (ctx.split == Split::kTrain) {
        if (!is_trainable_structure(name)) continue;
        count = is_negation_structure(name)
                    ? static_cast<std::size_t>(
                          static_cast<double>(config.train_per_structure) *
                          config.negation_fraction)
                    : config.train_per_structure;
      } else {
        count = config.eval_per_structure;
      }
      if (count == 0) continue;

      Rng rng(mix_seed(config.seed,
                       static_cast<std::uint64_t>(split_idx) * 64 + s));
      auto& list = ds.split(ctx.split).by_structure[name];

      if (name == "1p" && ctx.split != Split::kTrain && config.exhaustive_1p) {
        list = exhaustive_1p(ctx, config.max_answers);
        continue;
      }

      std::set<std::string> seen;
      std::size_t attempts = 0;
      const std::size_t budget = count * config.retry_budget;
      while (list.size() < count && attempts < budget) {
        ++attempts;
        auto q = instantiate(structure_skeleton(name), *ctx.g_big, rng);
        if (!q) continue;
        std::string canonical = print_query(*q);
        if (seen.contains(canonical)) continue;
        auto inst = finish_instance(std::move(*q), name, ctx,
                                    config.max_answers);
        if (!inst) continue;
        seen.insert(std::move(canonical));
        list.push_back(std::move(*inst));
      }
      if (list.size() < count) {
        log_warn(std::string("generate_dataset: ") + split_name(ctx.split) +
                 "/" + name + " exhausted after " + std::to_string(attempts) +
                 " attempts; emitted " + std::to_string(list.size()) + "/" +
                 std::to_string(count));
      }
    }
  }
  for (SplitQueries& sq : ds.splits) {
    std::erase_if(sq.by_structure,
                  [](const auto& kv) { return kv.second.empty(); });
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Empty / answered pools

QueryGraph sample_random_query(const QueryGraph& skeleton,
                               const KnowledgeGraph& g, Rng& rng) {
  QueryGraph q = skeleton;
  struct Walker {
    const KnowledgeGraph& g;
    Rng& rng;
    void walk(QueryNode& node) {
      if (node.kind == NodeKind::kAnchor) {
        node.id = static_cast<EntityId>(rng.below(g.num_entities()));
      } else if (node.kind == NodeKind::kProjection) {
        node.id = static_cast<RelationId>(rng.below(g.num_relations()));
      }
      for (QueryNode& c : node.children) walk(c);
    }
  } walker{g, rng};
  walker.walk(q);
  return q;
}

std::vector<QueryGraph> sample_empty_queries(const std::string& structure,
                                             const KnowledgeGraph& g,
                                             std::size_t count, Rng& rng,
                                             std::size_t budget) {
  const QueryGraph& skeleton = structure_skeleton(structure);
  std::vector<QueryGraph> out;
  std::set<std::string> seen;
  for (std::size_t attempt = 0; attempt < budget && out.size() < count;
       ++attempt) {
    QueryGraph q = sample_random_query(skeleton, g, rng);
    if (!evaluate(q, g).empty()) continue;
    std::string canonical = print_query(q);
    if (!seen.insert(std::move(canonical)).second) continue;
    out.push_back(std::move(q));
  }
  if (out.size() < count) {
    log_warn("sample_empty_queries: " + structure + " pool short: " +
             std::to_string(out.size()) + "/" + std::to_string(count));
  }
  return out;
}

std::vector<QueryInstance> sample_answered_queries(
    const std::string& structure, const KnowledgeGraph& g, std::size_t count,
    std::size_t min_answers, Rng& rng, std::size_t budget) {
  const QueryGraph& skeleton = structure_skeleton(structure);
  std::vector<QueryInstance> out;
  std::set<std::string> seen;
  for (std::size_t attempt = 0; attempt < budget && out.size() < count;
       ++attempt) {
    auto q = instantiate(skeleton, g, rng);
    if (!q) continue;
    AnswerSet answers = evaluate(*q, g);
    if (answers.size() <= min_answers) continue;
    std::string canonical = print_query(*q);
    if (!seen.insert(std::move(canonical)).second) continue;
    QueryInstance inst;
    inst.query = std::move(*q);
    inst.structure = structure;
    inst.easy_answers = std::move(answers);
    out.push_back(std::move(inst));
  }
  if (out.size() < count) {
    log_warn("sample_answered_queries: " + structure + " pool short: " +
             std::to_string(out.size()) + "/" + std::to_string(count));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset files

namespace {

std::string ids_to_csv(const AnswerSet& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(ids[i]);
  }
  return out;
}

AnswerSet csv_to_ids(std::string_view text, const std::string& path,
                     std::size_t lineno) {
  AnswerSet out;
  std::size_t start = 0;
  if (text.empty()) return out;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view field = text.substr(start, comma - start);
    EntityId value = 0;
    auto [ptr, ec] =
        std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw FormatError(path, lineno, "bad id list entry '" +
                                          std::string(field) + "'");
    }
    out.push_back(value);
    start = comma + 1;
    if (comma == text.size()) break;
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(std::string_view text, const std::string& path) {
  std::uint64_t v = 0;
  auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), v, 16);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError(path, 1, "bad checksum field");
  }
  return v;
}

}  // namespace

void save_dataset(const QueryDataset& dataset, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (int s = 0; s < 3; ++s) {
    const Split split = static_cast<Split>(s);
    const std::string path =
        dir + "/" + split_name(split) + ".queries";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError(path, 0, "cannot open for writing");
    out << "#betae-queries v1 seed=" << dataset.seed << " split="
        << split_name(split) << " graph_small="
        << hex64(dataset.graph_checksum[s][0]) << " graph_big="
        << hex64(dataset.graph_checksum[s][1]) << "\n";
    for (const auto& [name, list] : dataset.split(split).by_structure) {
      for (const QueryInstance& inst : list) {
        out << name << '\t' << print_query(inst.query) << '\t'
            << ids_to_csv(inst.easy_answers) << '\t'
            << ids_to_csv(inst.hard_answers) << '\n';
      }
    }
  }
}

QueryDataset load_dataset(const std::string& dir) {
  QueryDataset ds;
  for (int s = 0; s < 3; ++s) {
    const Split split = static_cast<Split>(s);
    const std::string path = dir + "/" + split_name(split) + ".queries";
    std::ifstream in(path);
    if (!in) throw FormatError(path, 0, "cannot open file");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (line[0] == '#') {
        std::istringstream header(line);
        std::string field;
        while (header >> field) {
          if (field.starts_with("seed=")) {
            ds.seed = std::stoull(field.substr(5));
          } else if (field.starts_with("graph_small=")) {
            ds.graph_checksum[s][0] = parse_hex64(field.substr(12), path);
          } else if (field.starts_with("graph_big=")) {
            ds.graph_checksum[s][1] = parse_hex64(field.substr(10), path);
          }
        }
        continue;
      }
      std::vector<std::string_view> fields;
      std::string_view view = line;
      std::size_t start = 0;
      for (int i = 0; i < 3; ++i) {
        const std::size_t tab = view.find('\t', start);
        if (tab == std::string_view::npos) {
          throw FormatError(path, lineno, "expected 4 tab-separated fields");
        }
        fields.push_back(view.substr(start, tab - start));
        start = tab + 1;
      }
      fields.push_back(view.substr(start));

      QueryInstance inst;
      inst.structure = std::string(fields[0]);
      inst.query = parse_query(fields[1]);
      inst.easy_answers = csv_to_ids(fields[2], path, lineno);
      inst.hard_answers = csv_to_ids(fields[3], path, lineno);
      ds.split(split).by_structure[inst.structure].push_back(std::move(inst));
    }
  }
  return ds;
}

}  // namespace betae
