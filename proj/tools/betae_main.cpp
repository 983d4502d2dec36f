// Command-line front end for the full pipeline:
//   ingest -> generate -> train -> eval / correlate / classify-empty,
// plus ad-hoc query answering.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or format
// error, 3 numerical abort during training.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "betae/config.hpp"
#include "betae/errors.hpp"
#include "betae/evaluator.hpp"
#include "betae/kg.hpp"
#include "betae/model.hpp"
#include "betae/query.hpp"
#include "betae/sampler.hpp"
#include "betae/trainer.hpp"

namespace {

using namespace betae;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct LoadedGraphs {
  Vocab entities;
  Vocab relations;
  std::vector<Triple> train, valid, test;
  GraphSplits splits;
};

LoadedGraphs load_graphs(const std::string& dir, bool add_inverse) {
  namespace fs = std::filesystem;
  for (const char* name : {"entities.dict", "relations.dict", "train.txt",
                           "valid.txt", "test.txt"}) {
    if (!fs::exists(dir + "/" + name)) {
      throw FormatError(dir + "/" + name, 0, "missing input file");
    }
  }
  LoadedGraphs g;
  g.entities = load_vocab(dir + "/entities.dict");
  g.relations = load_vocab(dir + "/relations.dict");
  const auto num_entities = static_cast<std::uint32_t>(g.entities.size());
  auto num_relations = static_cast<std::uint32_t>(g.relations.size());
  g.train = load_triples(dir + "/train.txt", num_entities, num_relations);
  g.valid = load_triples(dir + "/valid.txt", num_entities, num_relations);
  g.test = load_triples(dir + "/test.txt", num_entities, num_relations);
  if (add_inverse) {
    g.train = add_inverse_triples(g.train, num_relations);
    g.valid = add_inverse_triples(g.valid, num_relations);
    g.test = add_inverse_triples(g.test, num_relations);
    const std::size_t original = g.relations.size();
    for (std::size_t r = 0; r < original; ++r) {
      const std::string name = g.relations.names[r] + "_reverse";
      g.relations.ids.emplace(name, static_cast<std::uint32_t>(original + r));
      g.relations.names.push_back(name);
    }
    num_relations *= 2;
  }
  g.splits =
      build_splits(g.train, g.valid, g.test, num_entities, num_relations);
  return g;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

Model load_model_or_fail(const PipelineConfig& cfg, OptimizerState* opt) {
  if (cfg.checkpoint.empty()) {
    throw FormatError("--checkpoint is required for this command");
  }
  return load_checkpoint(cfg.checkpoint, opt);
}

// ---------------------------------------------------------------------------

int cmd_ingest(const PipelineConfig& cfg, const std::string& manifest_path) {
  const LoadedGraphs g = load_graphs(cfg.graph_dir, cfg.add_inverse);
  std::cout << g.entities.size() << " entities, " << g.relations.size()
            << (cfg.add_inverse ? " relations (inverses added), "
                                : " relations, ")
            << g.train.size() << "/" << g.valid.size() << "/"
            << g.test.size() << " edges\n";

  const std::string path = manifest_path.empty()
                               ? cfg.graph_dir + "/manifest.tsv"
                               : manifest_path;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path, 0, "cannot open for writing");
  out << "entities\t" << g.entities.size() << "\n";
  out << "relations\t" << g.relations.size() << "\n";
  out << "g_train\t" << hex64(g.splits.g_train.checksum()) << "\n";
  out << "g_valid\t" << hex64(g.splits.g_valid.checksum()) << "\n";
  out << "g_test\t" << hex64(g.splits.g_test.checksum()) << "\n";
  std::cout << "manifest written to " << path << "\n";
  return kExitOk;
}

int cmd_generate(PipelineConfig& cfg) {
  if (cfg.dataset_dir.empty()) {
    throw FormatError("--dataset-dir is required for generate");
  }
  const LoadedGraphs g = load_graphs(cfg.graph_dir, cfg.add_inverse);
  const QueryDataset ds = generate_dataset(g.splits, cfg.generate);
  save_dataset(ds, cfg.dataset_dir);

  std::cout << std::left << std::setw(10) << "structure" << std::right
            << std::setw(8) << "train" << std::setw(8) << "valid"
            << std::setw(8) << "test" << std::setw(12) << "avg-ans"
            << "\n";
  for (std::size_t s = 0; s < kNumStructures; ++s) {
    const std::string name = kStructureNames[s];
    std::size_t counts[3] = {0, 0, 0};
    double test_answers = 0.0;
    for (int i = 0; i < 3; ++i) {
      auto it = ds.splits[i].by_structure.find(name);
      if (it == ds.splits[i].by_structure.end()) continue;
      counts[i] = it->second.size();
      if (i == 2) {
        for (const QueryInstance& inst : it->second) {
          test_answers += static_cast<double>(inst.easy_answers.size() +
                                              inst.hard_answers.size());
        }
      }
    }
    std::cout << std::left << std::setw(10) << name << std::right
              << std::setw(8) << counts[0] << std::setw(8) << counts[1]
              << std::setw(8) << counts[2] << std::setw(12) << std::fixed
              << std::setprecision(2)
              << (counts[2] ? test_answers / counts[2] : 0.0) << "\n";
  }
  std::cout << "dataset written to " << cfg.dataset_dir << " (seed "
            << cfg.generate.seed << ")\n";
  return kExitOk;
}

int cmd_train(PipelineConfig& cfg, const std::string& resume_path,
              const std::string& metrics_path) {
  if (cfg.dataset_dir.empty()) {
    throw FormatError("--dataset-dir is required for train");
  }
  if (cfg.checkpoint.empty()) {
    throw FormatError("--checkpoint is required for train");
  }
  const QueryDataset ds = load_dataset(cfg.dataset_dir);

  std::optional<Model> model;
  OptimizerState restored;
  bool resumed = false;
  if (!resume_path.empty()) {
    model.emplace(load_checkpoint(resume_path, &restored));
    resumed = true;
  } else {
    std::uint32_t num_entities = 0;
    std::uint32_t num_relations = 0;
    if (!cfg.graph_dir.empty()) {
      const LoadedGraphs g = load_graphs(cfg.graph_dir, cfg.add_inverse);
      num_entities = g.splits.g_train.num_entities();
      num_relations = g.splits.g_train.num_relations();
    } else {
      // Infer vocabulary sizes from the dataset itself.
      for (int s = 0; s < 3; ++s) {
        for (const auto& [name, list] : ds.splits[s].by_structure) {
          for (const QueryInstance& inst : list) {
            struct Walker {
              std::uint32_t& ne;
              std::uint32_t& nr;
              void walk(const QueryNode& n) {
                if (n.kind == NodeKind::kAnchor) {
                  ne = std::max(ne, n.id + 1);
                }
                if (n.kind == NodeKind::kProjection) {
                  nr = std::max(nr, n.id + 1);
                }
                for (const QueryNode& c : n.children) walk(c);
              }
            } walker{num_entities, num_relations};
            walker.walk(inst.query);
            for (EntityId v : inst.easy_answers) {
              num_entities = std::max(num_entities, v + 1);
            }
            for (EntityId v : inst.hard_answers) {
              num_entities = std::max(num_entities, v + 1);
            }
          }
        }
      }
      log_warn("train: no --graph-dir; vocabulary sizes inferred from the "
               "dataset (" +
               std::to_string(num_entities) + " entities, " +
               std::to_string(num_relations) + " relations)");
    }
    model.emplace(cfg.model, num_entities, num_relations, cfg.seed);
  }

  std::ofstream metrics;
  if (!metrics_path.empty()) {
    metrics.open(metrics_path, std::ios::trunc);
    if (!metrics) throw FormatError(metrics_path, 0, "cannot open log");
  }

  Trainer trainer(*model, ds, cfg.train);
  if (resumed) trainer.restore(restored);
  trainer.train(metrics_path.empty() ? nullptr : &metrics, cfg.checkpoint);
  std::cout << "checkpoint written to " << cfg.checkpoint << " after "
            << trainer.step_count() << " steps\n";
  return kExitOk;
}

EvalUnion parse_union(const std::string& mode) {
  if (mode == "dnf") return EvalUnion::kDnf;
  if (mode == "dm") return EvalUnion::kDm;
  return EvalUnion::kBoth;
}

int cmd_eval(PipelineConfig& cfg, const std::string& union_mode,
             const std::string& split_name_arg,
             const std::string& records_path,
             const std::string& rank_dump_path) {
  if (cfg.dataset_dir.empty()) {
    throw FormatError("--dataset-dir is required for eval");
  }
  const QueryDataset ds = load_dataset(cfg.dataset_dir);
  const Model model = load_model_or_fail(cfg, nullptr);
  const Split split = split_name_arg == "valid" ? Split::kValid : Split::kTest;

  std::vector<RankRecord> records;
  const RankingMetrics metrics =
      evaluate_split(model, ds, split, parse_union(union_mode),
                     rank_dump_path.empty() ? nullptr : &records,
                     cfg.threads);
  print_ranking_report(std::cout, metrics);
  if (!records_path.empty()) {
    std::ofstream out(records_path, std::ios::trunc);
    if (!out) throw FormatError(records_path, 0, "cannot open for writing");
    write_ranking_records(out, metrics);
  }
  if (!rank_dump_path.empty()) {
    std::ofstream out(rank_dump_path, std::ios::trunc);
    if (!out) throw FormatError(rank_dump_path, 0, "cannot open for writing");
    write_rank_dump(out, records);
  }
  return kExitOk;
}

int cmd_correlate(PipelineConfig& cfg, const std::string& split_name_arg) {
  if (cfg.dataset_dir.empty()) {
    throw FormatError("--dataset-dir is required for correlate");
  }
  const QueryDataset ds = load_dataset(cfg.dataset_dir);
  const Model model = load_model_or_fail(cfg, nullptr);
  const Split split = split_name_arg == "valid" ? Split::kValid : Split::kTest;
  const UncertaintyReport report = uncertainty_correlation(
      model, ds.split(split).by_structure, cfg.threads);

  std::cout << std::left << std::setw(10) << "structure" << std::right
            << std::setw(10) << "SRCC" << std::setw(10) << "PCC"
            << std::setw(10) << "queries" << "\n";
  for (const auto& [name, entry] : report.per_structure) {
    auto cell = [](const std::optional<double>& v) {
      if (!v) return std::string("-");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", *v);
      return std::string(buf);
    };
    std::cout << std::left << std::setw(10) << name << std::right
              << std::setw(10) << cell(entry.srcc) << std::setw(10)
              << cell(entry.pcc) << std::setw(10) << entry.queries << "\n";
  }
  return kExitOk;
}

int cmd_classify_empty(PipelineConfig& cfg, std::size_t pool_size,
                       std::size_t min_answers) {
  const LoadedGraphs g = load_graphs(cfg.graph_dir, cfg.add_inverse);
  const Model model = load_model_or_fail(cfg, nullptr);

  std::map<std::string, std::vector<QueryGraph>> empty;
  std::map<std::string, std::vector<QueryInstance>> answered;
  for (std::size_t s = 0; s < kNumStructures; ++s) {
    const std::string name = kStructureNames[s];
    Rng rng(mix_seed(cfg.seed, 1000 + s));
    auto empties =
        sample_empty_queries(name, g.splits.g_test, pool_size, rng);
    auto with_answers = sample_answered_queries(
        name, g.splits.g_test, pool_size, min_answers, rng);
    if (empties.empty() || with_answers.empty()) {
      log_warn("classify-empty: skipping " + name +
               " (could not fill both pools)");
      continue;
    }
    empty[name] = std::move(empties);
    answered[name] = std::move(with_answers);
  }
  if (empty.empty()) {
    throw FormatError("classify-empty: no structure produced both pools");
  }
  const AucReport report = empty_answer_auc(model, empty, answered);
  std::cout << std::left << std::setw(10) << "structure" << std::right
            << std::setw(10) << "ROC-AUC" << "\n";
  for (const auto& [name, auc] : report.per_structure) {
    std::cout << std::left << std::setw(10) << name << std::right
              << std::setw(10) << std::fixed << std::setprecision(4) << auc
              << "\n";
  }
  std::cout << "overall\t" << std::fixed << std::setprecision(4)
            << report.overall << " (" << report.positives << " empty / "
            << report.negatives << " answered)\n";
  return kExitOk;
}

int cmd_answer(PipelineConfig& cfg, const std::string& query_text,
               std::size_t top_k, const std::string& union_mode) {
  const Model model = load_model_or_fail(cfg, nullptr);
  const QueryGraph q = parse_query(query_text);
  validate_ids(q, model.num_entities(), model.num_relations());

  Vocab entity_names;
  if (!cfg.graph_dir.empty()) {
    entity_names = load_vocab(cfg.graph_dir + "/entities.dict");
  }

  const bool use_dnf = union_mode != "dm";
  std::vector<BetaVector> embeddings;
  if (use_dnf) {
    embeddings = model.embed_query_dnf(q);
  } else {
    embeddings.push_back(model.embed_query(q));
  }

  const BetaVector dm_embedding = model.embed_query(q);
  std::cout << "query entropy: " << std::setprecision(6)
            << Model::embedding_entropy(dm_embedding) << " (per dim:";
  for (std::size_t d = 0; d < dm_embedding.dims(); ++d) {
    std::cout << ' ' << entropy(dm_embedding.dim(d));
  }
  std::cout << ")\n";

  const auto entities = model.all_entity_embeddings();
  std::vector<std::pair<double, EntityId>> scored;
  scored.reserve(entities.size());
  for (EntityId v = 0; v < entities.size(); ++v) {
    double best = model.distance(entities[v], embeddings[0]);
    for (std::size_t d = 1; d < embeddings.size(); ++d) {
      best = std::min(best, model.distance(entities[v], embeddings[d]));
    }
    scored.emplace_back(best, v);
  }
  std::sort(scored.begin(), scored.end());
  top_k = std::min<std::size_t>(top_k, scored.size());
  std::cout << std::left << std::setw(8) << "rank" << std::setw(10)
            << "entity" << std::setw(16) << "distance" << "name\n";
  for (std::size_t i = 0; i < top_k; ++i) {
    const auto& [dist, v] = scored[i];
    std::cout << std::left << std::setw(8) << (i + 1) << std::setw(10) << v
              << std::setw(16) << std::setprecision(6) << std::fixed << dist
              << (v < entity_names.names.size() ? entity_names.names[v] : "")
              << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic Beta-embedding reasoning over knowledge graphs"};
  app.require_subcommand(1);
  app.fallthrough();  // let global options appear after the subcommand
  app.set_config("--config", "", "key=value configuration file");
  app.allow_config_extras(CLI::config_extras_mode::ignore_all);

  PipelineConfig cfg;
  sync_config(cfg);
  std::string preset;
  app.add_option("--preset", preset, "apply a named preset (desk|paper)");
  app.add_option("--graph-dir", cfg.graph_dir, "directory with dict/txt files");
  app.add_option("--dataset-dir", cfg.dataset_dir, "query dataset directory");
  app.add_option("--checkpoint", cfg.checkpoint, "model checkpoint path");
  app.add_option("--seed", cfg.seed, "master RNG seed");
  app.add_option("--threads", cfg.threads,
                 "worker threads (1 = deterministic)");
  app.add_flag("--add-inverse", cfg.add_inverse,
               "materialize inverse relations, doubling |R|");

  std::string union_mode = "dnf";
  app.add_option("--union", union_mode, "union handling: dnf|dm|both")
      ->check(CLI::IsMember({"dnf", "dm", "both"}));
  std::string attention = "global";
  app.add_option("--attention", attention,
                 "attention granularity: global|per-dim")
      ->check(CLI::IsMember({"global", "per-dim"}));
  app.add_option("--dim", cfg.model.n, "Beta dimensions per embedding");
  app.add_option("--hidden", cfg.model.hidden_dim, "MLP hidden width");
  app.add_option("--layers", cfg.model.num_layers, "MLP linear layers");
  app.add_flag("--per-relation-mlp", cfg.model.per_relation_mlp,
               "dedicated projection MLP per relation");
  app.add_option("--gamma", cfg.train.gamma, "loss margin");
  app.add_option("--neg-k", cfg.train.neg_k, "negative samples per positive");
  app.add_option("--batch", cfg.train.batch_size, "batch size");
  app.add_option("--lr", cfg.train.lr, "learning rate");
  app.add_option("--steps", cfg.train.steps, "optimization steps");
  app.add_option("--max-answers", cfg.generate.max_answers,
                 "answer cap for valid/test queries");
  app.add_flag("--exhaustive-1p", cfg.generate.exhaustive_1p,
               "enumerate all new edges for 1p eval queries");

  auto* ingest = app.add_subcommand("ingest", "load and summarize a graph");
  std::string manifest_path;
  ingest->add_option("--out", manifest_path, "manifest destination");

  auto* generate = app.add_subcommand("generate", "sample query datasets");
  generate->add_option("--train-count", cfg.generate.train_per_structure,
                       "training queries per conjunctive structure");
  generate->add_option("--eval-count", cfg.generate.eval_per_structure,
                       "valid/test queries per structure");
  generate->add_option("--retry-budget", cfg.generate.retry_budget,
                       "attempts per requested instance");

  auto* train = app.add_subcommand("train", "optimize model parameters");
  std::string resume_path, metrics_path;
  train->add_option("--resume", resume_path, "checkpoint to resume from");
  train->add_option("--metrics-log", metrics_path,
                    "step/structure/loss/elapsed records");
  train->add_option("--checkpoint-interval", cfg.train.checkpoint_interval,
                    "checkpoint every N steps (0 = final only)");

  auto* eval =
      app.add_subcommand("eval", "ranking metrics on held-out queries");
  std::string split_arg = "test";
  eval->add_option("--split", split_arg, "valid|test")
      ->check(CLI::IsMember({"valid", "test"}));
  std::string records_path, rank_dump_path;
  eval->add_option("--report", records_path, "machine-readable records file");
  eval->add_option("--rank-dump", rank_dump_path,
                   "per-pair query/answer/rank dump");

  auto* correlate =
      app.add_subcommand("correlate", "entropy vs answer-count correlation");
  correlate->add_option("--split", split_arg, "valid|test")
      ->check(CLI::IsMember({"valid", "test"}));

  auto* classify =
      app.add_subcommand("classify-empty", "entropy-based empty-query AUC");
  std::size_t pool_size = 100;
  std::size_t min_answers = 5;
  classify->add_option("--pool-size", pool_size, "queries per pool");
  classify->add_option("--min-answers", min_answers,
                       "answer threshold for the non-empty pool");

  auto* answer = app.add_subcommand("answer", "rank entities for one query");
  std::string query_text;
  std::size_t top_k = 10;
  answer->add_option("query", query_text, "query in the s-expression DSL")
      ->required();
  answer->add_option("--top-k", top_k, "entities to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (!preset.empty()) apply_preset(cfg, preset);
    cfg.model.attention = attention == "per-dim" ? AttentionMode::kPerDim
                                                 : AttentionMode::kGlobal;
    cfg.model.union_mode =
        union_mode == "dm" ? UnionMode::kDm : UnionMode::kDnf;
    sync_config(cfg);

    if (ingest->parsed()) return cmd_ingest(cfg, manifest_path);
    if (generate->parsed()) return cmd_generate(cfg);
    if (train->parsed()) return cmd_train(cfg, resume_path, metrics_path);
    if (eval->parsed()) {
      return cmd_eval(cfg, union_mode, split_arg, records_path,
                      rank_dump_path);
    }
    if (correlate->parsed()) return cmd_correlate(cfg, split_arg);
    if (classify->parsed()) {
      return cmd_classify_empty(cfg, pool_size, min_answers);
    }
    if (answer->parsed()) {
      return cmd_answer(cfg, query_text, top_k, union_mode);
    }
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ParseError& e) {
    std::cerr << "query syntax error " << e.what() << "\n";
    return kExitData;
  } catch (const std::out_of_range& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
