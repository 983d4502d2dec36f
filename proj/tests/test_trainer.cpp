#include "betae/trainer.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "betae/errors.hpp"
#include "doctest.h"
#include "support/oracles.hpp"
#include "support/toy_graphs.hpp"

using namespace betae;
using namespace betae::testing;

namespace {

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.n = 3;
  cfg.hidden_dim = 8;
  cfg.num_layers = 3;
  return cfg;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.gamma = 12.0;
  cfg.neg_k = 3;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.seed = 77;
  return cfg;
}

struct Fixture {
  GraphSplits splits;
  QueryDataset dataset;
};

Fixture make_fixture(std::uint64_t seed, std::size_t per_structure = 12) {
  Rng rng(seed);
  auto triples = clustered_triples(40, 3, 4, 0.75, rng);
  const auto held = hold_out(std::move(triples), 0.05, 0.05, rng);
  Fixture fx;
  fx.splits = toy_splits(held, 40, 3);
  GenerateConfig gen;
  gen.seed = seed + 1;
  gen.train_per_structure = per_structure;
  gen.negation_fraction = 0.5;  // keep every structure populated
  gen.eval_per_structure = 4;
  fx.dataset = generate_dataset(fx.splits, gen);
  return fx;
}

// Eq-6 re-implemented termwise with the plain logistic, as an independent
// scalar oracle.
double loss_oracle(double dp, const std::vector<double>& dns, double gamma) {
  auto sigma = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  double total = -std::log(sigma(gamma - dp));
  double neg = 0.0;
  for (double dn : dns) neg += std::log(sigma(dn - gamma));
  return total - neg / static_cast<double>(dns.size());
}

}  // namespace

TEST_CASE("margin_loss at the symmetric point") {
  const std::vector<double> negs(4, 12.0);
  CHECK(margin_loss(12.0, negs, 12.0) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("margin_loss limits") {
  const std::vector<double> far(3, 1e9);
  CHECK(margin_loss(0.0, far, 60.0) ==
        doctest::Approx(0.0).epsilon(1e-20));
  CHECK(margin_loss(0.0, far, 60.0) > 0.0);  // -log sigma(60) > 0
}

TEST_CASE("margin_loss matches the termwise oracle") {
  Rng rng(80);
  for (int i = 0; i < 200; ++i) {
    const double dp = rng.real() * 30.0;
    std::vector<double> dns;
    const std::size_t k = 1 + rng.below(6);
    for (std::size_t j = 0; j < k; ++j) dns.push_back(rng.real() * 30.0);
    const double gamma = 1.0 + rng.real() * 20.0;
    CHECK(margin_loss(dp, dns, gamma) ==
          doctest::Approx(loss_oracle(dp, dns, gamma)).epsilon(1e-10));
  }
}

TEST_CASE("tape loss equals the value-level loss") {
  Fixture fx = make_fixture(81);
  Model model(tiny_model_config(), fx.splits.g_train.num_entities(),
              fx.splits.g_train.num_relations(), 82);
  TrainConfig cfg = tiny_train_config();
  Trainer trainer(model, fx.dataset, cfg);
  const TrainBatch batch = trainer.make_batch();
  const double tape_loss = trainer.forward_loss(batch);

  double manual = 0.0;
  for (const TrainSample& sample : batch) {
    const BetaVector eq = model.embed_query(sample.instance->query);
    const double dp = model.distance(model.embed_entity(sample.positive), eq);
    std::vector<double> dns;
    for (EntityId v : sample.negatives) {
      dns.push_back(model.distance(model.embed_entity(v), eq));
    }
    manual += margin_loss(dp, dns, cfg.gamma);
  }
  manual /= static_cast<double>(batch.size());
  CHECK(tape_loss == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("sample_negatives avoids answers and is reproducible") {
  Fixture fx = make_fixture(83);
  Model model(tiny_model_config(), 40, 3, 84);
  Trainer a(model, fx.dataset, tiny_train_config());
  Trainer b(model, fx.dataset, tiny_train_config());
  const auto& inst =
      fx.dataset.split(Split::kTrain).by_structure.at("1p").front();
  for (int i = 0; i < 200; ++i) {
    const auto negs = a.sample_negatives(inst, 16);
    CHECK(negs == b.sample_negatives(inst, 16));
    for (EntityId v : negs) {
      CHECK_FALSE(std::binary_search(inst.easy_answers.begin(),
                                     inst.easy_answers.end(), v));
    }
  }
}

TEST_CASE("sample_negatives under a forced choice") {
  QueryInstance inst;
  inst.structure = "1p";
  inst.query = parse_query("(p 0 (e 0))");
  for (EntityId v = 0; v < 40; ++v) {
    if (v != 17) inst.easy_answers.push_back(v);
  }
  Fixture fx = make_fixture(85);
  Model model(tiny_model_config(), 40, 3, 86);
  Trainer trainer(model, fx.dataset, tiny_train_config());
  const auto negs = trainer.sample_negatives(inst, 8);
  for (EntityId v : negs) CHECK(v == 17);
}

TEST_CASE("negative samples are uniform over the complement") {
  QueryInstance inst;
  inst.structure = "1p";
  inst.query = parse_query("(p 0 (e 0))");
  for (EntityId v = 0; v < 10; ++v) inst.easy_answers.push_back(v);
  Fixture fx = make_fixture(87);
  Model model(tiny_model_config(), 40, 3, 88);
  Trainer trainer(model, fx.dataset, tiny_train_config());

  std::map<EntityId, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws / 10; ++i) {
    for (EntityId v : trainer.sample_negatives(inst, 10)) counts[v]++;
  }
  const double expected = draws / 30.0;  // complement has 30 entities
  double chi2 = 0.0;
  for (EntityId v = 10; v < 40; ++v) {
    const double observed = counts.count(v) ? counts[v] : 0.0;
    chi2 += (observed - expected) * (observed - expected) / expected;
  }
  CHECK(chi2 < 80.0);  // 29 dof; far beyond the 0.999 quantile would fail
}

TEST_CASE("zero learning rate leaves parameters unchanged bitwise") {
  Fixture fx = make_fixture(89);
  Model model(tiny_model_config(), 40, 3, 90);
  TrainConfig cfg = tiny_train_config();
  cfg.lr = 0.0;
  Trainer trainer(model, fx.dataset, cfg);

  std::vector<std::vector<double>> before;
  for (std::size_t b = 0; b < model.params().num_blocks(); ++b) {
    before.push_back(model.params().values(static_cast<int>(b)));
  }
  trainer.train_step();
  for (std::size_t b = 0; b < model.params().num_blocks(); ++b) {
    CHECK(model.params().values(static_cast<int>(b)) == before[b]);
  }
}

TEST_CASE("analytic gradients match finite differences per structure") {
  Fixture fx = make_fixture(91, 6);
  const std::uint32_t entities = fx.splits.g_train.num_entities();
  const std::uint32_t relations = fx.splits.g_train.num_relations();

  for (bool per_dim : {false, true}) {
    ModelConfig mc = tiny_model_config();
    mc.attention = per_dim ? AttentionMode::kPerDim : AttentionMode::kGlobal;
    Model model(mc, entities, relations, 92);
    TrainConfig cfg = tiny_train_config();
    cfg.batch_size = 2;
    Trainer trainer(model, fx.dataset, cfg);
    Rng probe_rng(93);

    for (const auto& [name, queries] :
         fx.dataset.split(Split::kTrain).by_structure) {
      (void)queries;
      TrainBatch batch;
      // Schedule until this structure comes up, so every structure's
      // operator composition gets probed.
      for (int guard = 0; guard < 64; ++guard) {
        batch = trainer.make_batch();
        if (trainer.last_structure() == name) break;
      }
      REQUIRE(trainer.last_structure() == name);

      const double base = trainer.loss_and_grad(batch);
      CHECK(std::isfinite(base));
      auto eval = [&] { return trainer.forward_loss(batch); };

      for (std::size_t b = 0; b < model.params().num_blocks(); ++b) {
        auto& values = model.params().values(static_cast<int>(b));
        const auto& grads = model.params().grads(static_cast<int>(b));
        for (int probe = 0; probe < 20; ++probe) {
          const std::size_t i = probe_rng.below(values.size());
          const double fd = central_difference(eval, &values[i], 1e-5);
          CAPTURE(name);
          CAPTURE(model.params().name(static_cast<int>(b)));
          CAPTURE(i);
          CHECK(close_rel(grads[i], fd, 1e-4));
        }
      }
    }
  }
}

TEST_CASE("per-relation MLP gradients also match finite differences") {
  Fixture fx = make_fixture(94, 6);
  ModelConfig mc = tiny_model_config();
  mc.per_relation_mlp = true;
  Model model(mc, fx.splits.g_train.num_entities(),
              fx.splits.g_train.num_relations(), 95);
  TrainConfig cfg = tiny_train_config();
  cfg.batch_size = 2;
  Trainer trainer(model, fx.dataset, cfg);
  Rng probe_rng(96);

  const TrainBatch batch = trainer.make_batch();
  trainer.loss_and_grad(batch);
  auto eval = [&] { return trainer.forward_loss(batch); };
  for (std::size_t b = 0; b < model.params().num_blocks(); ++b) {
    auto& values = model.params().values(static_cast<int>(b));
    const auto& grads = model.params().grads(static_cast<int>(b));
    for (int probe = 0; probe < 20; ++probe) {
      const std::size_t i = probe_rng.below(values.size());
      const double fd = central_difference(eval, &values[i], 1e-5);
      CHECK(close_rel(grads[i], fd, 1e-4));
    }
  }
}

TEST_CASE("repeating one query drives its loss down") {
  const KnowledgeGraph g = build_graph(
      {{0, 0, 1}, {2, 0, 3}, {4, 0, 5}, {6, 0, 7}, {8, 0, 9}}, 10, 1);
  QueryDataset ds;
  QueryInstance inst;
  inst.structure = "1p";
  inst.query = parse_query("(p 0 (e 0))");
  inst.easy_answers = evaluate(inst.query, g);
  ds.split(Split::kTrain).by_structure["1p"].push_back(inst);

  ModelConfig mc = tiny_model_config();
  Model model(mc, 10, 1, 97);
  TrainConfig cfg = tiny_train_config();
  cfg.batch_size = 8;
  cfg.lr = 5e-3;
  Trainer trainer(model, ds, cfg);

  std::vector<double> losses;
  for (int s = 0; s < 50; ++s) losses.push_back(trainer.train_step());
  CHECK(losses.back() < losses.front());
  // Strict decrease over the 50-step run, allowing per-step noise.
  CHECK(losses[49] < losses[0] * 0.9);
}

TEST_CASE("loss stays finite and non-negative during training") {
  Fixture fx = make_fixture(98);
  Model model(tiny_model_config(), 40, 3, 99);
  Trainer trainer(model, fx.dataset, tiny_train_config());
  for (int s = 0; s < 60; ++s) {
    const double loss = trainer.train_step();
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
  }
}

TEST_CASE("same seed reproduces the loss trajectory") {
  Fixture fx = make_fixture(100);
  TrainConfig cfg = tiny_train_config();
  Model a(tiny_model_config(), 40, 3, 101);
  Model b(tiny_model_config(), 40, 3, 101);
  Trainer ta(a, fx.dataset, cfg);
  Trainer tb(b, fx.dataset, cfg);
  for (int s = 0; s < 100; ++s) {
    const double la = ta.train_step();
    const double lb = tb.train_step();
    CHECK(la == lb);
  }
}

TEST_CASE("training keeps positivity-mapped parameters in range") {
  Fixture fx = make_fixture(102);
  Model model(tiny_model_config(), 40, 3, 103);
  Trainer trainer(model, fx.dataset, tiny_train_config());
  for (int s = 0; s < 40; ++s) trainer.train_step();
  const auto all = model.all_entity_embeddings();
  for (const BetaVector& e : all) {
    for (double x : e.ab) {
      CHECK(x >= kParamFloor);
      CHECK(x <= kParamCeil);
    }
  }
}

TEST_CASE("divergence guard halves the rate once then aborts") {
  Fixture fx = make_fixture(104);
  Model model(tiny_model_config(), 40, 3, 105);
  Trainer trainer(model, fx.dataset, tiny_train_config());
  // Poison the whole entity table; both the first attempt and the
  // halved-rate retry must observe a non-finite loss.
  for (double& x : model.params().values(0)) x = std::nan("");
  CHECK_THROWS_AS(trainer.train_step(), DivergenceError);
}

TEST_CASE("resume from checkpoint reproduces the uninterrupted run") {
  Fixture fx = make_fixture(106);
  TrainConfig cfg = tiny_train_config();
  cfg.steps = 15;

  Model uninterrupted(tiny_model_config(), 40, 3, 107);
  Trainer full(uninterrupted, fx.dataset, cfg);
  std::vector<double> reference;
  for (int s = 0; s < 15; ++s) reference.push_back(full.train_step());

  Model part(tiny_model_config(), 40, 3, 107);
  Trainer first(part, fx.dataset, cfg);
  for (int s = 0; s < 10; ++s) first.train_step();
  const OptimizerState snapshot = first.checkpoint_state();
  save_checkpoint("tmp_trainer_resume.bin", part, &snapshot);

  OptimizerState restored;
  Model resumed = load_checkpoint("tmp_trainer_resume.bin", &restored);
  Trainer second(resumed, fx.dataset, cfg);
  second.restore(restored);
  std::vector<double> tail;
  for (int s = 0; s < 5; ++s) tail.push_back(second.train_step());
  for (int s = 0; s < 5; ++s) CHECK(tail[s] == reference[10 + s]);

  for (std::size_t b = 0; b < resumed.params().num_blocks(); ++b) {
    CHECK(resumed.params().values(static_cast<int>(b)) ==
          uninterrupted.params().values(static_cast<int>(b)));
  }
}
