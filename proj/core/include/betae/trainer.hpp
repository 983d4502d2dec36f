#pragma once

// Margin-based negative-sampling optimization over mixed query structures.
// Batches are homogeneous per structure and scheduled by deterministic
// weighted round-robin; gradients come from the reverse-mode tape and are
// applied with Adam. Single-threaded by construction, so a fixed seed
// reproduces the loss trajectory bit for bit.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "betae/model.hpp"
#include "betae/rng.hpp"
#include "betae/sampler.hpp"

namespace betae {

struct TrainConfig {
  double gamma = 60.0;
  std::uint32_t neg_k = 128;
  std::uint32_t batch_size = 512;
  double lr = 5e-4;
  std::uint64_t steps = 2000;
  double negation_weight = 0.1;  // scheduling weight vs conjunctive = 1
  std::uint64_t seed = 7;
  std::uint64_t checkpoint_interval = 0;  // 0 = final checkpoint only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// -log sigma(gamma - d_pos) - mean_j log sigma(d_neg_j - gamma).
double margin_loss(double positive_distance,
                   std::span<const double> negative_distances, double gamma);

struct TrainSample {
  const QueryInstance* instance = nullptr;
  EntityId positive = 0;
  std::vector<EntityId> negatives;
};
using TrainBatch = std::vector<TrainSample>;

class Adam {
 public:
  Adam(const ad::ParamStore& shapes, const TrainConfig& config);

  void apply(ad::ParamStore& params);
  double lr() const { return state_.lr; }
  void set_lr(double lr) { state_.lr = lr; }
  std::uint64_t step_count() const { return state_.step; }

  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }

 private:
  OptimizerState state_;
  double beta1_, beta2_, eps_;
};

class Trainer {
 public:
  // The dataset's train split must contain at least one structure with
  // queries; missing structures are skipped with a warning.
  Trainer(Model& model, const QueryDataset& dataset, TrainConfig config);

  // Negatives are drawn uniformly (with replacement) from the entities not
  // answering the instance on the training graph.
  std::vector<EntityId> sample_negatives(const QueryInstance& instance,
                                         std::size_t k);

  // Next homogeneous batch per the structure schedule.
  TrainBatch make_batch();

  // Loss of a batch without touching gradients or parameters (finite
  // difference probes rebuild this repeatedly).
  double forward_loss(const TrainBatch& batch);

  // Forward + backward; leaves gradients in the param store.
  double loss_and_grad(const TrainBatch& batch);

  // One optimization step: schedule, sample, backprop, Adam update. On a
  // non-finite loss the step is retried once at half the learning rate;
  // a second failure throws DivergenceError.
  double train_step();

  // Full loop. Writes `step<TAB>structure<TAB>loss<TAB>elapsed_s` records
  // to `metrics` (may be null) and checkpoints to `checkpoint_path` (may be
  // empty) at the configured interval and at the end.
  void train(std::ostream* metrics, const std::string& checkpoint_path);

  void restore(const OptimizerState& state);

  const std::string& last_structure() const { return last_structure_; }
  std::uint64_t step_count() const { return adam_.step_count(); }
  const TrainConfig& config() const { return config_; }
  Rng& rng() { return rng_; }
  OptimizerState checkpoint_state() const;

 private:
  Model& model_;
  const QueryDataset& dataset_;
  TrainConfig config_;
  Rng rng_;
  ad::Tape tape_;
  Adam adam_;
  bool lr_halved_ = false;

  struct Slot {
    std::string structure;
    const std::vector<QueryInstance>* queries;
    double weight;
    double credit = 0.0;
  };
  std::vector<Slot> slots_;
  double total_weight_ = 0.0;
  std::string last_structure_;

  const Slot& next_slot();
};

}  // namespace betae
