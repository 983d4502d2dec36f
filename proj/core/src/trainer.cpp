#include "betae/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "betae/errors.hpp"

namespace betae {

double margin_loss(double positive_distance,
                   std::span<const double> negative_distances, double gamma) {
  auto softplus = [](double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
  };
  double loss = softplus(positive_distance - gamma);
  double neg = 0.0;
  for (double d : negative_distances) neg += softplus(gamma - d);
  return loss + neg / static_cast<double>(negative_distances.size());
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const ad::ParamStore& shapes, const TrainConfig& config)
    : beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      eps_(config.adam_eps) {
  state_.lr = config.lr;
  for (std::size_t b = 0; b < shapes.num_blocks(); ++b) {
    state_.m.emplace_back(shapes.values(static_cast<int>(b)).size(), 0.0);
    state_.v.emplace_back(shapes.values(static_cast<int>(b)).size(), 0.0);
  }
}

void Adam::apply(ad::ParamStore& params) {
  state_.step += 1;
  const double t = static_cast<double>(state_.step);
  const double bias1 = 1.0 - std::pow(beta1_, t);
  const double bias2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t b = 0; b < params.num_blocks(); ++b) {
    auto& theta = params.values(static_cast<int>(b));
    const auto& grad = params.grads(static_cast<int>(b));
    auto& m = state_.m[b];
    auto& v = state_.v[b];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      theta[i] -= state_.lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(Model& model, const QueryDataset& dataset,
                 TrainConfig config)
    : model_(model),
      dataset_(dataset),
      config_(config),
      rng_(config.seed),
      tape_(model.params()),
      adam_(model.params(), config) {
  for (std::size_t s = 0; s < kNumStructures; ++s) {
    const std::string name = kStructureNames[s];
    if (!is_trainable_structure(name)) continue;
    auto it = dataset_.split(Split::kTrain).by_structure.find(name);
    if (it == dataset_.split(Split::kTrain).by_structure.end() ||
        it->second.empty()) {
      log_warn("trainer: no training queries for structure " + name +
               "; skipping it");
      continue;
    }
    slots_.push_back(Slot{name, &it->second,
                          is_negation_structure(name)
                              ? config_.negation_weight
                              : 1.0});
    total_weight_ += slots_.back().weight;
  }
  if (slots_.empty()) {
    throw std::invalid_argument("trainer: dataset has no training queries");
  }
}

const Trainer::Slot& Trainer::next_slot() {
  std::size_t best = 0;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    slots_[i].credit += slots_[i].weight;
    if (slots_[i].credit > slots_[best].credit) best = i;
  }
  slots_[best].credit -= total_weight_;
  return slots_[best];
}

std::vector<EntityId> Trainer::sample_negatives(const QueryInstance& instance,
                                                std::size_t k) {
  const AnswerSet& answers = instance.easy_answers;
  const std::size_t num_entities = model_.num_entities();
  if (answers.size() >= num_entities) {
    throw std::runtime_error(
        "sample_negatives: every entity answers this query");
  }
  const std::size_t complement = num_entities - answers.size();
  std::vector<EntityId> out;
  out.reserve(k);
  if (complement * 4 < num_entities) {
    // Small complement: materialize it and index directly.
    std::vector<EntityId> pool;
    pool.reserve(complement);
    std::size_t a = 0;
    for (EntityId v = 0; v < num_entities; ++v) {
      if (a < answers.size() && answers[a] == v) {
        ++a;
      } else {
        pool.push_back(v);
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      out.push_back(pool[rng_.below(pool.size())]);
    }
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      EntityId v;
      do {
        v = static_cast<EntityId>(rng_.below(num_entities));
      } while (std::binary_search(answers.begin(), answers.end(), v));
      out.push_back(v);
    }
  }
  return out;
}

TrainBatch Trainer::make_batch() {
  const Slot& slot = next_slot();
  last_structure_ = slot.structure;
  TrainBatch batch;
  batch.reserve(config_.batch_size);
  for (std::uint32_t b = 0; b < config_.batch_size; ++b) {
    TrainSample sample;
    sample.instance = &(*slot.queries)[rng_.below(slot.queries->size())];
    const AnswerSet& answers = sample.instance->easy_answers;
    sample.positive = answers[rng_.below(answers.size())];
    sample.negatives = sample_negatives(*sample.instance, config_.neg_k);
    batch.push_back(std::move(sample));
  }
  return batch;
}

namespace {

ad::Var batch_loss_on_tape(ad::Tape& tape, const Model& model,
                           const TrainBatch& batch, double gamma) {
  std::vector<ad::Var> per_sample;
  per_sample.reserve(batch.size());
  std::vector<ad::Var> neg_terms;
  for (const TrainSample& sample : batch) {
    const ad::Var eq = model.query_on_tape(tape, sample.instance->query);
    const ad::Var d_pos = tape.kl_sum(
        model.entity_on_tape(tape, sample.positive), eq);
    const ad::Var pos_term = tape.softplus(tape.add_scalar(d_pos, -gamma));
    neg_terms.clear();
    neg_terms.reserve(sample.negatives.size());
    for (EntityId v : sample.negatives) {
      const ad::Var d_neg =
          tape.kl_sum(model.entity_on_tape(tape, v), eq);
      neg_terms.push_back(
          tape.softplus(tape.add_scalar(tape.scale(d_neg, -1.0), gamma)));
    }
    per_sample.push_back(tape.add(pos_term, tape.mean(neg_terms)));
  }
  return tape.mean(per_sample);
}

std::string param_diagnostics(const ad::ParamStore& params) {
  std::ostringstream out;
  for (std::size_t b = 0; b < params.num_blocks(); ++b) {
    const auto& v = params.values(static_cast<int>(b));
    double lo = v.empty() ? 0.0 : v[0];
    double hi = lo;
    std::size_t bad = 0;
    for (double x : v) {
      if (!std::isfinite(x)) {
        ++bad;
        continue;
      }
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    out << "  " << params.name(static_cast<int>(b)) << ": min=" << lo
        << " max=" << hi << " nonfinite=" << bad << "\n";
  }
  return out.str();
}

}  // namespace

double Trainer::forward_loss(const TrainBatch& batch) {
  tape_.reset();
  const ad::Var loss =
      batch_loss_on_tape(tape_, model_, batch, config_.gamma);
  return tape_.value(loss)[0];
}

double Trainer::loss_and_grad(const TrainBatch& batch) {
  tape_.reset();
  const ad::Var loss =
      batch_loss_on_tape(tape_, model_, batch, config_.gamma);
  const double value = tape_.value(loss)[0];
  model_.params().zero_grads();
  tape_.backward(loss, model_.params());
  return value;
}

double Trainer::train_step() {
  // Domain errors out of the Beta primitives mean a parameter already went
  // non-finite; fold them into the non-finite-loss path.
  auto guarded_loss = [&](const TrainBatch& batch) {
    try {
      return loss_and_grad(batch);
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  TrainBatch batch = make_batch();
  double loss = guarded_loss(batch);
  if (!std::isfinite(loss)) {
    if (lr_halved_) {
      throw DivergenceError("non-finite loss after lr halving; parameters:\n" +
                            param_diagnostics(model_.params()));
    }
    log_warn("train_step: non-finite loss at step " +
             std::to_string(adam_.step_count() + 1) +
             "; halving learning rate and retrying with a fresh batch");
    lr_halved_ = true;
    adam_.set_lr(adam_.lr() * 0.5);
    batch = make_batch();
    loss = guarded_loss(batch);
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite loss after lr halving; parameters:\n" +
                            param_diagnostics(model_.params()));
    }
  }
  adam_.apply(model_.params());
  return loss;
}

OptimizerState Trainer::checkpoint_state() const {
  OptimizerState state = adam_.state();
  std::ostringstream rng_text;
  rng_text << rng_.engine();
  state.rng_state = rng_text.str();
  return state;
}

void Trainer::restore(const OptimizerState& state) {
  adam_.state().m = state.m;
  adam_.state().v = state.v;
  adam_.state().step = state.step;
  adam_.state().lr = state.lr;
  if (!state.rng_state.empty()) {
    std::istringstream rng_text(state.rng_state);
    rng_text >> rng_.engine();
  }
  // The structure schedule is a pure function of the step count; replay it
  // so a resumed run continues exactly where the original left off.
  for (Slot& slot : slots_) slot.credit = 0.0;
  for (std::uint64_t s = 0; s < state.step; ++s) next_slot();
}

void Trainer::train(std::ostream* metrics,
                    const std::string& checkpoint_path) {
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t s = adam_.step_count(); s < config_.steps; ++s) {
    const double loss = train_step();
    if (metrics) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();
      (*metrics) << adam_.step_count() << '\t' << last_structure_ << '\t'
                 << loss << '\t' << elapsed << '\n';
    }
    if (!checkpoint_path.empty() && config_.checkpoint_interval > 0 &&
        adam_.step_count() % config_.checkpoint_interval == 0) {
      const OptimizerState state = checkpoint_state();
      save_checkpoint(checkpoint_path, model_, &state);
    }
  }
  if (!checkpoint_path.empty()) {
    const OptimizerState state = checkpoint_state();
    save_checkpoint(checkpoint_path, model_, &state);
  }
}

}  // namespace betae
