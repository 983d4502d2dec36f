#pragma once

// Pipeline-level configuration shared by the CLI subcommands: paths, seed,
// model/training/generation settings, and evaluation cutoffs. Presets pin
// the two documented operating points (desk-scale defaults and the
// full-scale hyperparameters).

#include <cstdint>
#include <string>
#include <vector>

#include "betae/model.hpp"
#include "betae/sampler.hpp"
#include "betae/trainer.hpp"

namespace betae {

struct PipelineConfig {
  std::string graph_dir;
  std::string dataset_dir;
  std::string checkpoint;
  std::uint64_t seed = 7;
  int threads = 1;
  bool add_inverse = false;
  std::vector<int> hits_ks = {1, 3, 10};

  ModelConfig model;
  TrainConfig train;
  GenerateConfig generate;
};

// "desk" (dim 16) or "paper" (dim 400, hidden 512, lr 5e-4, batch 512,
// 128 negatives, margin 60). Throws std::invalid_argument otherwise.
void apply_preset(PipelineConfig& config, const std::string& preset);

// Keeps the duplicated knobs (gamma, negative count, seed) consistent
// between the model, trainer, and generator sections.
void sync_config(PipelineConfig& config);

}  // namespace betae
