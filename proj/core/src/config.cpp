#include "betae/config.hpp"

#include <stdexcept>

namespace betae {

void apply_preset(PipelineConfig& config, const std::string& preset) {
  if (preset == "desk") {
    config.model.n = 16;
  } else if (preset == "paper") {
    config.model.n = 400;
    config.model.hidden_dim = 512;
    config.model.num_layers = 3;
    config.train.lr = 5e-4;
    config.train.batch_size = 512;
    config.train.neg_k = 128;
    config.train.gamma = 60.0;
  } else {
    throw std::invalid_argument("unknown preset '" + preset +
                                "' (expected desk or paper)");
  }
  sync_config(config);
}

void sync_config(PipelineConfig& config) {
  config.model.gamma = config.train.gamma;
  config.model.neg_k = config.train.neg_k;
  config.train.seed = config.seed;
  config.generate.seed = config.seed;
}

}  // namespace betae
