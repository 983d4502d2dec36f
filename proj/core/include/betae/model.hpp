#pragma once

// The probabilistic query-embedding model: per-entity Beta embeddings, a
// relation-conditioned projection MLP, attention-weighted intersection,
// reciprocal negation, and the KL-based entity-to-query distance. Queries
// are embedded by executing these operators over the computation graph;
// unions run either through the De Morgan rewrite (single embedding) or
// DNF disjuncts scored by min distance.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "betae/autodiff.hpp"
#include "betae/beta_math.hpp"
#include "betae/kg.hpp"
#include "betae/query.hpp"

namespace betae {

enum class UnionMode : std::uint8_t { kDnf = 0, kDm = 1 };
enum class AttentionMode : std::uint8_t { kGlobal = 0, kPerDim = 1 };

struct ModelConfig {
  std::uint32_t n = 16;           // Beta distributions per embedding
  std::uint32_t hidden_dim = 512; // MLP latent width
  std::uint32_t num_layers = 3;   // linear layers per MLP
  bool per_relation_mlp = false;  // dedicated MLP weights per relation
  AttentionMode attention = AttentionMode::kGlobal;
  UnionMode union_mode = UnionMode::kDnf;
  double gamma = 60.0;            // loss margin
  std::uint32_t neg_k = 128;      // negative samples per positive
  double param_floor = kParamFloor;
};

// One embedding: interleaved (alpha_d, beta_d) pairs, length 2n.
struct BetaVector {
  std::vector<double> ab;

  std::size_t dims() const { return ab.size() / 2; }
  double alpha(std::size_t d) const { return ab[2 * d]; }
  double beta(std::size_t d) const { return ab[2 * d + 1]; }
  BetaParams dim(std::size_t d) const { return {alpha(d), beta(d)}; }
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint32_t num_entities,
        std::uint32_t num_relations, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::uint32_t num_entities() const { return num_entities_; }
  std::uint32_t num_relations() const { return num_relations_; }

  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  // --- tape builders (used for training and for inference forwards) ---
  ad::Var entity_on_tape(ad::Tape& tape, EntityId v) const;
  ad::Var project_on_tape(ad::Tape& tape, RelationId r, ad::Var input) const;
  ad::Var intersect_on_tape(ad::Tape& tape,
                            std::vector<ad::Var> inputs) const;
  ad::Var negate_on_tape(ad::Tape& tape, ad::Var input) const;
  // Executes the computation graph; unions via the De Morgan rewrite.
  ad::Var query_on_tape(ad::Tape& tape, const QueryGraph& q) const;
  ad::Var distance_on_tape(ad::Tape& tape, ad::Var entity,
                           ad::Var query) const;

  // --- value-level operators ---
  BetaVector embed_entity(EntityId v) const;
  BetaVector project(const BetaVector& e, RelationId r) const;
  BetaVector intersect(const std::vector<BetaVector>& inputs) const;
  static BetaVector negate(const BetaVector& e);
  // Single embedding; unions handled by De Morgan.
  BetaVector embed_query(const QueryGraph& q) const;
  // One embedding per DNF disjunct.
  std::vector<BetaVector> embed_query_dnf(const QueryGraph& q) const;

  // Dist(v; q) = sum_d KL(entity_d || query_d). Asymmetric on purpose: the
  // entity distribution is the first argument.
  double distance(const BetaVector& entity, const BetaVector& query) const;
  double distance(EntityId v, const BetaVector& query) const;
  // min over disjuncts of distance(v, disjunct).
  double score_union_dnf(EntityId v,
                         const std::vector<BetaVector>& disjuncts) const;

  // Sum of per-dimension differential entropies.
  static double embedding_entropy(const BetaVector& e);

  // Entity embeddings materialized as one row per entity (ranking loops).
  std::vector<BetaVector> all_entity_embeddings() const;

 private:
  struct MlpBlocks {
    std::vector<int> w, b;
    std::vector<std::size_t> rows, cols;
  };

  ad::Var mlp_on_tape(ad::Tape& tape, ad::Var x, const MlpBlocks& mlp,
                      std::size_t copy_index, bool positive_output) const;

  ModelConfig config_;
  std::uint32_t num_entities_ = 0;
  std::uint32_t num_relations_ = 0;
  ad::ParamStore params_;

  int entity_block_ = -1;
  int relation_block_ = -1;  // unused in per-relation MLP mode
  MlpBlocks proj_;
  MlpBlocks attn_;
};

// Adam moments plus everything needed to resume a run bit-for-bit.
struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
  double lr = 5e-4;
  std::string rng_state;  // serialized mt19937_64
};

// Versioned binary container: config header, entity table, relation
// parameters, network weights, optional optimizer section. Loading rejects
// unknown versions and any size mismatch against the stored config.
void save_checkpoint(const std::string& path, const Model& model,
                     const OptimizerState* optimizer = nullptr);
Model load_checkpoint(const std::string& path,
                      OptimizerState* optimizer = nullptr);

}  // namespace betae
