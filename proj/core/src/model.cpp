#include "betae/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "betae/errors.hpp"
#include "betae/rng.hpp"

namespace betae {

namespace {

// Inverse of softplus: value u with log(1 + e^u) = y.
double inv_softplus(double y) { return y + std::log1p(-std::exp(-y)); }

std::vector<std::size_t> mlp_dims(std::size_t in, std::size_t hidden,
                                  std::size_t out, std::uint32_t layers) {
  std::vector<std::size_t> dims;
  dims.push_back(in);
  for (std::uint32_t l = 0; l + 1 < layers; ++l) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

}  // namespace

Model::Model(const ModelConfig& config, std::uint32_t num_entities,
             std::uint32_t num_relations, std::uint64_t seed)
    : config_(config), num_entities_(num_entities),
      num_relations_(num_relations) {
  if (config_.n < 1 || config_.hidden_dim < 1 || config_.num_layers < 1) {
    throw std::invalid_argument("ModelConfig: n, hidden_dim, num_layers >= 1");
  }
  if (!(config_.gamma > 0.0) || config_.neg_k < 1) {
    throw std::invalid_argument("ModelConfig: gamma > 0 and neg_k >= 1");
  }
  const std::size_t width = 2 * static_cast<std::size_t>(config_.n);
  Rng rng(seed);

  entity_block_ = params_.add_block(
      "entity", static_cast<std::size_t>(num_entities_) * width);
  {
    // Raw values chosen so the positivity map lands near Beta(1, 1).
    const double base = inv_softplus(1.0 - config_.param_floor);
    auto& u = params_.values(entity_block_);
    for (double& x : u) x = base + 0.1 * rng.gaussian();
  }

  const bool per_rel = config_.per_relation_mlp;
  if (!per_rel) {
    relation_block_ = params_.add_block(
        "relation", static_cast<std::size_t>(num_relations_) * width);
    auto& u = params_.values(relation_block_);
    for (double& x : u) x = 0.5 * rng.gaussian();
  }

  const std::size_t copies = per_rel ? num_relations_ : 1;
  const std::size_t proj_in = per_rel ? width : 2 * width;
  auto init_mlp = [&](const std::string& prefix,
                      const std::vector<std::size_t>& dims, MlpBlocks& mlp,
                      std::size_t n_copies, double out_bias) {
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const std::size_t r = dims[l + 1];
      const std::size_t c = dims[l];
      mlp.w.push_back(params_.add_block(
          prefix + "_w" + std::to_string(l), n_copies * r * c));
      mlp.b.push_back(params_.add_block(
          prefix + "_b" + std::to_string(l), n_copies * r));
      mlp.rows.push_back(r);
      mlp.cols.push_back(c);
      auto& w = params_.values(mlp.w.back());
      const double scale = std::sqrt(2.0 / static_cast<double>(c));
      for (double& x : w) x = scale * rng.gaussian();
      const bool last = l + 2 == dims.size();
      if (last && out_bias != 0.0) {
        auto& b = params_.values(mlp.b.back());
        std::fill(b.begin(), b.end(), out_bias);
      }
    }
  };

  init_mlp("proj",
           mlp_dims(proj_in, config_.hidden_dim, width, config_.num_layers),
           proj_, copies, inv_softplus(1.0 - config_.param_floor));

  const std::size_t attn_out =
      config_.attention == AttentionMode::kGlobal ? 1 : config_.n;
  init_mlp("attn",
           mlp_dims(width, config_.hidden_dim, attn_out, config_.num_layers),
           attn_, 1, 0.0);
}

ad::Var Model::mlp_on_tape(ad::Tape& tape, ad::Var x, const MlpBlocks& mlp,
                           std::size_t copy_index,
                           bool positive_output) const {
  for (std::size_t l = 0; l < mlp.w.size(); ++l) {
    const std::size_t w_off = copy_index * mlp.rows[l] * mlp.cols[l];
    const std::size_t b_off = copy_index * mlp.rows[l];
    x = tape.affine(mlp.w[l], w_off, mlp.b[l], b_off, mlp.rows[l],
                    mlp.cols[l], x);
    if (l + 1 < mlp.w.size()) x = tape.relu(x);
  }
  return positive_output ? tape.softplus(x, config_.param_floor) : x;
}

ad::Var Model::entity_on_tape(ad::Tape& tape, EntityId v) const {
  if (v >= num_entities_) {
    throw std::out_of_range("entity id " + std::to_string(v) +
                            " out of range");
  }
  const std::size_t width = 2 * static_cast<std::size_t>(config_.n);
  return tape.softplus(tape.param(entity_block_, v * width, width),
                       config_.param_floor);
}

ad::Var Model::project_on_tape(ad::Tape& tape, RelationId r,
                               ad::Var input) const {
  if (r >= num_relations_) {
    throw std::out_of_range("relation id " + std::to_string(r) +
                            " out of range");
  }
  if (config_.per_relation_mlp) {
    return mlp_on_tape(tape, input, proj_, r, true);
  }
  const std::size_t width = 2 * static_cast<std::size_t>(config_.n);
  ad::Var rel = tape.param(relation_block_, r * width, width);
  return mlp_on_tape(tape, tape.concat(input, rel), proj_, 0, true);
}

ad::Var Model::intersect_on_tape(ad::Tape& tape,
                                 std::vector<ad::Var> inputs) const {
  if (inputs.size() < 2) {
    throw std::invalid_argument("intersect: need >= 2 inputs");
  }
  std::vector<ad::Var> logits;
  logits.reserve(inputs.size());
  for (ad::Var in : inputs) {
    logits.push_back(mlp_on_tape(tape, in, attn_, 0, false));
  }
  // Canonical input order: combining is a sum, so sorting by value makes the
  // result identical for any permutation of the same inputs.
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  auto key_less = [&](std::size_t a, std::size_t b) {
    const auto la = tape.value(logits[a]);
    const auto lb = tape.value(logits[b]);
    if (!std::equal(la.begin(), la.end(), lb.begin(), lb.end())) {
      return std::lexicographical_compare(la.begin(), la.end(), lb.begin(),
                                          lb.end());
    }
    const auto xa = tape.value(inputs[a]);
    const auto xb = tape.value(inputs[b]);
    return std::lexicographical_compare(xa.begin(), xa.end(), xb.begin(),
                                        xb.end());
  };
  std::stable_sort(order.begin(), order.end(), key_less);
  std::vector<ad::Var> sorted_logits, sorted_inputs;
  sorted_logits.reserve(order.size());
  sorted_inputs.reserve(order.size());
  for (std::size_t i : order) {
    sorted_logits.push_back(logits[i]);
    sorted_inputs.push_back(inputs[i]);
  }
  const std::size_t groups =
      config_.attention == AttentionMode::kGlobal ? 1 : config_.n;
  return tape.attn_combine(sorted_logits, sorted_inputs, groups);
}

ad::Var Model::negate_on_tape(ad::Tape& tape, ad::Var input) const {
  return tape.reciprocal(input);
}

ad::Var Model::query_on_tape(ad::Tape& tape, const QueryGraph& q) const {
  switch (q.kind) {
    case NodeKind::kAnchor:
      return entity_on_tape(tape, q.id);
    case NodeKind::kProjection:
      return project_on_tape(tape, q.id,
                             query_on_tape(tape, q.children[0]));
    case NodeKind::kNegation:
      return negate_on_tape(tape, query_on_tape(tape, q.children[0]));
    case NodeKind::kIntersection: {
      std::vector<ad::Var> embs;
      embs.reserve(q.children.size());
      for (const QueryNode& c : q.children) {
        embs.push_back(query_on_tape(tape, c));
      }
      return intersect_on_tape(tape, std::move(embs));
    }
    case NodeKind::kUnion: {
      // De Morgan: union = not(and(not(children))).
      std::vector<ad::Var> negs;
      negs.reserve(q.children.size());
      for (const QueryNode& c : q.children) {
        negs.push_back(negate_on_tape(tape, query_on_tape(tape, c)));
      }
      return negate_on_tape(tape, intersect_on_tape(tape, std::move(negs)));
    }
  }
  throw std::logic_error("query_on_tape: unreachable");
}

ad::Var Model::distance_on_tape(ad::Tape& tape, ad::Var entity,
                                ad::Var query) const {
  return tape.kl_sum(entity, query);
}

namespace {

BetaVector to_beta_vector(std::span<const double> v) {
  return BetaVector{std::vector<double>(v.begin(), v.end())};
}

}  // namespace

BetaVector Model::embed_entity(EntityId v) const {
  ad::Tape tape(params_);
  return to_beta_vector(tape.value(entity_on_tape(tape, v)));
}

BetaVector Model::project(const BetaVector& e, RelationId r) const {
  ad::Tape tape(params_);
  ad::Var in = tape.constant(e.ab);
  return to_beta_vector(tape.value(project_on_tape(tape, r, in)));
}

BetaVector Model::intersect(const std::vector<BetaVector>& inputs) const {
  ad::Tape tape(params_);
  std::vector<ad::Var> vars;
  vars.reserve(inputs.size());
  for (const BetaVector& e : inputs) vars.push_back(tape.constant(e.ab));
  return to_beta_vector(tape.value(intersect_on_tape(tape, std::move(vars))));
}

BetaVector Model::negate(const BetaVector& e) {
  BetaVector out = e;
  for (double& x : out.ab) x = 1.0 / x;
  return out;
}

BetaVector Model::embed_query(const QueryGraph& q) const {
  ad::Tape tape(params_);
  return to_beta_vector(tape.value(query_on_tape(tape, q)));
}

std::vector<BetaVector> Model::embed_query_dnf(const QueryGraph& q) const {
  std::vector<BetaVector> out;
  for (const QueryGraph& d : to_dnf(q)) out.push_back(embed_query(d));
  return out;
}

double Model::distance(const BetaVector& entity,
                       const BetaVector& query) const {
  if (entity.ab.size() != query.ab.size()) {
    throw std::invalid_argument("distance: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t d = 0; d < entity.dims(); ++d) {
    acc += kl(entity.dim(d), query.dim(d));
  }
  return acc;
}

double Model::distance(EntityId v, const BetaVector& query) const {
  return distance(embed_entity(v), query);
}

double Model::score_union_dnf(
    EntityId v, const std::vector<BetaVector>& disjuncts) const {
  if (disjuncts.empty()) {
    throw std::invalid_argument("score_union_dnf: no disjuncts");
  }
  const BetaVector ev = embed_entity(v);
  double best = std::numeric_limits<double>::infinity();
  for (const BetaVector& d : disjuncts) {
    best = std::min(best, distance(ev, d));
  }
  return best;
}

double Model::embedding_entropy(const BetaVector& e) {
  double acc = 0.0;
  for (std::size_t d = 0; d < e.dims(); ++d) acc += entropy(e.dim(d));
  return acc;
}

std::vector<BetaVector> Model::all_entity_embeddings() const {
  const std::size_t width = 2 * static_cast<std::size_t>(config_.n);
  const auto& raw = params_.values(entity_block_);
  std::vector<BetaVector> out(num_entities_);
  for (std::uint32_t v = 0; v < num_entities_; ++v) {
    out[v].ab.resize(width);
    for (std::size_t i = 0; i < width; ++i) {
      const double x = raw[v * width + i];
      const double sp = x > 30.0 ? x : std::log1p(std::exp(x));
      out[v].ab[i] = sp + config_.param_floor;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'B', 'E', 'T', 'A', 'E', 'C', 'K', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError(path, 0, "truncated checkpoint");
  return v;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_pod<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in, const std::string& path) {
  const auto size = read_pod<std::uint64_t>(in, path);
  std::vector<double> v(size);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(size * sizeof(double)));
  if (!in) throw FormatError(path, 0, "truncated checkpoint");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& path) {
  const auto size = read_pod<std::uint64_t>(in, path);
  std::string s(size, '\0');
  in.read(s.data(), static_cast<std::streamsize>(size));
  if (!in) throw FormatError(path, 0, "truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const OptimizerState* optimizer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path, 0, "cannot open for writing");
  out.write(kMagic, sizeof kMagic);
  const ModelConfig& cfg = model.config();
  write_pod<std::uint32_t>(out, 1);  // version
  write_pod(out, cfg.n);
  write_pod(out, cfg.hidden_dim);
  write_pod(out, cfg.num_layers);
  write_pod<std::uint8_t>(out, cfg.per_relation_mlp ? 1 : 0);
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.attention));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.union_mode));
  write_pod(out, cfg.gamma);
  write_pod(out, cfg.neg_k);
  write_pod(out, cfg.param_floor);
  write_pod(out, model.num_entities());
  write_pod(out, model.num_relations());

  const ad::ParamStore& params = model.params();
  write_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(params.num_blocks()));
  for (std::size_t b = 0; b < params.num_blocks(); ++b) {
    write_string(out, params.name(static_cast<int>(b)));
    write_doubles(out, params.values(static_cast<int>(b)));
  }

  write_pod<std::uint8_t>(out, optimizer ? 1 : 0);
  if (optimizer) {
    write_pod(out, optimizer->step);
    write_pod(out, optimizer->lr);
    for (std::size_t b = 0; b < params.num_blocks(); ++b) {
      write_doubles(out, optimizer->m[b]);
      write_doubles(out, optimizer->v[b]);
    }
    write_string(out, optimizer->rng_state);
  }
  if (!out) throw FormatError(path, 0, "write failed");
}

Model load_checkpoint(const std::string& path, OptimizerState* optimizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, 0, "cannot open file");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError(path, 0, "not a checkpoint file");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != 1) {
    throw FormatError(path, 0,
                      "unsupported checkpoint version " +
                          std::to_string(version));
  }
  ModelConfig cfg;
  cfg.n = read_pod<std::uint32_t>(in, path);
  cfg.hidden_dim = read_pod<std::uint32_t>(in, path);
  cfg.num_layers = read_pod<std::uint32_t>(in, path);
  cfg.per_relation_mlp = read_pod<std::uint8_t>(in, path) != 0;
  cfg.attention = static_cast<AttentionMode>(read_pod<std::uint8_t>(in, path));
  cfg.union_mode = static_cast<UnionMode>(read_pod<std::uint8_t>(in, path));
  cfg.gamma = read_pod<double>(in, path);
  cfg.neg_k = read_pod<std::uint32_t>(in, path);
  cfg.param_floor = read_pod<double>(in, path);
  const auto num_entities = read_pod<std::uint32_t>(in, path);
  const auto num_relations = read_pod<std::uint32_t>(in, path);

  Model model(cfg, num_entities, num_relations, /*seed=*/0);
  ad::ParamStore& params = model.params();
  const auto block_count = read_pod<std::uint32_t>(in, path);
  if (block_count != params.num_blocks()) {
    throw FormatError(path, 0, "block count mismatch against config");
  }
  for (std::size_t b = 0; b < params.num_blocks(); ++b) {
    const std::string name = read_string(in, path);
    std::vector<double> values = read_doubles(in, path);
    if (name != params.name(static_cast<int>(b)) ||
        values.size() != params.values(static_cast<int>(b)).size()) {
      throw FormatError(path, 0,
                        "parameter block '" + name +
                            "' does not match the stored config");
    }
    params.values(static_cast<int>(b)) = std::move(values);
  }

  const bool has_optimizer = read_pod<std::uint8_t>(in, path) != 0;
  if (has_optimizer && optimizer) {
    optimizer->step = read_pod<std::uint64_t>(in, path);
    optimizer->lr = read_pod<double>(in, path);
    optimizer->m.clear();
    optimizer->v.clear();
    for (std::size_t b = 0; b < params.num_blocks(); ++b) {
      optimizer->m.push_back(read_doubles(in, path));
      optimizer->v.push_back(read_doubles(in, path));
    }
    optimizer->rng_state = read_string(in, path);
  } else if (optimizer) {
    *optimizer = OptimizerState{};
  }
  return model;
}

}  // namespace betae
