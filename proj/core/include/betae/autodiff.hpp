#pragma once

// Minimal reverse-mode accumulation over vector-valued nodes. The operator
// set is exactly what the model needs: elementwise arithmetic, ReLU,
// shifted softplus, dense affine layers, softmax-weighted parameter
// interpolation, and a fused KL-divergence sum with analytic partials.
//
// The tape is eager: node values are computed at creation, so callers can
// inspect intermediate values (the intersection operator sorts its inputs
// by value before combining them). backward() runs one reverse sweep and
// accumulates parameter gradients into a ParamStore.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace betae::ad {

// Named dense parameter blocks with parallel gradient buffers.
class ParamStore {
 public:
  int add_block(std::string name, std::size_t size);

  std::size_t num_blocks() const { return values_.size(); }
  const std::string& name(int block) const { return names_[block]; }
  std::vector<double>& values(int block) { return values_[block]; }
  const std::vector<double>& values(int block) const { return values_[block]; }
  std::vector<double>& grads(int block) { return grads_[block]; }
  const std::vector<double>& grads(int block) const { return grads_[block]; }

  void zero_grads();
  std::size_t total_size() const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<double>> grads_;
};

struct Var {
  std::uint32_t id = 0;
};

class Tape {
 public:
  explicit Tape(const ParamStore& params) : params_(&params) {}

  // Drops all nodes but keeps allocated capacity for reuse across steps.
  void reset();

  Var constant(std::span<const double> v);
  Var scalar(double v);

  // View over params[block][offset, offset+len); gradients flow back into
  // the matching ParamStore slice.
  Var param(int block, std::size_t offset, std::size_t len);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_scalar(Var a, double c);
  Var scale(Var a, double c);
  Var reciprocal(Var a);
  Var relu(Var a);
  // softplus(x) + shift, elementwise.
  Var softplus(Var a, double shift = 0.0);
  Var concat(Var a, Var b);

  // y = W x + b with W stored row-major (rows x cols) inside a param block.
  Var affine(int w_block, std::size_t w_offset, int b_block,
             std::size_t b_offset, std::size_t rows, std::size_t cols, Var x);

  // Softmax-weighted interpolation of m parameter vectors (interleaved
  // (alpha, beta) pairs of length 2n). `groups` is 1 for one weight per
  // input or n for one weight per Beta dimension; logits must have length
  // `groups`.
  Var attn_combine(std::span<const Var> logits, std::span<const Var> inputs,
                   std::size_t groups);

  // sum_d KL(Beta(p[2d], p[2d+1]) || Beta(q[2d], q[2d+1])) -> scalar.
  Var kl_sum(Var p, Var q);

  // Sum of one vector's components -> scalar.
  Var sum(Var a);

  // Mean of scalar nodes -> scalar.
  Var mean(std::span<const Var> xs);

  std::span<const double> value(Var v) const;
  std::size_t size(Var v) const;
  std::size_t num_nodes() const { return nodes_.size(); }

  // Reverse sweep from a scalar root; accumulates parameter gradients into
  // `sink`, which must be the store this tape reads from.
  void backward(Var root, ParamStore& sink);

 private:
  enum class Op : std::uint8_t {
    kConst,
    kParam,
    kAdd,
    kSub,
    kAddScalar,
    kScale,
    kReciprocal,
    kRelu,
    kSoftplus,
    kConcat,
    kAffine,
    kAttnCombine,
    kKlSum,
    kSum,
    kMean,
  };

  struct Node {
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double c = 0.0;
    int blk_w = -1;
    int blk_b = -1;
    std::size_t off_w = 0;
    std::size_t off_b = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;  // doubles as `groups` for kAttnCombine
    std::size_t extra_begin = 0;
    std::size_t extra_count = 0;
    std::size_t aux_begin = 0;
    std::size_t val_begin = 0;
    std::size_t len = 0;
  };

  Var push(Node node, std::size_t len);
  double* val_ptr(std::uint32_t id) { return data_.data() + nodes_[id].val_begin; }
  const double* val_ptr(std::uint32_t id) const {
    return data_.data() + nodes_[id].val_begin;
  }
  double* grad_ptr(std::uint32_t id) { return grad_.data() + nodes_[id].val_begin; }

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<double> data_;   // node values, one arena
  std::vector<double> grad_;   // node adjoints, same layout as data_
  std::vector<double> aux_;    // saved softmax weights etc.
  std::vector<std::uint32_t> extra_;  // variadic input ids
};

}  // namespace betae::ad
