#include "betae/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "betae/beta_math.hpp"

namespace betae::ad {

int ParamStore::add_block(std::string name, std::size_t size) {
  names_.push_back(std::move(name));
  values_.emplace_back(size, 0.0);
  grads_.emplace_back(size, 0.0);
  return static_cast<int>(values_.size()) - 1;
}

void ParamStore::zero_grads() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

std::size_t ParamStore::total_size() const {
  std::size_t total = 0;
  for (const auto& v : values_) total += v.size();
  return total;
}

namespace {

double softplus_val(double x) {
  // log(1 + e^x), stable for large |x|.
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void Tape::reset() {
  nodes_.clear();
  data_.clear();
  grad_.clear();
  aux_.clear();
  extra_.clear();
}

Var Tape::push(Node node, std::size_t len) {
  node.val_begin = data_.size();
  node.len = len;
  data_.resize(data_.size() + len, 0.0);
  nodes_.push_back(node);
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(std::span<const double> v) {
  Var out = push(Node{.op = Op::kConst}, v.size());
  std::copy(v.begin(), v.end(), val_ptr(out.id));
  return out;
}

Var Tape::scalar(double v) { return constant(std::span<const double>(&v, 1)); }

Var Tape::param(int block, std::size_t offset, std::size_t len) {
  const auto& src = params_->values(block);
  if (offset + len > src.size()) {
    throw std::out_of_range("Tape::param: slice outside block");
  }
  Node n{.op = Op::kParam, .blk_w = block, .off_w = offset};
  Var out = push(n, len);
  std::copy(src.begin() + offset, src.begin() + offset + len, val_ptr(out.id));
  return out;
}

Var Tape::add(Var a, Var b) {
  const std::size_t len = size(a);
  if (len != size(b)) throw std::invalid_argument("Tape::add: length mismatch");
  Var out = push(Node{.op = Op::kAdd, .a = a.id, .b = b.id}, len);
  const double* pa = val_ptr(a.id);
  const double* pb = val_ptr(b.id);
  double* po = val_ptr(out.id);
  for (std::size_t i = 0; i < len; ++i) po[i] = pa[i] + pb[i];
  return out;
}

Var Tape::sub(Var a, Var b) {
  const std::size_t len = size(a);
  if (len != size(b)) throw std::invalid_argument("Tape::sub: length mismatch");
  Var out = push(Node{.op = Op::kSub, .a = a.id, .b = b.id}, len);
  const double* pa = val_ptr(a.id);
  const double* pb = val_ptr(b.id);
  double* po = val_ptr(out.id);
  for (std::size_t i = 0; i < len; ++i) po[i] = pa[i] - pb[i];
  return out;
}

Var Tape::add_scalar(Var a, double c) {
  const std::size_t len = size(a);
  Var out = push(Node{.op = Op::kAddScalar, .a = a.id, .c = c}, len);
  const double* pa = val_ptr(a.id);
  double* po = val_ptr(out.id);
  for (std::size_t i = 0; i < len; ++i) po[i] = pa[i] + c;
  return out;
}

Var Tape::scale(Var a, double c) {
  const std::size_t len = size(a);
  Var out = push(Node{.op = Op::kScale, .a = a.id, .c = c}, len);
  const double* pa = val_ptr(a.id);
  double* po = val_ptr(out.id);
  for (std::size_t i = 0; i < len; ++i) po[i] = c * pa[i];
  return out;
}

Var Tape::reciprocal(Var a) {
  const std::size_t len = size(a);
  Var out = push(Node{.op = Op::kReciprocal, .a = a.id}, len);
  const double* pa = val_ptr(a.id);
  double* po = val_ptr(out.id);
  for (std::size_t i = 0; i < len; ++i) po[i] = 1.0 / pa[i];
  return out;
}

Var Tape::relu(Var a) {
  const std::size_t len = size(a);
  Var out = push(Node{.op = Op::kRelu, .a = a.id}, len);
  const double* pa = val_ptr(a.id);
  double* po = val_ptr(out.id);
  for (std::size_t i = 0; i < len; ++i) po[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  return out;
}

Var Tape::softplus(Var a, double shift) {
  const std::size_t len = size(a);
  Var out = push(Node{.op = Op::kSoftplus, .a = a.id, .c = shift}, len);
  const double* pa = val_ptr(a.id);
  double* po = val_ptr(out.id);
  for (std::size_t i = 0; i < len; ++i) po[i] = softplus_val(pa[i]) + shift;
  return out;
}

Var Tape::concat(Var a, Var b) {
  const std::size_t la = size(a);
  const std::size_t lb = size(b);
  Var out = push(Node{.op = Op::kConcat, .a = a.id, .b = b.id}, la + lb);
  double* po = val_ptr(out.id);
  std::copy(val_ptr(a.id), val_ptr(a.id) + la, po);
  std::copy(val_ptr(b.id), val_ptr(b.id) + lb, po + la);
  return out;
}

Var Tape::affine(int w_block, std::size_t w_offset, int b_block,
                 std::size_t b_offset, std::size_t rows, std::size_t cols,
                 Var x) {
  if (size(x) != cols) throw std::invalid_argument("Tape::affine: bad input");
  Node n{.op = Op::kAffine,
         .a = x.id,
         .blk_w = w_block,
         .blk_b = b_block,
         .off_w = w_offset,
         .off_b = b_offset,
         .rows = rows,
         .cols = cols};
  Var out = push(n, rows);
  const double* w = params_->values(w_block).data() + w_offset;
  const double* b = params_->values(b_block).data() + b_offset;
  const double* px = val_ptr(x.id);
  double* po = val_ptr(out.id);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * px[c];
    po[r] = acc;
  }
  return out;
}

Var Tape::attn_combine(std::span<const Var> logits,
                       std::span<const Var> inputs, std::size_t groups) {
  const std::size_t m = inputs.size();
  if (m < 2 || logits.size() != m) {
    throw std::invalid_argument("Tape::attn_combine: need >=2 inputs");
  }
  const std::size_t len = size(inputs[0]);
  for (std::size_t i = 0; i < m; ++i) {
    if (size(inputs[i]) != len || size(logits[i]) != groups) {
      throw std::invalid_argument("Tape::attn_combine: length mismatch");
    }
  }
  if (groups != 1 && groups * 2 != len) {
    throw std::invalid_argument("Tape::attn_combine: bad group count");
  }

  Node n{.op = Op::kAttnCombine, .cols = groups};
  n.extra_begin = extra_.size();
  n.extra_count = 2 * m;
  for (const Var& v : logits) extra_.push_back(v.id);
  for (const Var& v : inputs) extra_.push_back(v.id);
  n.aux_begin = aux_.size();
  aux_.resize(aux_.size() + m * groups, 0.0);
  Var out = push(n, len);

  const Node& node = nodes_[out.id];
  double* weights = aux_.data() + node.aux_begin;  // m x groups
  const std::uint32_t* lids = extra_.data() + node.extra_begin;
  const std::uint32_t* xids = lids + m;
  for (std::size_t g = 0; g < groups; ++g) {
    double max_logit = val_ptr(lids[0])[g];
    for (std::size_t i = 1; i < m; ++i) {
      max_logit = std::max(max_logit, val_ptr(lids[i])[g]);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double w = std::exp(val_ptr(lids[i])[g] - max_logit);
      weights[i * groups + g] = w;
      norm += w;
    }
    for (std::size_t i = 0; i < m; ++i) weights[i * groups + g] /= norm;
  }
  double* po = val_ptr(out.id);
  for (std::size_t j = 0; j < len; ++j) {
    const std::size_t g = groups == 1 ? 0 : j / 2;
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      acc += weights[i * groups + g] * val_ptr(xids[i])[j];
    }
    po[j] = acc;
  }
  return out;
}

Var Tape::kl_sum(Var p, Var q) {
  const std::size_t len = size(p);
  if (len != size(q) || len % 2 != 0) {
    throw std::invalid_argument("Tape::kl_sum: bad embedding length");
  }
  Var out = push(Node{.op = Op::kKlSum, .a = p.id, .b = q.id}, 1);
  const double* pp = val_ptr(p.id);
  const double* pq = val_ptr(q.id);
  double acc = 0.0;
  for (std::size_t d = 0; d < len; d += 2) {
    acc += kl(BetaParams{pp[d], pp[d + 1]}, BetaParams{pq[d], pq[d + 1]});
  }
  *val_ptr(out.id) = acc;
  return out;
}

Var Tape::sum(Var a) {
  Var out = push(Node{.op = Op::kSum, .a = a.id}, 1);
  const double* pa = val_ptr(a.id);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes_[a.id].len; ++i) acc += pa[i];
  *val_ptr(out.id) = acc;
  return out;
}

Var Tape::mean(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("Tape::mean: empty input");
  Node n{.op = Op::kMean};
  n.extra_begin = extra_.size();
  n.extra_count = xs.size();
  for (const Var& v : xs) {
    if (size(v) != 1) throw std::invalid_argument("Tape::mean: scalars only");
    extra_.push_back(v.id);
  }
  Var out = push(n, 1);
  const Node& node = nodes_[out.id];
  double acc = 0.0;
  for (std::size_t i = 0; i < node.extra_count; ++i) {
    acc += *val_ptr(extra_[node.extra_begin + i]);
  }
  *val_ptr(out.id) = acc / static_cast<double>(node.extra_count);
  return out;
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return {data_.data() + n.val_begin, n.len};
}

std::size_t Tape::size(Var v) const { return nodes_[v.id].len; }

void Tape::backward(Var root, ParamStore& sink) {
  if (size(root) != 1) {
    throw std::invalid_argument("Tape::backward: root must be scalar");
  }
  grad_.assign(data_.size(), 0.0);
  grad_[nodes_[root.id].val_begin] = 1.0;

  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    const double* gy = grad_.data() + n.val_begin;
    switch (n.op) {
      case Op::kConst:
        break;
      case Op::kParam: {
        double* gp = sink.grads(n.blk_w).data() + n.off_w;
        for (std::size_t i = 0; i < n.len; ++i) gp[i] += gy[i];
        break;
      }
      case Op::kAdd: {
        double* ga = grad_ptr(n.a);
        double* gb = grad_ptr(n.b);
        for (std::size_t i = 0; i < n.len; ++i) {
          ga[i] += gy[i];
          gb[i] += gy[i];
        }
        break;
      }
      case Op::kSub: {
        double* ga = grad_ptr(n.a);
        double* gb = grad_ptr(n.b);
        for (std::size_t i = 0; i < n.len; ++i) {
          ga[i] += gy[i];
          gb[i] -= gy[i];
        }
        break;
      }
      case Op::kAddScalar: {
        double* ga = grad_ptr(n.a);
        for (std::size_t i = 0; i < n.len; ++i) ga[i] += gy[i];
        break;
      }
      case Op::kScale: {
        double* ga = grad_ptr(n.a);
        for (std::size_t i = 0; i < n.len; ++i) ga[i] += n.c * gy[i];
        break;
      }
      case Op::kReciprocal: {
        double* ga = grad_ptr(n.a);
        const double* y = val_ptr(id);
        for (std::size_t i = 0; i < n.len; ++i) ga[i] -= y[i] * y[i] * gy[i];
        break;
      }
      case Op::kRelu: {
        double* ga = grad_ptr(n.a);
        const double* x = val_ptr(n.a);
        for (std::size_t i = 0; i < n.len; ++i) {
          if (x[i] > 0.0) ga[i] += gy[i];
        }
        break;
      }
      case Op::kSoftplus: {
        double* ga = grad_ptr(n.a);
        const double* x = val_ptr(n.a);
        for (std::size_t i = 0; i < n.len; ++i) ga[i] += sigmoid(x[i]) * gy[i];
        break;
      }
      case Op::kConcat: {
        double* ga = grad_ptr(n.a);
        double* gb = grad_ptr(n.b);
        const std::size_t la = nodes_[n.a].len;
        for (std::size_t i = 0; i < la; ++i) ga[i] += gy[i];
        for (std::size_t i = la; i < n.len; ++i) gb[i - la] += gy[i];
        break;
      }
      case Op::kAffine: {
        const double* w = params_->values(n.blk_w).data() + n.off_w;
        const double* x = val_ptr(n.a);
        double* gx = grad_ptr(n.a);
        double* gw = sink.grads(n.blk_w).data() + n.off_w;
        double* gb = sink.grads(n.blk_b).data() + n.off_b;
        for (std::size_t r = 0; r < n.rows; ++r) {
          const double g = gy[r];
          if (g == 0.0) continue;
          gb[r] += g;
          const double* wr = w + r * n.cols;
          double* gwr = gw + r * n.cols;
          for (std::size_t c = 0; c < n.cols; ++c) {
            gwr[c] += g * x[c];
            gx[c] += g * wr[c];
          }
        }
        break;
      }
      case Op::kAttnCombine: {
        const std::size_t groups = n.cols;
        const std::size_t m = n.extra_count / 2;
        const std::uint32_t* lids = extra_.data() + n.extra_begin;
        const std::uint32_t* xids = lids + m;
        const double* weights = aux_.data() + n.aux_begin;
        for (std::size_t g = 0; g < groups; ++g) {
          const std::size_t j0 = groups == 1 ? 0 : 2 * g;
          const std::size_t j1 = groups == 1 ? n.len : 2 * g + 2;
          // s_i = sum_j gy[j] x_i[j] over this group's positions.
          double sbar = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            const double* xi = val_ptr(xids[i]);
            double si = 0.0;
            for (std::size_t j = j0; j < j1; ++j) si += gy[j] * xi[j];
            sbar += weights[i * groups + g] * si;
          }
          for (std::size_t i = 0; i < m; ++i) {
            const double wi = weights[i * groups + g];
            const double* xi = val_ptr(xids[i]);
            double* gxi = grad_ptr(xids[i]);
            double si = 0.0;
            for (std::size_t j = j0; j < j1; ++j) {
              si += gy[j] * xi[j];
              gxi[j] += wi * gy[j];
            }
            grad_ptr(lids[i])[g] += wi * (si - sbar);
          }
        }
        break;
      }
      case Op::kKlSum: {
        const double g = gy[0];
        if (g == 0.0) break;
        const double* pp = val_ptr(n.a);
        const double* pq = val_ptr(n.b);
        double* gp = grad_ptr(n.a);
        double* gq = grad_ptr(n.b);
        const std::size_t dims = nodes_[n.a].len;
        for (std::size_t d = 0; d < dims; d += 2) {
          const KlGrad kg = kl_grad(BetaParams{pp[d], pp[d + 1]},
                                    BetaParams{pq[d], pq[d + 1]});
          gp[d] += g * kg.d_alpha_p;
          gp[d + 1] += g * kg.d_beta_p;
          gq[d] += g * kg.d_alpha_q;
          gq[d + 1] += g * kg.d_beta_q;
        }
        break;
      }
      case Op::kSum: {
        double* ga = grad_ptr(n.a);
        const std::size_t alen = nodes_[n.a].len;
        for (std::size_t i = 0; i < alen; ++i) ga[i] += gy[0];
        break;
      }
      case Op::kMean: {
        const double g = gy[0] / static_cast<double>(n.extra_count);
        for (std::size_t i = 0; i < n.extra_count; ++i) {
          *grad_ptr(extra_[n.extra_begin + i]) += g;
        }
        break;
      }
    }
  }
}

}  // namespace betae::ad
