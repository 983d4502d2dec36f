#include "betae/autodiff.hpp"

#include <cmath>
#include <vector>

#include "betae/beta_math.hpp"

#include "betae/rng.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace betae;
using namespace betae::testing;
namespace ad = betae::ad;

namespace {

// Gradient of `build` (which must return a scalar Var) w.r.t. every entry
// of every block, validated against central differences.
void check_all_gradients(ad::ParamStore& params,
                         const std::function<ad::Var(ad::Tape&)>& build,
                         double h = 1e-6, double tol = 1e-5) {
  ad::Tape tape(params);
  const ad::Var root = build(tape);
  params.zero_grads();
  tape.backward(root, params);

  auto eval = [&] {
    ad::Tape probe(params);
    return probe.value(build(probe))[0];
  };
  for (std::size_t b = 0; b < params.num_blocks(); ++b) {
    auto& values = params.values(static_cast<int>(b));
    const auto& grads = params.grads(static_cast<int>(b));
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double fd = central_difference(eval, &values[i], h);
      const bool ok = close_rel(grads[i], fd, tol);
      if (!ok) {
        CAPTURE(params.name(static_cast<int>(b)));
        CAPTURE(i);
        CAPTURE(grads[i]);
        CAPTURE(fd);
      }
      REQUIRE(ok);
    }
  }
}

ad::ParamStore random_store(
    const std::vector<std::pair<std::string, std::size_t>>& blocks,
    double lo, double hi, std::uint64_t seed) {
  ad::ParamStore params;
  Rng rng(seed);
  for (const auto& [name, size] : blocks) {
    const int id = params.add_block(name, size);
    for (double& x : params.values(id)) x = lo + rng.real() * (hi - lo);
  }
  return params;
}

}  // namespace

TEST_CASE("elementwise op gradients") {
  ad::ParamStore params =
      random_store({{"a", 6}, {"b", 6}}, -1.5, 1.5, 101);
  check_all_gradients(params, [](ad::Tape& t) {
    const ad::Var a = t.param(0, 0, 6);
    const ad::Var b = t.param(1, 0, 6);
    ad::Var x = t.add(t.scale(a, 1.7), t.sub(b, a));
    x = t.softplus(x, 0.05);     // keeps reciprocal inputs positive
    x = t.reciprocal(x);
    x = t.add_scalar(x, 0.25);
    x = t.relu(t.concat(x, t.scale(b, -0.4)));
    return t.sum(x);
  });
}

TEST_CASE("affine gradients") {
  ad::ParamStore params = random_store(
      {{"w0", 4 * 3}, {"b0", 4}, {"w1", 2 * 4}, {"b1", 2}, {"x", 3}},
      -1.0, 1.0, 202);
  check_all_gradients(params, [](ad::Tape& t) {
    ad::Var x = t.param(4, 0, 3);
    x = t.relu(t.affine(0, 0, 1, 0, 4, 3, x));
    x = t.affine(2, 0, 3, 0, 2, 4, x);
    return t.sum(t.softplus(x));
  });
}

TEST_CASE("attn_combine gradients, global weights") {
  ad::ParamStore params = random_store(
      {{"l", 3}, {"x0", 4}, {"x1", 4}, {"x2", 4}}, 0.1, 2.0, 303);
  check_all_gradients(params, [](ad::Tape& t) {
    std::vector<ad::Var> logits = {t.param(0, 0, 1), t.param(0, 1, 1),
                                   t.param(0, 2, 1)};
    std::vector<ad::Var> inputs = {t.param(1, 0, 4), t.param(2, 0, 4),
                                   t.param(3, 0, 4)};
    return t.sum(t.attn_combine(logits, inputs, 1));
  });
}

TEST_CASE("attn_combine gradients, per-dimension weights") {
  ad::ParamStore params = random_store(
      {{"l0", 2}, {"l1", 2}, {"x0", 4}, {"x1", 4}}, 0.1, 2.0, 304);
  check_all_gradients(params, [](ad::Tape& t) {
    std::vector<ad::Var> logits = {t.param(0, 0, 2), t.param(1, 0, 2)};
    std::vector<ad::Var> inputs = {t.param(2, 0, 4), t.param(3, 0, 4)};
    // Weight the output so each position carries a distinct adjoint.
    const double w[4] = {1.0, -0.5, 2.0, 0.7};
    ad::Var combined = t.attn_combine(logits, inputs, 2);
    ad::Var weights = t.constant(std::span<const double>(w, 4));
    ad::Var half = t.scale(t.add(combined, weights), 0.5);
    return t.sum(half);
  });
}

TEST_CASE("kl_sum value and gradients") {
  ad::ParamStore params =
      random_store({{"p", 6}, {"q", 6}}, 0.3, 5.0, 405);
  {
    ad::Tape tape(params);
    const ad::Var d = tape.kl_sum(tape.param(0, 0, 6), tape.param(1, 0, 6));
    double expected = 0.0;
    const auto& p = params.values(0);
    const auto& q = params.values(1);
    for (int i = 0; i < 6; i += 2) {
      expected += kl({p[i], p[i + 1]}, {q[i], q[i + 1]});
    }
    CHECK(tape.value(d)[0] == doctest::Approx(expected).epsilon(1e-14));
  }
  check_all_gradients(params, [](ad::Tape& t) {
    return t.kl_sum(t.param(0, 0, 6), t.param(1, 0, 6));
  });
}

TEST_CASE("mean gradients") {
  ad::ParamStore params = random_store({{"s", 5}}, -2.0, 2.0, 506);
  check_all_gradients(params, [](ad::Tape& t) {
    std::vector<ad::Var> xs;
    for (std::size_t i = 0; i < 5; ++i) {
      xs.push_back(t.softplus(t.param(0, i, 1)));
    }
    return t.mean(xs);
  });
}

TEST_CASE("gradients accumulate when a parameter is reused") {
  ad::ParamStore params = random_store({{"x", 3}}, 0.5, 1.5, 607);
  check_all_gradients(params, [](ad::Tape& t) {
    const ad::Var x = t.param(0, 0, 3);
    const ad::Var y = t.param(0, 0, 3);  // same slice, second leaf
    return t.sum(t.add(t.reciprocal(x), t.scale(y, 2.0)));
  });
}

TEST_CASE("tape reset reuses storage deterministically") {
  ad::ParamStore params = random_store({{"x", 4}}, 0.1, 1.0, 708);
  ad::Tape tape(params);
  auto build = [&] {
    tape.reset();
    return tape.value(tape.softplus(tape.param(0, 0, 4), 0.05));
  };
  const std::vector<double> first(build().begin(), build().end());
  const auto second = build();
  CHECK(std::equal(first.begin(), first.end(), second.begin(), second.end()));
}
