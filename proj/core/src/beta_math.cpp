#include "betae/beta_math.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace betae {

namespace {

void require_positive(double x, const char* what) {
  if (!(x > 0.0)) {
    throw std::domain_error(std::string(what) + " must be positive");
  }
}

}  // namespace

double log_beta_fn(double a, double b) {
  require_positive(a, "log_beta_fn: a");
  require_positive(b, "log_beta_fn: b");
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double digamma(double x) {
  require_positive(x, "digamma: x");
  // psi(x) = psi(x+1) - 1/x, applied until x >= 8, then the asymptotic
  // series psi(x) ~ ln x - 1/(2x) - sum B_2k / (2k x^2k).
  double acc = 0.0;
  while (x < 8.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Coefficients B_2k / 2k for k = 1..6.
  double series = inv2 *
      (1.0 / 12.0 -
       inv2 * (1.0 / 120.0 -
               inv2 * (1.0 / 252.0 -
                       inv2 * (1.0 / 240.0 -
                               inv2 * (1.0 / 132.0 -
                                       inv2 * (691.0 / 32760.0))))));
  return acc + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma: x");
  // psi'(x) = psi'(x+1) + 1/x^2 until x >= 8, then
  // psi'(x) ~ 1/x + 1/(2x^2) + sum B_2k / x^(2k+1).
  double acc = 0.0;
  while (x < 8.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = inv *
      (1.0 +
       inv * (0.5 +
              inv * (1.0 / 6.0 -
                     inv2 * (1.0 / 30.0 -
                             inv2 * (1.0 / 42.0 -
                                     inv2 * (1.0 / 30.0 -
                                             inv2 * (5.0 / 66.0 -
                                                     inv2 * (691.0 /
                                                             2730.0))))))));
  return acc + series;
}

double log_pdf(const BetaParams& p, double x) {
  require_positive(p.alpha, "log_pdf: alpha");
  require_positive(p.beta, "log_pdf: beta");
  if (!(x > 0.0 && x < 1.0)) {
    throw std::domain_error("log_pdf: x must lie in (0, 1)");
  }
  return (p.alpha - 1.0) * std::log(x) + (p.beta - 1.0) * std::log1p(-x) -
         log_beta_fn(p.alpha, p.beta);
}

double pdf(const BetaParams& p, double x) { return std::exp(log_pdf(p, x)); }

double entropy(const BetaParams& p) {
  const double a = p.alpha;
  const double b = p.beta;
  const double psi_ab = digamma(a + b);
  return log_beta_fn(a, b) - (a - 1.0) * (digamma(a) - psi_ab) -
         (b - 1.0) * (digamma(b) - psi_ab);
}

double kl(const BetaParams& p, const BetaParams& q) {
  const double ap = p.alpha, bp = p.beta;
  const double aq = q.alpha, bq = q.beta;
  return log_beta_fn(aq, bq) - log_beta_fn(ap, bp) +
         (ap - aq) * digamma(ap) + (bp - bq) * digamma(bp) +
         (aq - ap + bq - bp) * digamma(ap + bp);
}

KlGrad kl_grad(const BetaParams& p, const BetaParams& q) {
  const double ap = p.alpha, bp = p.beta;
  const double aq = q.alpha, bq = q.beta;
  const double psi_p_sum = digamma(ap + bp);
  const double tri_p_sum = trigamma(ap + bp);
  const double mix = aq - ap + bq - bp;
  KlGrad g;
  g.d_alpha_p = (ap - aq) * trigamma(ap) + mix * tri_p_sum;
  g.d_beta_p = (bp - bq) * trigamma(bp) + mix * tri_p_sum;
  g.d_alpha_q = digamma(aq) - digamma(aq + bq) + psi_p_sum - digamma(ap);
  g.d_beta_q = digamma(bq) - digamma(aq + bq) + psi_p_sum - digamma(bp);
  return g;
}

}  // namespace betae
