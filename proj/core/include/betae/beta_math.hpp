#pragma once

// Beta-distribution primitives: log-beta, digamma/trigamma, PDF,
// differential entropy, KL divergence, and the exact partial derivatives of
// the KL divergence. Everything here is a pure function of its arguments.

namespace betae {

// Shape parameters of one Beta distribution. Valid when both are positive;
// the model side keeps them inside [kParamFloor, kParamCeil] so that the
// reciprocal (negation) stays in range and densities remain integrable.
struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;
};

inline constexpr double kParamFloor = 0.05;
inline constexpr double kParamCeil = 1e6;

// ln B(a, b) = lgamma(a) + lgamma(b) - lgamma(a + b). Throws
// std::domain_error for non-positive input.
double log_beta_fn(double a, double b);

// Digamma psi(x) and trigamma psi'(x) for x > 0, via upward recurrence to
// x >= 6 followed by the asymptotic series. Absolute accuracy ~1e-12.
double digamma(double x);
double trigamma(double x);

// Density of Beta(p) at x in (0, 1); x outside the open interval is a
// domain error.
double log_pdf(const BetaParams& p, double x);
double pdf(const BetaParams& p, double x);

// Differential entropy
//   H = ln B(a,b) - (a-1)[psi(a) - psi(a+b)] - (b-1)[psi(b) - psi(a+b)].
double entropy(const BetaParams& p);

// KL(p || q), closed form:
//   ln B(aq,bq) - ln B(ap,bp) + (ap-aq) psi(ap) + (bp-bq) psi(bp)
//   + (aq-ap+bq-bp) psi(ap+bp).
double kl(const BetaParams& p, const BetaParams& q);

// Exact partial derivatives of kl(p, q) w.r.t. all four shape parameters.
struct KlGrad {
  double d_alpha_p = 0.0;
  double d_beta_p = 0.0;
  double d_alpha_q = 0.0;
  double d_beta_q = 0.0;
};
KlGrad kl_grad(const BetaParams& p, const BetaParams& q);

}  // namespace betae
