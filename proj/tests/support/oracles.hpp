#pragma once

// Independent test oracles. Nothing here may call the closed-form
// implementations it is used to check: integrals come from quadrature,
// query answers from assignment enumeration over the raw triple set, and
// derivatives from central differences.

#include <functional>
#include <vector>

#include "betae/kg.hpp"
#include "betae/query.hpp"

namespace betae::testing {

// 1024-node Gauss-Legendre rule applied after the double-exponential
// substitution x = sigmoid(pi * sinh t), t in [-7, 7]. The substitution
// keeps every node strictly inside (0, 1) and tames the integrable
// endpoint singularities of Beta-type integrands down to shape 0.05.
//
// Computes  integral_0^1 x^(a-1) (1-x)^(b-1) g(x, ln x, ln(1-x)) dx
// with the full exponent assembled in log space.
double beta_weighted_integral(
    double a, double b,
    const std::function<double(double x, double lnx, double ln1mx)>& g);

// Same rule with the extra factor supplied in log space:
//   integral_0^1 x^(a-1) (1-x)^(b-1) exp(log_g(x, ln x, ln(1-x))) dx.
double beta_weighted_log_integral(
    double a, double b,
    const std::function<double(double x, double lnx, double ln1mx)>& log_g);

// ln Beta(a, b) by quadrature alone.
double quad_log_beta(double a, double b);

// -integral p ln p, with the normalizer also taken from quadrature.
double quad_entropy(double a, double b);

// integral p ln(p/q), normalizers from quadrature.
double quad_kl(double ap, double bp, double aq, double bq);

// Membership-based query answering: for each candidate answer, enumerate
// bound-variable assignments top-down and test edges via has_edge() only.
bool oracle_contains(const QueryGraph& q, EntityId candidate,
                     const KnowledgeGraph& g);
AnswerSet brute_force_answers(const QueryGraph& q, const KnowledgeGraph& g);

// Central-difference derivative of f with respect to *slot.
double central_difference(const std::function<double()>& f, double* slot,
                          double h);

// |a - b| <= tol * max(1, |a|, |b|)
bool close_rel(double a, double b, double tol);

}  // namespace betae::testing
