#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "klpc/common.hpp"

namespace klpc {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the
// orthogonal-polynomial recurrence, weights come from the first components
// of the eigenvectors.
inline QuadratureRule golub_welsch(const Eigen::VectorXd& off_diag,
                                   double weight_mass) {
  const int n = static_cast<int>(off_diag.size()) + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = off_diag(i);
    jacobi(i + 1, i) = off_diag(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = weight_mass * v0 * v0;
  }
  return rule;
}

// Gauss-Legendre on [lo, hi]; weights sum to hi - lo.
inline QuadratureRule gauss_legendre(int n, double lo, double hi) {
  if (n < 1) throw ConfigError("gauss_legendre: need at least one node");
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k)
    off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  QuadratureRule rule = golub_welsch(off, 2.0);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

// Gauss-Hermite for the standard Gaussian weight exp(-x^2/2)/sqrt(2*pi);
// weights sum to 1. Exact for polynomials of degree <= 2n-1.
inline QuadratureRule gauss_hermite_prob(int n) {
  if (n < 1) throw ConfigError("gauss_hermite_prob: need at least one node");
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  return golub_welsch(off, 1.0);
}

}  // namespace klpc
