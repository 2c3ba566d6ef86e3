#pragma once

#include <Eigen/Dense>

#include "klpc/kernels.hpp"

namespace klpc {

// Discrete KL basis: descending eigen-values and X-orthonormal piecewise
// constant modes of a covariance matrix on the grid.
struct KLBasis {
  Grid1D grid;
  Eigen::VectorXd eigvals;  // lambda_1 >= ... >= lambda_K >= 0
  Eigen::MatrixXd modes;    // N x K, ||phi_k||_X = 1
  double full_trace = 0.0;  // sum over the complete discrete spectrum

  int truncation() const { return static_cast<int>(eigvals.size()); }
};

struct FieldSample {
  Grid1D grid;
  Eigen::VectorXd values;
};

// Measure-weighted symmetric eigen-solve of the discrete Fredholm problem.
// Negative eigen-values in [-1e-10 * lambda_1, 0) are clamped to zero;
// anything lower raises.
KLBasis decompose(const CovMatrix& cov, int K);

// Flip modes so that (phi_k, phi_k^r)_X >= 0; exact zeros left alone.
KLBasis orient(KLBasis basis, const KLBasis& reference);

// Deterministic self-orientation for reference bases: largest-magnitude
// component made positive (first index wins ties).
KLBasis orient_canonical(KLBasis basis);

// m = sum_k sqrt(lambda_k) phi_k eta_k (the process is centered).
FieldSample reconstruct(const KLBasis& basis, const Eigen::VectorXd& eta);

// eta_k = (m, phi_k)_X / sqrt(lambda_k); inverse of reconstruct on the span.
Eigen::VectorXd project(const FieldSample& field, const KLBasis& basis);

// m-hat = sum_k phi_k^r eta_hat_k; the sqrt(lambda) factor is absorbed in
// eta_hat by the coordinate transformation.
FieldSample reconstruct_in_reference(const Eigen::VectorXd& eta_hat,
                                     const KLBasis& reference);

}  // namespace klpc
