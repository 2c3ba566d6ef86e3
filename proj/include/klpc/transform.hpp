#pragma once

#include <Eigen/Dense>

#include "klpc/kl.hpp"

namespace klpc {

// Change of coordinates between the KL basis of C(q) and the reference
// basis: eta_hat = B eta with B[j][i] = (phi_j^r, sqrt(lambda_i(q))
// phi_i(q))_X, and the kappa-thresholded scaled form xi = Bhat eta with
// Bhat[j][i] = B[j][i] / sqrt(lambda_j^r) for rows whose lambda_j^r /
// lambda_1^r exceeds kappa, zero otherwise.
struct CoordinateTransform {
  Eigen::MatrixXd B;
  Eigen::MatrixXd Bhat;
  Eigen::VectorXd lambda_ref;
  double kappa = 0.0;
  int K_pc = 0;  // rows of Bhat that survive the threshold
  HyperParams q{0.0, 0.0};  // hyper-parameters behind B, when known
};

struct StretchReport {
  HyperParams q;
  double beta_max = 0.0;  // largest eigen-value of Bhat^t Bhat
};

// Builds B from an oriented basis of C(q) and the reference basis
// (requires the same grid and equal truncations); Bhat is filled at
// kappa = 0.
CoordinateTransform projection_coeffs(const KLBasis& basis_q,
                                      const KLBasis& reference);

// Rebuilds Bhat and K_pc for the given threshold.
CoordinateTransform thresholded(CoordinateTransform t, double kappa);

// Sigma^2 = B B^t, the covariance of eta_hat given q.
Eigen::MatrixXd sigma2(const CoordinateTransform& t);

// log N(eta_hat; 0, s2) via a symmetric factorization; raises on pivots
// below 1e-14 of the largest.
double conditional_logdensity(const Eigen::VectorXd& eta_hat,
                              const Eigen::MatrixXd& s2);

Eigen::VectorXd xi_transform(const Eigen::VectorXd& eta,
                             const CoordinateTransform& t);

StretchReport stretching(const CoordinateTransform& t);

}  // namespace klpc
