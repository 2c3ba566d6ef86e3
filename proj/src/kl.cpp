#include "klpc/kl.hpp"

#include <cmath>

namespace klpc {

KLBasis decompose(const CovMatrix& cov, int K) {
  const int n = cov.grid.size();
  if (K < 1 || K > n)
    throw ConfigError("decompose: truncation K must be in [1, N]");
  if (cov.values.rows() != n || cov.values.cols() != n)
    throw ConfigError("decompose: covariance/grid size mismatch");
  const double max_abs = cov.values.cwiseAbs().maxCoeff();
  const double asym = (cov.values - cov.values.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(max_abs, 1.0))
    throw ConfigError("decompose: covariance matrix is not symmetric");

  // Symmetrize the measure-weighted problem: S = W^1/2 C W^1/2, then
  // phi = W^-1/2 psi keeps ||phi||_X = 1 exactly.
  Eigen::VectorXd sqrt_w = cov.grid.measures().cwiseSqrt();
  Eigen::MatrixXd s = sqrt_w.asDiagonal() * cov.values * sqrt_w.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success)
    throw NumericError("decompose: eigen-solver failed");

  const Eigen::VectorXd& vals = es.eigenvalues();  // ascending
  const double lambda_max = vals(n - 1);
  const double neg_tol = 1e-10 * std::max(lambda_max, 0.0);
  if (vals(0) < -neg_tol)
    throw NumericError("decompose: covariance indefinite beyond tolerance");

  KLBasis basis;
  basis.grid = cov.grid;
  basis.full_trace = vals.sum();
  basis.eigvals.resize(K);
  basis.modes.resize(n, K);
  for (int k = 0; k < K; ++k) {
    const int src = n - 1 - k;
    basis.eigvals(k) = std::max(vals(src), 0.0);
    basis.modes.col(k) = es.eigenvectors().col(src).cwiseQuotient(sqrt_w);
  }
  return basis;
}

KLBasis orient(KLBasis basis, const KLBasis& reference) {
  if (!(basis.grid == reference.grid))
    throw ConfigError("orient: grid mismatch");
  const int k_max = std::min(basis.truncation(), reference.truncation());
  for (int k = 0; k < k_max; ++k) {
    const double s = basis.grid.inner(basis.modes.col(k), reference.modes.col(k));
    if (s < 0.0) basis.modes.col(k) = -basis.modes.col(k);
  }
  return basis;
}

KLBasis orient_canonical(KLBasis basis) {
  for (int k = 0; k < basis.truncation(); ++k) {
    int arg = 0;
    double best = 0.0;
    for (int i = 0; i < basis.modes.rows(); ++i) {
      const double a = std::abs(basis.modes(i, k));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (basis.modes(arg, k) < 0.0) basis.modes.col(k) = -basis.modes.col(k);
  }
  return basis;
}

FieldSample reconstruct(const KLBasis& basis, const Eigen::VectorXd& eta) {
  if (eta.size() != basis.truncation())
    throw ConfigError("reconstruct: coordinate dimension mismatch");
  Eigen::VectorXd scaled = basis.eigvals.cwiseSqrt().cwiseProduct(eta);
  return {basis.grid, basis.modes * scaled};
}

Eigen::VectorXd project(const FieldSample& field, const KLBasis& basis) {
  if (!(field.grid == basis.grid))
    throw ConfigError("project: grid mismatch");
  const int K = basis.truncation();
  Eigen::VectorXd eta(K);
  for (int k = 0; k < K; ++k) {
    if (!(basis.eigvals(k) > 0.0))
      throw NumericError("project: degenerate mode in the retained set");
    eta(k) = basis.grid.inner(field.values, basis.modes.col(k)) /
             std::sqrt(basis.eigvals(k));
  }
  return eta;
}

FieldSample reconstruct_in_reference(const Eigen::VectorXd& eta_hat,
                                     const KLBasis& reference) {
  if (eta_hat.size() != reference.truncation())
    throw ConfigError("reconstruct_in_reference: dimension mismatch");
  return {reference.grid, reference.modes * eta_hat};
}

}  // namespace klpc
