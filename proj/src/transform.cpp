#include "klpc/transform.hpp"

#include <cmath>

namespace klpc {

CoordinateTransform projection_coeffs(const KLBasis& basis_q,
                                      const KLBasis& reference) {
  if (!(basis_q.grid == reference.grid))
    throw ConfigError("projection_coeffs: grid mismatch");
  const int K = basis_q.truncation();
  if (reference.truncation() != K)
    throw ConfigError("projection_coeffs: truncations must match (K^r = K)");

  // B = Phi_r^t W Phi_q Lambda_q^{1/2}
  Eigen::MatrixXd weighted_ref =
      basis_q.grid.measures().asDiagonal() * reference.modes;
  Eigen::MatrixXd scaled_q =
      basis_q.modes * basis_q.eigvals.cwiseSqrt().asDiagonal();

  CoordinateTransform t;
  t.B = weighted_ref.transpose() * scaled_q;
  t.lambda_ref = reference.eigvals;
  return thresholded(std::move(t), 0.0);
}

CoordinateTransform thresholded(CoordinateTransform t, double kappa) {
  if (kappa < 0.0) throw ConfigError("thresholded: kappa must be >= 0");
  if (t.B.size() == 0) throw ConfigError("thresholded: B is missing");
  const int K = static_cast<int>(t.B.rows());
  const double lambda1 = t.lambda_ref.size() > 0 ? t.lambda_ref(0) : 0.0;
  t.kappa = kappa;
  t.Bhat = Eigen::MatrixXd::Zero(K, t.B.cols());
  t.K_pc = 0;
  for (int j = 0; j < K; ++j) {
    const double lj = t.lambda_ref(j);
    if (lambda1 > 0.0 && lj / lambda1 > kappa) {
      t.Bhat.row(j) = t.B.row(j) / std::sqrt(lj);
      ++t.K_pc;
    }
  }
  return t;
}

Eigen::MatrixXd sigma2(const CoordinateTransform& t) {
  if (t.B.size() == 0) throw ConfigError("sigma2: B is missing");
  return t.B * t.B.transpose();
}

double conditional_logdensity(const Eigen::VectorXd& eta_hat,
                              const Eigen::MatrixXd& s2) {
  const int K = static_cast<int>(s2.rows());
  if (eta_hat.size() != K || s2.cols() != K)
    throw ConfigError("conditional_logdensity: dimension mismatch");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s2);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("conditional_logdensity: factorization failed");
  const Eigen::VectorXd d = ldlt.vectorD();
  const double d_max = d.cwiseAbs().maxCoeff();
  double log_det = 0.0;
  for (int i = 0; i < K; ++i) {
    if (!(d(i) > 1e-14 * d_max))
      throw NumericError("conditional_logdensity: Sigma^2 is singular");
    log_det += std::log(d(i));
  }
  const double quad = eta_hat.dot(ldlt.solve(eta_hat));
  return -0.5 * quad - 0.5 * log_det - 0.5 * K * std::log(2.0 * M_PI);
}

Eigen::VectorXd xi_transform(const Eigen::VectorXd& eta,
                             const CoordinateTransform& t) {
  if (t.Bhat.size() == 0) throw ConfigError("xi_transform: Bhat is missing");
  if (eta.size() != t.Bhat.cols())
    throw ConfigError("xi_transform: coordinate dimension mismatch");
  return t.Bhat * eta;
}

StretchReport stretching(const CoordinateTransform& t) {
  if (t.Bhat.size() == 0) throw ConfigError("stretching: Bhat is missing");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.Bhat.transpose() *
                                                    t.Bhat);
  const double beta = es.eigenvalues().maxCoeff();
  return {t.q, std::max(beta, 0.0)};
}

}  // namespace klpc
