#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

#include "klpc/common.hpp"
#include "klpc/quadrature.hpp"
#include "klpc/rng.hpp"

namespace klpc {

// Covariance hyper-parameters q = {l, sigma_f^2}.
struct HyperParams {
  double l = 0.5;
  double sigma_f2 = 0.5;
};

inline void validate(const HyperParams& q) {
  if (!(q.l > 0.0) || !(q.sigma_f2 > 0.0))
    throw ConfigError("invalid hyper-parameters: l and sigma_f2 must be > 0");
}

// Partition of D = [0, 1] into cells; fields and KL modes are piecewise
// constant on the cells, and (u, v)_X = sum_i u_i v_i w_i.
class Grid1D {
 public:
  Grid1D() = default;
  explicit Grid1D(std::vector<double> boundaries);
  static Grid1D uniform(int n_cells);

  int size() const { return static_cast<int>(boundaries_.size()) - 1; }
  double measure(int i) const { return boundaries_[i + 1] - boundaries_[i]; }
  double midpoint(int i) const {
    return 0.5 * (boundaries_[i] + boundaries_[i + 1]);
  }
  const std::vector<double>& boundaries() const { return boundaries_; }
  Eigen::VectorXd midpoints() const;
  Eigen::VectorXd measures() const;

  double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  double norm(const Eigen::VectorXd& u) const {
    return std::sqrt(inner(u, u));
  }
  // Cell containing x (boundaries assigned to the left cell's right edge).
  int locate(double x) const;

  bool operator==(const Grid1D& other) const {
    return boundaries_ == other.boundaries_;
  }

 private:
  std::vector<double> boundaries_;
};

// --- scalar priors for the hyper-parameters -------------------------------

struct UniformDist {
  double lo = 0.0, hi = 1.0;
};
struct PointMassDist {
  double value = 0.0;
};
struct InvGammaDist {
  double alpha = 3.0, beta = 1.0;
};
struct DiscreteDist {
  std::vector<double> values;
  std::vector<double> weights;  // need not be normalized
};

using ScalarPrior =
    std::variant<UniformDist, PointMassDist, InvGammaDist, DiscreteDist>;

double prior_mean(const ScalarPrior& p);
double prior_log_density(const ScalarPrior& p, double x);
double prior_sample(const ScalarPrior& p, Rng& rng);

// Joint prior of q; l and sigma_f2 are independent.
struct HyperPrior {
  ScalarPrior l = UniformDist{0.1, 1.0};
  ScalarPrior sigma_f2 = InvGammaDist{3.0, 1.0};

  HyperParams sample(Rng& rng) const {
    return {prior_sample(l, rng), prior_sample(sigma_f2, rng)};
  }
  double log_density(const HyperParams& q) const {
    return prior_log_density(l, q.l) + prior_log_density(sigma_f2, q.sigma_f2);
  }
};

// --- kernels ---------------------------------------------------------------

// C(x,x') = sigma_f^2 exp(-(x-x')^2 / (2 l^2)); both parameters from q.
struct SquaredExponentialKernel {};

// SE term plus linear, bias and nugget terms with fixed coefficients.
// Experimental: the shipped experiments use the pure SE kernel.
struct CompositeKernel {
  double sigma_d2 = 0.0;
  double sigma_b2 = 0.0;
  double sigma_n2 = 0.0;
};

// q-independent kernel tabulated at the midpoints of its grid (used for the
// q-averaged covariance C-bar); evaluated elsewhere by bilinear
// interpolation.
struct TabulatedKernel {
  Grid1D grid;
  Eigen::MatrixXd values;  // N x N, symmetric
};

using Kernel =
    std::variant<SquaredExponentialKernel, CompositeKernel, TabulatedKernel>;

struct CovMatrix {
  Grid1D grid;
  Eigen::MatrixXd values;  // N x N symmetric
};

double eval_kernel(const Kernel& kernel, double x, double xp,
                   const HyperParams& q);

CovMatrix assemble_cov_matrix(const Kernel& kernel, const Grid1D& grid,
                              const HyperParams& q);

struct AveragingQuadrature {
  int l_nodes = 64;  // Gauss-Legendre nodes over a uniform-l support
};

// q-averaged kernel per C-bar = int C(q) p_q(q) dq, tabulated on `grid`.
// The sigma_f2 integral factors out analytically (the SE term is linear in
// sigma_f2), so only l is integrated numerically.
Kernel average_kernel(const Kernel& kernel, const HyperPrior& prior,
                      const Grid1D& grid, const AveragingQuadrature& quad);

}  // namespace klpc
