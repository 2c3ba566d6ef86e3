#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "klpc/pce.hpp"
#include "klpc/transform.hpp"

namespace klpc {

// Priors of the sampled quantities. sigma_o2 always carries the improper
// Jeffreys prior 1/sigma_o2 (used only inside the posterior); eta is
// standard K-variate normal.
struct Priors {
  ScalarPrior l = UniformDist{0.1, 1.0};
  ScalarPrior sigma_f2 = InvGammaDist{3.0, 1.0};
};

struct PosteriorState {
  Eigen::VectorXd eta;
  HyperParams q{0.5, 0.5};
  double sigma_o2 = 0.01;
};

double log_prior(const PosteriorState& s, const Priors& p);

// Builds the coordinate transform for a proposal's q: fresh decomposition
// of C(q), orientation against the reference, projection and thresholding.
// The last transform is memoized (per-chain instance; not thread-safe).
class TransformFactory {
 public:
  TransformFactory(Kernel kernel, KLBasis reference, double kappa);
  const CoordinateTransform& operator()(const HyperParams& q);
  const KLBasis& reference() const { return reference_; }
  double kappa() const { return kappa_; }

 private:
  Kernel kernel_;
  KLBasis reference_;
  double kappa_;
  std::optional<HyperParams> cached_q_;
  CoordinateTransform cached_;
};

// Gaussian likelihood of the data under the surrogate predictions at
// xi = Bhat(q) eta. Transform singularities reject the proposal (-inf).
double log_likelihood(const Eigen::VectorXd& d, const PosteriorState& s,
                      const PCSurrogate& surrogate, TransformFactory& tf);

// Haario-style adaptive Metropolis over (eta, log q, log sigma_o2).
struct AdaptConfig {
  int adapt_start = 2000;   // steps before covariance adaptation kicks in
  double eps = 1e-8;        // regularization added to the empirical cov
  double scale = 0.0;       // proposal scale; 0 -> 2.38^2 / dim
  double init_step = 0.1;   // pre-adaptation sd = init_step / sqrt(dim)
  bool sample_hyperparams = true;  // q pinned at init when false
  bool sample_noise = true;        // sigma_o2 pinned at init when false
  int cov_snapshot_every = 10000;
};

struct Chain {
  std::vector<PosteriorState> states;
  std::vector<double> log_post;
  std::vector<char> accepted;
  std::vector<int> snapshot_steps;
  std::vector<Eigen::MatrixXd> proposal_cov_snapshots;
  std::uint64_t seed = 0;

  double acceptance_rate(int from = 0) const;
};

using LogPost = std::function<double(const PosteriorState&)>;

Chain mcmc_sample(const LogPost& logpost, const PosteriorState& init,
                  int steps, const AdaptConfig& cfg, std::uint64_t seed);

// Chain dump: step, accepted, log_post, eta_1..eta_K, l, sigma_f2, sigma_o2.
void save_chain_csv(const Chain& chain, const std::string& path);

// --- posterior diagnostics -------------------------------------------------

struct Kde {
  Eigen::VectorXd grid;
  Eigen::VectorXd density;
  double bandwidth = 0.0;
};

// Gaussian-kernel KDE, Silverman bandwidth by default, on a 512-point grid
// spanning the sample range plus 3 bandwidths.
Kde kde(const std::vector<double>& samples, double bandwidth = 0.0,
        int grid_n = 512, int max_samples = 20000);

double kde_mode(const Kde& k);

// Trapezoid integral of p ln(p/q) on a shared grid; 0 ln 0 = 0, and p above
// tol where q is below tol is a support violation.
double kld(const Eigen::VectorXd& grid, const Eigen::VectorXd& p,
           const Eigen::VectorXd& q, double tol = 1e-12);

// Geyer initial-positive-sequence effective sample size.
double effective_sample_size(const std::vector<double>& series);

struct FieldStats {
  Grid1D grid;
  Eigen::VectorXd mean;
  Eigen::VectorXd median;
  Eigen::VectorXd map_profile;
  std::vector<double> quantile_levels;
  std::vector<Eigen::VectorXd> quantiles;
  Eigen::VectorXd pointwise_variance;
};

// Pointwise statistics of the posterior field, reconstructed through the
// eta-hat pathway in the reference basis; states are thinned to at most
// max_states.
FieldStats field_posterior_stats(const Chain& chain, int burn_in,
                                 TransformFactory& tf,
                                 const std::vector<double>& quantile_levels =
                                     {0.05, 0.95},
                                 int max_states = 2000);

}  // namespace klpc
