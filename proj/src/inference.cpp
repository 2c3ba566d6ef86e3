#include "klpc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "klpc/rng.hpp"

namespace klpc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log_prior(const PosteriorState& s, const Priors& p) {
  if (!(s.sigma_o2 > 0.0)) return kNegInf;
  double lp = -0.5 * s.eta.squaredNorm() -
              0.5 * s.eta.size() * std::log(2.0 * M_PI);
  lp += prior_log_density(p.l, s.q.l);
  lp += prior_log_density(p.sigma_f2, s.q.sigma_f2);
  lp += -std::log(s.sigma_o2);  // Jeffreys, improper
  return lp;
}

TransformFactory::TransformFactory(Kernel kernel, KLBasis reference,
                                   double kappa)
    : kernel_(std::move(kernel)),
      reference_(std::move(reference)),
      kappa_(kappa) {}

const CoordinateTransform& TransformFactory::operator()(const HyperParams& q) {
  if (cached_q_ && cached_q_->l == q.l && cached_q_->sigma_f2 == q.sigma_f2)
    return cached_;
  const int K = reference_.truncation();
  CovMatrix cov = assemble_cov_matrix(kernel_, reference_.grid, q);
  KLBasis basis = orient(decompose(cov, K), reference_);
  cached_ = thresholded(projection_coeffs(basis, reference_), kappa_);
  cached_.q = q;
  cached_q_ = q;
  return cached_;
}

double log_likelihood(const Eigen::VectorXd& d, const PosteriorState& s,
                      const PCSurrogate& surrogate, TransformFactory& tf) {
  if (!(s.sigma_o2 > 0.0)) return kNegInf;
  if (d.size() != surrogate.n_obs)
    throw ConfigError("log_likelihood: data/surrogate size mismatch");
  Eigen::VectorXd xi;
  try {
    const CoordinateTransform& t = tf(s.q);
    xi = xi_transform(s.eta, t);
  } catch (const NumericError&) {
    return kNegInf;  // singular transform rejects the proposal
  }
  const Eigen::VectorXd u = eval_surrogate(surrogate, xi);
  const double ssr = (d - u).squaredNorm();
  const double n = static_cast<double>(d.size());
  return -0.5 * n * std::log(2.0 * M_PI * s.sigma_o2) -
         ssr / (2.0 * s.sigma_o2);
}

// --- adaptive Metropolis -----------------------------------------------

namespace {

// theta layout: [eta; (ln l, ln sigma_f2 when sampled); (ln sigma_o2 when
// sampled)]. Positive parameters walk in log space; the Jacobian of that
// reparametrization is added to the Metropolis target.
struct ThetaMap {
  int K = 0;
  bool hyper = true;
  bool noise = true;

  int dim() const { return K + (hyper ? 2 : 0) + (noise ? 1 : 0); }

  Eigen::VectorXd to_theta(const PosteriorState& s) const {
    Eigen::VectorXd theta(dim());
    theta.head(K) = s.eta;
    int at = K;
    if (hyper) {
      theta(at++) = std::log(s.q.l);
      theta(at++) = std::log(s.q.sigma_f2);
    }
    if (noise) theta(at++) = std::log(s.sigma_o2);
    return theta;
  }

  PosteriorState to_state(const Eigen::VectorXd& theta,
                          const PosteriorState& pinned) const {
    PosteriorState s = pinned;
    s.eta = theta.head(K);
    int at = K;
    if (hyper) {
      s.q.l = std::exp(theta(at++));
      s.q.sigma_f2 = std::exp(theta(at++));
    }
    if (noise) s.sigma_o2 = std::exp(theta(at++));
    return s;
  }

  double log_jacobian(const Eigen::VectorXd& theta) const {
    double j = 0.0;
    int at = K;
    if (hyper) {
      j += theta(at++);
      j += theta(at++);
    }
    if (noise) j += theta(at++);
    return j;
  }
};

}  // namespace

double Chain::acceptance_rate(int from) const {
  if (from >= static_cast<int>(accepted.size())) return 0.0;
  double acc = 0.0;
  for (std::size_t i = from; i < accepted.size(); ++i) acc += accepted[i];
  return acc / static_cast<double>(accepted.size() - from);
}

Chain mcmc_sample(const LogPost& logpost, const PosteriorState& init,
                  int steps, const AdaptConfig& cfg, std::uint64_t seed) {
  ThetaMap map;
  map.K = static_cast<int>(init.eta.size());
  map.hyper = cfg.sample_hyperparams;
  map.noise = cfg.sample_noise;
  const int dim = map.dim();
  if (dim < 1) throw ConfigError("mcmc_sample: nothing to sample");
  if (map.hyper && (!(init.q.l > 0.0) || !(init.q.sigma_f2 > 0.0)))
    throw ConfigError("mcmc_sample: hyper-parameters must start positive");
  if (map.noise && !(init.sigma_o2 > 0.0))
    throw ConfigError("mcmc_sample: sigma_o2 must start positive");

  double lp = logpost(init);
  if (!std::isfinite(lp))
    throw ConfigError("mcmc_sample: initial log-posterior is not finite");

  Eigen::VectorXd theta = map.to_theta(init);
  double target = lp + map.log_jacobian(theta);

  const double scale = cfg.scale > 0.0 ? cfg.scale : 2.38 * 2.38 / dim;
  const double init_sd = cfg.init_step / std::sqrt(static_cast<double>(dim));

  // Streaming mean / scatter of the theta history for Haario adaptation.
  Eigen::VectorXd running_mean = theta;
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dim, dim);
  long n_hist = 1;

  Chain chain;
  chain.seed = seed;
  chain.states.reserve(steps);
  chain.log_post.reserve(steps);
  chain.accepted.reserve(steps);

  Rng rng(seed);
  Eigen::MatrixXd chol_l = Eigen::MatrixXd::Identity(dim, dim) * init_sd;
  Eigen::VectorXd z(dim), proposal(dim);

  for (int step = 0; step < steps; ++step) {
    if (step >= cfg.adapt_start && n_hist > 1) {
      Eigen::MatrixXd cov = scatter / static_cast<double>(n_hist - 1);
      cov *= scale;
      cov.diagonal().array() += cfg.eps;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() == Eigen::Success) chol_l = llt.matrixL();
    }
    if (cfg.cov_snapshot_every > 0 && step % cfg.cov_snapshot_every == 0) {
      chain.snapshot_steps.push_back(step);
      chain.proposal_cov_snapshots.push_back(chol_l * chol_l.transpose());
    }

    for (int i = 0; i < dim; ++i) z(i) = rng.normal();
    proposal = theta + chol_l * z;

    const PosteriorState cand = map.to_state(proposal, init);
    const double cand_lp = logpost(cand);
    const double cand_target =
        std::isfinite(cand_lp) ? cand_lp + map.log_jacobian(proposal)
                               : kNegInf;

    const double u = rng.uniform();
    const bool accept = std::log(std::max(u, 1e-300)) < cand_target - target;
    if (accept) {
      theta = proposal;
      target = cand_target;
      lp = cand_lp;
    }
    chain.states.push_back(map.to_state(theta, init));
    chain.log_post.push_back(lp);
    chain.accepted.push_back(accept ? 1 : 0);

    ++n_hist;
    const Eigen::VectorXd delta = theta - running_mean;
    running_mean += delta / static_cast<double>(n_hist);
    scatter += delta * (theta - running_mean).transpose();
  }
  return chain;
}

void save_chain_csv(const Chain& chain, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_chain_csv: cannot write " + path);
  const int K =
      chain.states.empty() ? 0 : static_cast<int>(chain.states[0].eta.size());
  out << "step,accepted,log_post";
  for (int k = 1; k <= K; ++k) out << ",eta_" << k;
  out << ",l,sigma_f2,sigma_o2\n";
  out.precision(12);
  for (std::size_t i = 0; i < chain.states.size(); ++i) {
    const PosteriorState& s = chain.states[i];
    out << i << ',' << static_cast<int>(chain.accepted[i]) << ','
        << chain.log_post[i];
    for (int k = 0; k < K; ++k) out << ',' << s.eta(k);
    out << ',' << s.q.l << ',' << s.q.sigma_f2 << ',' << s.sigma_o2 << '\n';
  }
}

// --- KDE / KLD ----------------------------------------------------------

Kde kde(const std::vector<double>& samples, double bandwidth, int grid_n,
        int max_samples) {
  if (samples.size() < 2) throw ConfigError("kde: need at least 2 samples");
  std::vector<double> x = samples;
  if (max_samples > 0 && static_cast<int>(x.size()) > max_samples) {
    std::vector<double> thinned;
    const double stride =
        static_cast<double>(x.size()) / static_cast<double>(max_samples);
    thinned.reserve(max_samples);
    for (int i = 0; i < max_samples; ++i)
      thinned.push_back(x[static_cast<std::size_t>(i * stride)]);
    x = std::move(thinned);
  }
  const int n = static_cast<int>(x.size());

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= (n - 1);
  const double sd = std::sqrt(var);

  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = sorted[static_cast<std::size_t>(0.75 * (n - 1))] -
                     sorted[static_cast<std::size_t>(0.25 * (n - 1))];

  const double scale = std::max(std::abs(mean), sorted.back() - sorted.front());
  if (sd <= 1e-13 * std::max(scale, 1.0))
    throw NumericError("kde: degenerate (constant) sample, zero bandwidth");
  double h = bandwidth;
  if (h <= 0.0) {
    double spread = sd;
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  }
  if (!(h > 0.0))
    throw NumericError("kde: degenerate (constant) sample, zero bandwidth");

  Kde out;
  out.bandwidth = h;
  const double lo = sorted.front() - 3.0 * h;
  const double hi = sorted.back() + 3.0 * h;
  out.grid.resize(grid_n);
  out.density.resize(grid_n);
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * M_PI));
  for (int g = 0; g < grid_n; ++g) {
    const double t = lo + (hi - lo) * g / (grid_n - 1);
    out.grid(g) = t;
    double acc = 0.0;
    for (double v : x) {
      const double u = (t - v) / h;
      acc += std::exp(-0.5 * u * u);
    }
    out.density(g) = norm * acc;
  }
  return out;
}

double kde_mode(const Kde& k) {
  int arg = 0;
  for (int i = 1; i < k.density.size(); ++i)
    if (k.density(i) > k.density(arg)) arg = i;
  return k.grid(arg);
}

double kld(const Eigen::VectorXd& grid, const Eigen::VectorXd& p,
           const Eigen::VectorXd& q, double tol) {
  const int n = static_cast<int>(grid.size());
  if (p.size() != n || q.size() != n)
    throw ConfigError("kld: densities and grid differ in size");
  Eigen::VectorXd integrand(n);
  for (int i = 0; i < n; ++i) {
    if (p(i) <= tol) {
      integrand(i) = 0.0;  // 0 ln 0
      continue;
    }
    if (q(i) <= tol)
      throw NumericError("kld: support violation, p > 0 where q vanishes");
    integrand(i) = p(i) * std::log(p(i) / q(i));
  }
  double total = 0.0;
  for (int i = 0; i + 1 < n; ++i)
    total += 0.5 * (grid(i + 1) - grid(i)) * (integrand(i) + integrand(i + 1));
  return total;
}

double effective_sample_size(const std::vector<double>& series) {
  const int n = static_cast<int>(series.size());
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  auto gamma = [&](int lag) {
    double acc = 0.0;
    for (int i = 0; i + lag < n; ++i)
      acc += (series[i] - mean) * (series[i + lag] - mean);
    return acc / n;
  };
  const double g0 = gamma(0);
  if (!(g0 > 0.0)) return static_cast<double>(n);
  double tail = 0.0;
  for (int lag = 1; lag + 1 < n; lag += 2) {
    const double pair = gamma(lag) + gamma(lag + 1);
    if (pair <= 0.0) break;
    tail += pair;
  }
  const double ess = n / (1.0 + 2.0 * tail / g0);
  return std::max(1.0, std::min(ess, static_cast<double>(n)));
}

FieldStats field_posterior_stats(const Chain& chain, int burn_in,
                                 TransformFactory& tf,
                                 const std::vector<double>& quantile_levels,
                                 int max_states) {
  const int total = static_cast<int>(chain.states.size());
  if (burn_in < 0 || burn_in >= total)
    throw ConfigError("field_posterior_stats: empty post-burn-in chain");
  const int kept = total - burn_in;
  const int n_use = max_states > 0 ? std::min(kept, max_states) : kept;
  const double stride = static_cast<double>(kept) / n_use;

  const KLBasis& reference = tf.reference();
  const int n = reference.grid.size();
  Eigen::MatrixXd fields(n_use, n);

  int best = burn_in;
  for (int i = burn_in; i < total; ++i)
    if (chain.log_post[i] > chain.log_post[best]) best = i;

  for (int j = 0; j < n_use; ++j) {
    const int idx = burn_in + static_cast<int>(j * stride);
    const PosteriorState& s = chain.states[idx];
    const Eigen::VectorXd eta_hat = tf(s.q).B * s.eta;
    fields.row(j) = reconstruct_in_reference(eta_hat, reference).values;
  }

  FieldStats stats;
  stats.grid = reference.grid;
  stats.quantile_levels = quantile_levels;
  stats.mean = fields.colwise().mean();
  stats.median.resize(n);
  stats.pointwise_variance.resize(n);
  stats.quantiles.assign(quantile_levels.size(), Eigen::VectorXd(n));

  std::vector<double> column(n_use);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n_use; ++j) column[j] = fields(j, i);
    std::sort(column.begin(), column.end());
    auto quantile = [&](double level) {
      const double pos = level * (n_use - 1);
      const int lo = static_cast<int>(pos);
      const int hi = std::min(lo + 1, n_use - 1);
      const double w = pos - lo;
      return (1.0 - w) * column[lo] + w * column[hi];
    };
    stats.median(i) = quantile(0.5);
    for (std::size_t ql = 0; ql < quantile_levels.size(); ++ql)
      stats.quantiles[ql](i) = quantile(quantile_levels[ql]);
    double var = 0.0;
    for (int j = 0; j < n_use; ++j)
      var += (fields(j, i) - stats.mean(i)) * (fields(j, i) - stats.mean(i));
    stats.pointwise_variance(i) = n_use > 1 ? var / (n_use - 1) : 0.0;
  }

  const PosteriorState& map_state = chain.states[best];
  stats.map_profile =
      reconstruct_in_reference(tf(map_state.q).B * map_state.eta, reference)
          .values;
  return stats;
}

}  // namespace klpc
