#include "klpc/errors.hpp"

#include <cmath>
#include <fstream>

#include "klpc/parallel.hpp"
#include "klpc/rng.hpp"

namespace klpc {

void write_error_curve_csv(const std::vector<ErrorCurve>& curves,
                           const std::string& abscissa_name,
                           const std::string& value_name,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_error_curve_csv: cannot write " + path);
  out << abscissa_name << ",reference," << value_name << ",se,n_mc,seed\n";
  out.precision(12);
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.abscissa.size(); ++i)
      out << c.abscissa[i] << ',' << c.reference_label << ',' << c.values[i]
          << ',' << c.ses[i] << ',' << c.n_mc << ',' << c.seed << '\n';
}

namespace {

// Like project(), but zero-eigenvalue modes contribute zero coordinates
// instead of raising: a full-spectrum decomposition of a near-singular SE
// matrix clamps its smallest eigenvalues to exactly zero, and those modes
// carry no mass in the draws either.
Eigen::VectorXd project_skipping_null(const FieldSample& field,
                                      const KLBasis& basis) {
  const int K = basis.truncation();
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(K);
  for (int k = 0; k < K; ++k) {
    if (basis.eigvals(k) > 0.0)
      eta(k) = basis.grid.inner(field.values, basis.modes.col(k)) /
               std::sqrt(basis.eigvals(k));
  }
  return eta;
}

// value = sqrt(mean of squared errors) / denom, with the delta-method se.
ErrorEstimate from_squared_samples(const std::vector<double>& sq, double denom) {
  const int n = static_cast<int>(sq.size());
  double mean = 0.0;
  for (double v : sq) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : sq) var += (v - mean) * (v - mean);
  var = n > 1 ? var / (n - 1) : 0.0;
  const double se_mean = std::sqrt(var / n);
  ErrorEstimate e;
  e.n_mc = n;
  e.value = std::sqrt(std::max(mean, 0.0)) / denom;
  e.se = mean > 0.0 ? se_mean / (2.0 * std::sqrt(mean)) / denom : 0.0;
  return e;
}

}  // namespace

ErrorEstimate eps_M(const Kernel& kernel, const HyperParams& q, int K,
                    const KLBasis& reference, int n_mc, std::uint64_t seed) {
  const Grid1D& grid = reference.grid;
  const int n = grid.size();
  if (K < 0 || K > n) throw ConfigError("eps_M: K exceeds the grid size");
  if (K > 0 && reference.truncation() < K)
    throw ConfigError("eps_M: reference does not carry K modes");

  const KLBasis full = decompose(assemble_cov_matrix(kernel, grid, q), n);
  KLBasis sub;
  Eigen::MatrixXd b;
  if (K > 0) {
    sub.grid = grid;
    sub.eigvals = full.eigvals.head(K);
    sub.modes = full.modes.leftCols(K);
    sub.full_trace = full.full_trace;
    sub = orient(std::move(sub), reference);
    KLBasis ref_k{grid, reference.eigvals.head(K), reference.modes.leftCols(K),
                  reference.full_trace};
    b = projection_coeffs(sub, ref_k).B;
  }

  const Eigen::VectorXd sqrt_lambda = full.eigvals.cwiseSqrt();
  Rng rng(seed);
  std::vector<double> sq(n_mc);
  Eigen::VectorXd z(n);
  for (int s = 0; s < n_mc; ++s) {
    for (int i = 0; i < n; ++i) z(i) = rng.normal();
    const FieldSample m{grid, full.modes * sqrt_lambda.cwiseProduct(z)};
    Eigen::VectorXd residual = m.values;
    if (K > 0) {
      const Eigen::VectorXd eta = project_skipping_null(m, sub);
      residual -= reference.modes.leftCols(K) * (b * eta);
    }
    sq[s] = grid.inner(residual, residual);
  }
  return from_squared_samples(sq, std::sqrt(q.sigma_f2));
}

std::vector<ErrorEstimate> E_M(const Kernel& kernel, const HyperPrior& prior,
                               const std::vector<int>& Ks,
                               const KLBasis& reference, int n_mc,
                               std::uint64_t seed, int threads) {
  if (Ks.empty()) throw ConfigError("E_M: no truncations requested");
  int k_max = 0;
  for (int k : Ks) k_max = std::max(k_max, k);
  const Grid1D& grid = reference.grid;
  const int n = grid.size();
  if (k_max > n) throw ConfigError("E_M: K exceeds the grid size");
  if (reference.truncation() < k_max)
    throw ConfigError("E_M: reference does not carry max(Ks) modes");

  // sq[s][j]: squared relative error of sample s at truncation Ks[j].
  std::vector<std::vector<double>> sq(n_mc);
  parallel_for(n_mc, threads, [&](std::size_t s) {
    Rng rng(Rng::derive(seed, s));
    const HyperParams q = prior.sample(rng);
    const KLBasis full = decompose(assemble_cov_matrix(kernel, grid, q), n);

    KLBasis sub{grid, full.eigvals.head(k_max), full.modes.leftCols(k_max),
                full.full_trace};
    KLBasis ref_k{grid, reference.eigvals.head(k_max),
                  reference.modes.leftCols(k_max), reference.full_trace};
    sub = orient(std::move(sub), ref_k);
    const Eigen::MatrixXd b = projection_coeffs(sub, ref_k).B;

    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = rng.normal();
    const FieldSample m{grid,
                        full.modes * full.eigvals.cwiseSqrt().cwiseProduct(z)};
    const Eigen::VectorXd eta = project_skipping_null(m, sub);

    sq[s].resize(Ks.size());
    for (std::size_t j = 0; j < Ks.size(); ++j) {
      const int k = Ks[j];
      Eigen::VectorXd residual = m.values;
      if (k > 0)
        residual -= reference.modes.leftCols(k) *
                    (b.topLeftCorner(k, k) * eta.head(k));
      sq[s][j] = grid.inner(residual, residual) / q.sigma_f2;
    }
  });

  std::vector<ErrorEstimate> estimates(Ks.size());
  std::vector<double> column(n_mc);
  for (std::size_t j = 0; j < Ks.size(); ++j) {
    for (int s = 0; s < n_mc; ++s) column[s] = sq[s][j];
    estimates[j] = from_squared_samples(column, 1.0);
  }
  return estimates;
}

namespace {

// Space-time L2 norm^2: trapezoid in time over the stored levels, P1
// consistent-mass quadrature in space.
class SpaceTimeNorm {
 public:
  SpaceTimeNorm(int n_elems, std::vector<double> times)
      : n_elems_(n_elems), times_(std::move(times)) {
    weights_.assign(times_.size(), 0.0);
    for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
      const double h = times_[i + 1] - times_[i];
      weights_[i] += 0.5 * h;
      weights_[i + 1] += 0.5 * h;
    }
  }

  double operator()(const Eigen::VectorXd& stacked) const {
    const int nn = n_elems_ + 1;
    const double h = 1.0 / n_elems_;
    double total = 0.0;
    for (std::size_t t = 0; t < times_.size(); ++t) {
      const auto v = stacked.segment(static_cast<long>(t) * nn, nn);
      double space = 0.0;
      for (int e = 0; e < n_elems_; ++e) {
        const double a = v(e), b = v(e + 1);
        space += h / 6.0 * (2.0 * a * a + 2.0 * b * b + 2.0 * a * b);
      }
      total += weights_[t] * space;
    }
    return total;
  }

 private:
  int n_elems_;
  std::vector<double> times_;
  std::vector<double> weights_;
};

}  // namespace

std::vector<ErrorEstimate> surrogate_solution_error(
    const SurrogateErrorSetup& setup,
    const std::vector<const PCSurrogate*>& surrogates,
    const HyperPrior& prior, const std::optional<HyperParams>& fixed_q,
    int n_mc, std::uint64_t seed) {
  if (surrogates.empty())
    throw ConfigError("surrogate_solution_error: no surrogates");
  const Grid1D& grid = setup.reference.grid;
  const int n = grid.size();
  const int K = setup.reference.truncation();
  const int nn = setup.solver.n_elems + 1;
  for (const PCSurrogate* s : surrogates) {
    if (s->field_nodes != nn || s->field_times.empty())
      throw ConfigError(
          "surrogate_solution_error: surrogate lacks a matching field block");
    if (s->indices.dim != K)
      throw ConfigError(
          "surrogate_solution_error: surrogate dimension mismatch");
  }
  const std::vector<double>& times = surrogates.front()->field_times;
  for (const PCSurrogate* s : surrogates)
    if (s->field_times != times)
      throw ConfigError(
          "surrogate_solution_error: surrogates disagree on stored levels");

  SpaceTimeNorm norm2(setup.solver.n_elems, times);
  const std::size_t n_sur = surrogates.size();

  std::vector<double> den(n_mc);
  std::vector<std::vector<double>> num(n_mc,
                                       std::vector<double>(n_sur, 0.0));
  parallel_for(n_mc, setup.threads, [&](std::size_t s) {
    Rng rng(Rng::derive(seed, s));
    const HyperParams q = fixed_q ? *fixed_q : prior.sample(rng);
    const KLBasis full =
        decompose(assemble_cov_matrix(setup.kernel, grid, q), n);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = rng.normal();
    const FieldSample m{grid,
                        full.modes * full.eigvals.cwiseSqrt().cwiseProduct(z)};

    // Direct solve of the exact field, restricted to the stored levels.
    const Solution sol = solve(m, setup.solver);
    Eigen::VectorXd direct(static_cast<long>(times.size()) * nn);
    for (std::size_t t = 0; t < times.size(); ++t) {
      const long level = std::lround(times[t] / sol.dt);
      direct.segment(static_cast<long>(t) * nn, nn) = sol.nodal.col(level);
    }
    den[s] = norm2(direct);

    KLBasis sub{grid, full.eigvals.head(K), full.modes.leftCols(K),
                full.full_trace};
    sub = orient(std::move(sub), setup.reference);
    const CoordinateTransform transform = thresholded(
        projection_coeffs(sub, setup.reference), setup.kappa);
    const Eigen::VectorXd xi =
        xi_transform(project_skipping_null(m, sub), transform);

    for (std::size_t j = 0; j < n_sur; ++j) {
      const Eigen::VectorXd all = eval_surrogate_all(*surrogates[j], xi);
      const Eigen::VectorXd field =
          all.tail(static_cast<long>(times.size()) * nn);
      num[s][j] = norm2(direct - field);
    }
  });

  // Ratio estimator R = sum(num) / sum(den), error = sqrt(R); the se comes
  // from the influence values of the ratio.
  double den_sum = 0.0;
  for (double d : den) den_sum += d;
  const double den_mean = den_sum / n_mc;

  std::vector<ErrorEstimate> out(n_sur);
  for (std::size_t j = 0; j < n_sur; ++j) {
    double num_sum = 0.0;
    for (int s = 0; s < n_mc; ++s) num_sum += num[s][j];
    const double ratio = num_sum / den_sum;
    // Influence values of the ratio; their sample mean is zero exactly.
    double var_g = 0.0;
    for (int s = 0; s < n_mc; ++s) {
      const double g = (num[s][j] - ratio * den[s]) / den_mean;
      var_g += g * g;
    }
    var_g = n_mc > 1 ? var_g / (n_mc - 1) : 0.0;
    const double se_ratio = std::sqrt(var_g / n_mc);
    out[j].n_mc = n_mc;
    out[j].value = std::sqrt(std::max(ratio, 0.0));
    out[j].se = ratio > 0.0 ? se_ratio / (2.0 * std::sqrt(ratio)) : 0.0;
  }
  return out;
}

ErrorEstimate eps_U(const SurrogateErrorSetup& setup, const PCSurrogate& s,
                    const HyperParams& q, int n_mc, std::uint64_t seed) {
  return surrogate_solution_error(setup, {&s}, HyperPrior{}, q, n_mc,
                                  seed)[0];
}

ErrorEstimate E_U(const SurrogateErrorSetup& setup, const PCSurrogate& s,
                  const HyperPrior& prior, int n_mc, std::uint64_t seed) {
  return surrogate_solution_error(setup, {&s}, prior, std::nullopt, n_mc,
                                  seed)[0];
}

}  // namespace klpc
