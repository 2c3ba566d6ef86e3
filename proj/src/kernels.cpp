#include "klpc/kernels.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace klpc {

Grid1D::Grid1D(std::vector<double> boundaries)
    : boundaries_(std::move(boundaries)) {
  if (boundaries_.size() < 2)
    throw ConfigError("Grid1D: need at least one cell");
  for (std::size_t i = 0; i + 1 < boundaries_.size(); ++i)
    if (!(boundaries_[i] < boundaries_[i + 1]))
      throw ConfigError("Grid1D: boundaries must be strictly increasing");
}

Grid1D Grid1D::uniform(int n_cells) {
  if (n_cells < 1) throw ConfigError("Grid1D: need at least one cell");
  std::vector<double> b(n_cells + 1);
  for (int i = 0; i <= n_cells; ++i)
    b[i] = static_cast<double>(i) / n_cells;
  return Grid1D(std::move(b));
}

Eigen::VectorXd Grid1D::midpoints() const {
  Eigen::VectorXd m(size());
  for (int i = 0; i < size(); ++i) m(i) = midpoint(i);
  return m;
}

Eigen::VectorXd Grid1D::measures() const {
  Eigen::VectorXd w(size());
  for (int i = 0; i < size(); ++i) w(i) = measure(i);
  return w;
}

double Grid1D::inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  if (u.size() != size() || v.size() != size())
    throw ConfigError("Grid1D::inner: dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < size(); ++i) s += u(i) * v(i) * measure(i);
  return s;
}

int Grid1D::locate(double x) const {
  const auto& b = boundaries_;
  if (x <= b.front()) return 0;
  if (x >= b.back()) return size() - 1;
  const auto it = std::upper_bound(b.begin(), b.end(), x);
  return static_cast<int>(it - b.begin()) - 1;
}

// --- priors ------------------------------------------------------------

namespace {

double check_discrete(const DiscreteDist& d) {
  if (d.values.empty() || d.values.size() != d.weights.size())
    throw ConfigError("discrete prior: values/weights mismatch");
  double total = 0.0;
  for (double w : d.weights) {
    if (w < 0.0) throw ConfigError("discrete prior: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("discrete prior: zero total weight");
  return total;
}

// Marsaglia-Tsang; deterministic given the stream.
double sample_gamma(double alpha, Rng& rng) {
  if (alpha < 1.0) {
    const double u = std::max(rng.uniform(), 1e-300);
    return sample_gamma(alpha + 1.0, rng) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(std::max(u, 1e-300)) <
        0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

}  // namespace

double prior_mean(const ScalarPrior& p) {
  return std::visit(
      [](const auto& dist) -> double {
        using T = std::decay_t<decltype(dist)>;
        if constexpr (std::is_same_v<T, UniformDist>) {
          return 0.5 * (dist.lo + dist.hi);
        } else if constexpr (std::is_same_v<T, PointMassDist>) {
          return dist.value;
        } else if constexpr (std::is_same_v<T, InvGammaDist>) {
          if (!(dist.alpha > 1.0))
            throw ConfigError(
                "inverse-gamma prior with alpha <= 1 has no mean");
          return dist.beta / (dist.alpha - 1.0);
        } else {
          const double total = check_discrete(dist);
          double s = 0.0;
          for (std::size_t i = 0; i < dist.values.size(); ++i)
            s += dist.values[i] * dist.weights[i];
          return s / total;
        }
      },
      p);
}

double prior_log_density(const ScalarPrior& p, double x) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  return std::visit(
      [x, kNegInf](const auto& dist) -> double {
        using T = std::decay_t<decltype(dist)>;
        if constexpr (std::is_same_v<T, UniformDist>) {
          if (x < dist.lo || x > dist.hi) return kNegInf;
          return -std::log(dist.hi - dist.lo);
        } else if constexpr (std::is_same_v<T, PointMassDist>) {
          return x == dist.value ? 0.0 : kNegInf;
        } else if constexpr (std::is_same_v<T, InvGammaDist>) {
          if (!(x > 0.0)) return kNegInf;
          return dist.alpha * std::log(dist.beta) - std::lgamma(dist.alpha) -
                 (dist.alpha + 1.0) * std::log(x) - dist.beta / x;
        } else {
          for (std::size_t i = 0; i < dist.values.size(); ++i)
            if (dist.values[i] == x) return 0.0;  // atoms: density is formal
          return kNegInf;
        }
      },
      p);
}

double prior_sample(const ScalarPrior& p, Rng& rng) {
  return std::visit(
      [&rng](const auto& dist) -> double {
        using T = std::decay_t<decltype(dist)>;
        if constexpr (std::is_same_v<T, UniformDist>) {
          return rng.uniform(dist.lo, dist.hi);
        } else if constexpr (std::is_same_v<T, PointMassDist>) {
          return dist.value;
        } else if constexpr (std::is_same_v<T, InvGammaDist>) {
          return dist.beta / sample_gamma(dist.alpha, rng);
        } else {
          const double total = check_discrete(dist);
          double u = rng.uniform() * total;
          for (std::size_t i = 0; i < dist.values.size(); ++i) {
            u -= dist.weights[i];
            if (u <= 0.0) return dist.values[i];
          }
          return dist.values.back();
        }
      },
      p);
}

// --- kernel evaluation ---------------------------------------------------

namespace {

double se_term(double x, double xp, double l) {
  const double d = x - xp;
  return std::exp(-d * d / (2.0 * l * l));
}

void validate_composite(const CompositeKernel& k) {
  if (k.sigma_d2 < 0.0 || k.sigma_b2 < 0.0 || k.sigma_n2 < 0.0)
    throw ConfigError("composite kernel: coefficients must be >= 0");
}

// Bilinear interpolation over cell midpoints, clamped outside; index
// weights are symmetric in (x, xp) so the interpolant stays symmetric.
double tabulated_eval(const TabulatedKernel& k, double x, double xp) {
  const Grid1D& g = k.grid;
  const int n = g.size();
  auto bracket = [&](double y, int& i0, double& t) {
    if (y <= g.midpoint(0)) {
      i0 = 0;
      t = 0.0;
      return;
    }
    if (y >= g.midpoint(n - 1)) {
      i0 = n - 2 >= 0 ? n - 2 : 0;
      t = n >= 2 ? 1.0 : 0.0;
      return;
    }
    int i = g.locate(y);
    if (y < g.midpoint(i)) --i;
    i0 = i;
    t = (y - g.midpoint(i)) / (g.midpoint(i + 1) - g.midpoint(i));
  };
  int i0, j0;
  double tx, ty;
  bracket(x, i0, tx);
  bracket(xp, j0, ty);
  if (n == 1) return k.values(0, 0);
  const auto& v = k.values;
  return (1 - tx) * (1 - ty) * v(i0, j0) + tx * (1 - ty) * v(i0 + 1, j0) +
         (1 - tx) * ty * v(i0, j0 + 1) + tx * ty * v(i0 + 1, j0 + 1);
}

}  // namespace

double eval_kernel(const Kernel& kernel, double x, double xp,
                   const HyperParams& q) {
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SquaredExponentialKernel>) {
          validate(q);
          return q.sigma_f2 * se_term(x, xp, q.l);
        } else if constexpr (std::is_same_v<T, CompositeKernel>) {
          validate(q);
          validate_composite(k);
          // (x * xp) grouped so the value is symmetric bit-for-bit
          double c = q.sigma_f2 * se_term(x, xp, q.l) +
                     k.sigma_d2 * (x * xp) + k.sigma_b2;
          if (x == xp) c += k.sigma_n2;
          return c;
        } else {
          return tabulated_eval(k, x, xp);
        }
      },
      kernel);
}

CovMatrix assemble_cov_matrix(const Kernel& kernel, const Grid1D& grid,
                              const HyperParams& q) {
  const int n = grid.size();
  CovMatrix cov{grid, Eigen::MatrixXd(n, n)};

  if (const auto* tab = std::get_if<TabulatedKernel>(&kernel)) {
    if (tab->grid == grid) {
      cov.values = tab->values;  // midpoints coincide with the table
      return cov;
    }
  }
  // Nugget attaches to coinciding cell indices, not interpolated positions.
  double nugget = 0.0;
  if (const auto* comp = std::get_if<CompositeKernel>(&kernel))
    nugget = comp->sigma_n2;

  for (int i = 0; i < n; ++i) {
    const double xi = grid.midpoint(i);
    for (int j = 0; j <= i; ++j) {
      double v = eval_kernel(kernel, xi, grid.midpoint(j), q);
      if (i == j && nugget > 0.0) v = eval_kernel(kernel, xi, xi, q);
      cov.values(i, j) = v;
      cov.values(j, i) = v;
    }
  }
  return cov;
}

Kernel average_kernel(const Kernel& kernel, const HyperPrior& prior,
                      const Grid1D& grid, const AveragingQuadrature& quad) {
  if (std::holds_alternative<TabulatedKernel>(kernel))
    throw ConfigError("average_kernel: kernel is already tabulated");

  // Nodes and normalized weights for the l average.
  std::vector<double> l_nodes, l_weights;
  if (const auto* u = std::get_if<UniformDist>(&prior.l)) {
    if (quad.l_nodes < 1)
      throw ConfigError("average_kernel: empty quadrature for uniform l");
    if (!(u->lo > 0.0))
      throw ConfigError("average_kernel: l support must be positive");
    QuadratureRule rule = gauss_legendre(quad.l_nodes, u->lo, u->hi);
    const double len = u->hi - u->lo;
    l_nodes = rule.nodes;
    for (double w : rule.weights) l_weights.push_back(w / len);
  } else if (const auto* pm = std::get_if<PointMassDist>(&prior.l)) {
    if (!(pm->value > 0.0))
      throw ConfigError("average_kernel: l must be positive");
    l_nodes = {pm->value};
    l_weights = {1.0};
  } else if (const auto* d = std::get_if<DiscreteDist>(&prior.l)) {
    const double total = check_discrete(*d);
    l_nodes = d->values;
    for (double w : d->weights) l_weights.push_back(w / total);
  } else {
    throw ConfigError("average_kernel: unsupported prior family for l");
  }

  const double sf2_mean = prior_mean(prior.sigma_f2);  // throws if no mean

  const int n = grid.size();
  TabulatedKernel tab{grid, Eigen::MatrixXd::Zero(n, n)};
  const CompositeKernel* comp = std::get_if<CompositeKernel>(&kernel);
  if (comp) validate_composite(*comp);

  for (int i = 0; i < n; ++i) {
    const double xi = grid.midpoint(i);
    for (int j = 0; j <= i; ++j) {
      const double xj = grid.midpoint(j);
      double se_avg = 0.0;
      for (std::size_t a = 0; a < l_nodes.size(); ++a)
        se_avg += l_weights[a] * se_term(xi, xj, l_nodes[a]);
      double v = sf2_mean * se_avg;
      if (comp) {
        v += comp->sigma_d2 * xi * xj + comp->sigma_b2;
        if (i == j) v += comp->sigma_n2;
      }
      tab.values(i, j) = v;
      tab.values(j, i) = v;
    }
  }
  return tab;
}

}  // namespace klpc
