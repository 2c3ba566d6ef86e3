#include "klpc/pce.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "klpc/parallel.hpp"
#include "klpc/quadrature.hpp"
#include "klpc/rng.hpp"

namespace klpc {

std::uint64_t multi_index_count(int dim, int order) {
  if (dim < 1 || order < 0)
    throw ConfigError("multi_index_count: need dim >= 1 and order >= 0");
  // (dim + order)! / (dim! order!) with overflow checks
  std::uint64_t result = 1;
  for (int i = 1; i <= order; ++i) {
    const std::uint64_t num = static_cast<std::uint64_t>(dim) + i;
    if (result > UINT64_MAX / num)
      throw ConfigError("multi_index_count: term count overflows");
    result = result * num / i;  // divisible at every step
  }
  return result;
}

MultiIndexSet enumerate_multi_indices(int dim, int order) {
  const std::uint64_t count = multi_index_count(dim, order);
  if (count > (1ULL << 26))
    throw ConfigError("enumerate_multi_indices: index set too large to hold");
  MultiIndexSet set;
  set.dim = dim;
  set.order = order;
  set.indices.reserve(count);
  for (int degree = 0; degree <= order; ++degree) {
    std::vector<int> alpha(dim, 0);
    alpha[0] = degree;
    for (;;) {
      set.indices.push_back(alpha);
      if (alpha[dim - 1] == degree) break;
      int j = dim - 2;
      while (alpha[j] == 0) --j;
      const int tail = alpha[dim - 1];
      alpha[dim - 1] = 0;
      --alpha[j];
      alpha[j + 1] = tail + 1;
    }
  }
  return set;
}

namespace {

// Normalized probabilists' Hermite values psi_0..psi_max at x, by the
// stable recurrence psi_{n+1} = (x psi_n - sqrt(n) psi_{n-1}) / sqrt(n+1).
void hermite_column(double x, int max_order, double* out) {
  out[0] = 1.0;
  if (max_order >= 1) out[1] = x;
  for (int n = 1; n < max_order; ++n)
    out[n + 1] =
        (x * out[n] - std::sqrt(static_cast<double>(n)) * out[n - 1]) /
        std::sqrt(static_cast<double>(n + 1));
}

}  // namespace

double hermite_eval(const std::vector<int>& alpha, const Eigen::VectorXd& xi) {
  if (static_cast<int>(alpha.size()) != xi.size())
    throw ConfigError("hermite_eval: dimension mismatch");
  double prod = 1.0;
  std::vector<double> column;
  for (std::size_t d = 0; d < alpha.size(); ++d) {
    column.assign(alpha[d] + 1, 0.0);
    hermite_column(xi(static_cast<int>(d)), alpha[d], column.data());
    prod *= column[alpha[d]];
  }
  return prod;
}

Eigen::VectorXd hermite_basis_row(const MultiIndexSet& set,
                                  const Eigen::VectorXd& xi) {
  if (xi.size() != set.dim)
    throw ConfigError("hermite_basis_row: dimension mismatch");
  Eigen::MatrixXd table(set.order + 1, set.dim);
  for (int d = 0; d < set.dim; ++d)
    hermite_column(xi(d), set.order, table.col(d).data());
  Eigen::VectorXd row(set.size());
  for (std::size_t a = 0; a < set.size(); ++a) {
    double prod = 1.0;
    const auto& alpha = set.indices[a];
    for (int d = 0; d < set.dim; ++d)
      if (alpha[d] > 0) prod *= table(alpha[d], d);
    row(static_cast<int>(a)) = prod;
  }
  return row;
}

ModelSpec make_diffusion_model(const DiffusionConfig& cfg,
                               const ObservationOperator& op,
                               bool store_full_field, int field_stride) {
  ModelSpec ms;
  ms.n_obs = op.size();
  std::vector<long> levels;
  if (store_full_field) {
    if (field_stride < 1)
      throw ConfigError("make_diffusion_model: field stride must be >= 1");
    const long n_steps = std::max(1L, std::lround(cfg.T / cfg.dt));
    const double dt = cfg.T / static_cast<double>(n_steps);
    for (long s = 0; s <= n_steps; s += field_stride) levels.push_back(s);
    if (levels.back() != n_steps) levels.push_back(n_steps);
    ms.field_nodes = cfg.n_elems + 1;
    for (long s : levels) ms.field_times.push_back(dt * s);
  }
  ms.fn = [cfg, op, levels, store_full_field](const FieldSample& m) {
    Solution sol = solve(m, cfg);
    Eigen::VectorXd obs = observe(sol, op);
    if (!store_full_field) return obs;
    const int nn = cfg.n_elems + 1;
    Eigen::VectorXd out(obs.size() +
                        static_cast<long>(levels.size()) * nn);
    out.head(obs.size()) = obs;
    long at = obs.size();
    for (long s : levels) {
      out.segment(at, nn) = sol.nodal.col(s);
      at += nn;
    }
    return out;
  };
  return ms;
}

namespace {

std::uint64_t basis_content_hash(const KLBasis& basis) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto& b = basis.grid.boundaries();
  h = fnv1a64(b.data(), b.size() * sizeof(double), h);
  h = fnv1a64(basis.eigvals.data(), basis.eigvals.size() * sizeof(double), h);
  h = fnv1a64(basis.modes.data(), basis.modes.size() * sizeof(double), h);
  return h;
}

}  // namespace

PCSurrogate build_surrogate(const ModelSpec& model, const KLBasis& reference,
                            const TrainingSpec& spec) {
  const int K = reference.truncation();
  PCSurrogate s;
  s.indices = enumerate_multi_indices(K, spec.order);
  s.n_obs = model.n_obs;
  s.field_nodes = model.field_nodes;
  s.field_times = model.field_times;
  s.reference_fingerprint = basis_content_hash(reference);
  const long p1 = static_cast<long>(s.indices.size());

  long n_samples = 0;
  Eigen::MatrixXd design;  // n x (P+1)
  Eigen::MatrixXd outputs; // n x n_out
  Eigen::VectorXd weights; // projection only

  if (spec.method == FitMethod::Regression) {
    n_samples = spec.n_samples > 0
                    ? spec.n_samples
                    : static_cast<long>(std::ceil(spec.oversampling * p1));
    if (n_samples < 2 * p1)
      throw ConfigError(
          "build_surrogate: regression needs at least 2 (P+1) samples");
    design.resize(n_samples, p1);
    std::vector<Eigen::VectorXd> xi_draws(n_samples);
    for (long i = 0; i < n_samples; ++i) {
      Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(i)));
      Eigen::VectorXd xi(K);
      for (int k = 0; k < K; ++k) xi(k) = rng.normal();
      xi_draws[i] = xi;
      design.row(i) = hermite_basis_row(s.indices, xi);
    }
    // First sample sizes the output block; the rest run in parallel.
    const Eigen::VectorXd first = model.fn(reconstruct(reference, xi_draws[0]));
    outputs.resize(n_samples, first.size());
    outputs.row(0) = first;
    parallel_for(n_samples - 1, spec.threads, [&](std::size_t i) {
      outputs.row(static_cast<long>(i) + 1) =
          model.fn(reconstruct(reference, xi_draws[i + 1]));
    });
  } else {
    const int level = spec.quad_level > 0 ? spec.quad_level : spec.order + 1;
    double count = 1;
    for (int k = 0; k < K; ++k) count *= level;
    if (count > 2e5)
      throw ConfigError(
          "build_surrogate: tensor projection grid too large; use regression");
    n_samples = static_cast<long>(count);
    QuadratureRule rule = gauss_hermite_prob(level);
    design.resize(n_samples, p1);
    weights.resize(n_samples);
    std::vector<Eigen::VectorXd> nodes(n_samples);
    std::vector<int> digits(K, 0);
    for (long i = 0; i < n_samples; ++i) {
      Eigen::VectorXd xi(K);
      double w = 1.0;
      for (int k = 0; k < K; ++k) {
        xi(k) = rule.nodes[digits[k]];
        w *= rule.weights[digits[k]];
      }
      nodes[i] = xi;
      weights(i) = w;
      design.row(i) = hermite_basis_row(s.indices, xi);
      for (int k = 0; k < K; ++k) {
        if (++digits[k] < level) break;
        digits[k] = 0;
      }
    }
    const Eigen::VectorXd first = model.fn(reconstruct(reference, nodes[0]));
    outputs.resize(n_samples, first.size());
    outputs.row(0) = first;
    parallel_for(n_samples - 1, spec.threads, [&](std::size_t i) {
      outputs.row(static_cast<long>(i) + 1) =
          model.fn(reconstruct(reference, nodes[i + 1]));
    });
  }

  if (!outputs.allFinite())
    throw NumericError("build_surrogate: model returned non-finite outputs");

  if (spec.method == FitMethod::Regression) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < p1)
      throw ConfigError(
          "build_surrogate: regression system is rank-deficient "
          "(under-sampled)");
    s.coeffs = qr.solve(outputs);
  } else {
    // Pseudo-spectral projection: U_alpha = sum_s w_s Psi_alpha(xi_s) y_s.
    s.coeffs = design.transpose() * weights.asDiagonal() * outputs;
  }

  const double y_norm = outputs.norm();
  s.diag.n_samples = static_cast<int>(n_samples);
  s.diag.rel_residual =
      y_norm > 0.0 ? (design * s.coeffs - outputs).norm() / y_norm : 0.0;
  return s;
}

Eigen::VectorXd eval_surrogate(const PCSurrogate& s,
                               const Eigen::VectorXd& xi) {
  const Eigen::VectorXd row = hermite_basis_row(s.indices, xi);
  return s.coeffs.leftCols(s.n_obs).transpose() * row;
}

Eigen::VectorXd eval_surrogate_all(const PCSurrogate& s,
                                   const Eigen::VectorXd& xi) {
  const Eigen::VectorXd row = hermite_basis_row(s.indices, xi);
  return s.coeffs.transpose() * row;
}

// --- artifact IO -----------------------------------------------------------

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat(m.size());
  Eigen::Map<Eigen::MatrixXd>(flat.data(), m.rows(), m.cols()) = m;
  return flat;  // column-major
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, long rows,
                                 long cols) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<long>(v.size()) != rows * cols)
    throw ConfigError("surrogate artifact: matrix size mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

}  // namespace

void save_surrogate(const PCSurrogate& s, const KLBasis& reference,
                    std::uint64_t config_fingerprint,
                    const std::string& path) {
  nlohmann::json j;
  j["format"] = "klpc-surrogate";
  j["version"] = 1;
  j["dim"] = s.indices.dim;
  j["order"] = s.indices.order;
  j["n_obs"] = s.n_obs;
  j["field_nodes"] = s.field_nodes;
  j["field_times"] = s.field_times;
  j["kappa"] = s.kappa;
  j["reference_fingerprint"] = s.reference_fingerprint;
  j["config_fingerprint"] = config_fingerprint;
  j["coeffs"] = matrix_to_json(s.coeffs);
  j["coeff_cols"] = s.coeffs.cols();
  j["diagnostics"] = {{"rel_residual", s.diag.rel_residual},
                      {"n_samples", s.diag.n_samples}};
  j["reference"] = {{"boundaries", reference.grid.boundaries()},
                    {"eigvals", vector_to_json(reference.eigvals)},
                    {"modes", matrix_to_json(reference.modes)},
                    {"full_trace", reference.full_trace}};
  std::ofstream out(path);
  if (!out) throw ConfigError("save_surrogate: cannot write " + path);
  out << j.dump();
}

LoadedSurrogate load_surrogate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_surrogate: cannot read " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "klpc-surrogate" || j.value("version", 0) != 1)
    throw ConfigError("load_surrogate: unrecognized artifact format");

  LoadedSurrogate loaded;
  const auto& jr = j.at("reference");
  loaded.reference.grid =
      Grid1D(jr.at("boundaries").get<std::vector<double>>());
  loaded.reference.eigvals = vector_from_json(jr.at("eigvals"));
  const long n = loaded.reference.grid.size();
  const long k = loaded.reference.eigvals.size();
  loaded.reference.modes = matrix_from_json(jr.at("modes"), n, k);
  loaded.reference.full_trace = jr.at("full_trace").get<double>();

  PCSurrogate& s = loaded.surrogate;
  s.indices = enumerate_multi_indices(j.at("dim").get<int>(),
                                      j.at("order").get<int>());
  s.n_obs = j.at("n_obs").get<int>();
  s.field_nodes = j.at("field_nodes").get<int>();
  s.field_times = j.at("field_times").get<std::vector<double>>();
  s.kappa = j.at("kappa").get<double>();
  s.reference_fingerprint = j.at("reference_fingerprint").get<std::uint64_t>();
  const long cols = j.at("coeff_cols").get<long>();
  s.coeffs = matrix_from_json(j.at("coeffs"),
                              static_cast<long>(s.indices.size()), cols);
  s.diag.rel_residual = j.at("diagnostics").at("rel_residual").get<double>();
  s.diag.n_samples = j.at("diagnostics").at("n_samples").get<int>();
  loaded.config_fingerprint = j.at("config_fingerprint").get<std::uint64_t>();
  return loaded;
}

}  // namespace klpc
