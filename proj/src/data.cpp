#include "klpc/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "klpc/rng.hpp"

namespace klpc {

TrueProfile make_profile(const std::string& tag, int fine_cells,
                         std::uint64_t ran_seed) {
  Grid1D grid = Grid1D::uniform(fine_cells);
  TrueProfile p;
  p.tag = tag;
  if (tag == "sin") {
    Eigen::VectorXd v(fine_cells);
    for (int i = 0; i < fine_cells; ++i)
      v(i) = std::sin(2.0 * M_PI * grid.midpoint(i));
    p.field = {grid, v};
  } else if (tag == "step") {
    Eigen::VectorXd v(fine_cells);
    for (int i = 0; i < fine_cells; ++i)
      v(i) = grid.midpoint(i) < 0.5 ? -0.5 : 0.5;
    p.field = {grid, v};
  } else if (tag == "ran") {
    p.seed = ran_seed;
    p.l = 0.25;
    p.sigma_f2 = 0.65;
    const HyperParams q{p.l, p.sigma_f2};
    const KLBasis basis = decompose(
        assemble_cov_matrix(SquaredExponentialKernel{}, grid, q), fine_cells);
    Rng rng(ran_seed);
    Eigen::VectorXd z(fine_cells);
    for (int i = 0; i < fine_cells; ++i) z(i) = rng.normal();
    p.field = reconstruct(basis, z);
  } else {
    throw ConfigError("make_profile: unknown profile tag '" + tag + "'");
  }
  return p;
}

FieldSample profile_on_grid(const TrueProfile& profile, const Grid1D& grid) {
  Eigen::VectorXd v(grid.size());
  for (int i = 0; i < grid.size(); ++i)
    v(i) = profile.field.values(profile.field.grid.locate(grid.midpoint(i)));
  return {grid, v};
}

std::uint64_t solver_fingerprint(const DiffusionConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << cfg.nu0 << '|' << cfg.n_elems << '|' << cfg.dt << '|' << cfg.T << '|'
     << cfg.bc_left << '|' << cfg.bc_right;
  return fnv1a64(os.str());
}

Dataset generate_observations(const TrueProfile& profile,
                              const DiffusionConfig& fine_cfg,
                              const DiffusionConfig& coarse_cfg,
                              const ObservationOperator& layout,
                              double sigma_eps2, std::uint64_t seed) {
  if (sigma_eps2 < 0.0)
    throw ConfigError("generate_observations: negative noise variance");
  const int n_t = static_cast<int>(layout.ts.size());
  const DiffusionConfig fine = snapped_to_observations(fine_cfg, n_t);
  const DiffusionConfig coarse = snapped_to_observations(coarse_cfg, n_t);
  if (fine.n_elems < 4 * coarse.n_elems ||
      fine.dt > 0.25 * coarse.dt * (1.0 + 1e-12))
    throw ConfigError(
        "generate_observations: inverse-crime guard: data solve must use >= "
        "4x elements and <= 1/4 dt of the inference solve");

  const Solution sol = solve(profile.field, fine);
  Dataset ds;
  ds.d = observe(sol, layout);
  ds.layout = layout;
  ds.sigma_eps2 = sigma_eps2;
  ds.noise_seed = seed;
  ds.profile_tag = profile.tag;
  ds.profile_seed = profile.seed;
  ds.fine_fingerprint = solver_fingerprint(fine);
  if (sigma_eps2 > 0.0) {
    Rng rng(seed);
    const double sd = std::sqrt(sigma_eps2);
    for (long i = 0; i < ds.d.size(); ++i) ds.d(i) += sd * rng.normal();
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_dataset: cannot write " + path);
  out << "x,t,d\n";
  out.precision(17);
  long idx = 0;
  for (double t : ds.layout.ts)
    for (double x : ds.layout.xs) out << x << ',' << t << ',' << ds.d(idx++) << '\n';

  nlohmann::json meta;
  meta["n_x"] = ds.layout.xs.size();
  meta["n_t"] = ds.layout.ts.size();
  meta["T"] = ds.layout.T;
  meta["sigma_eps2"] = ds.sigma_eps2;
  meta["noise_seed"] = ds.noise_seed;
  meta["profile"] = ds.profile_tag;
  meta["profile_seed"] = ds.profile_seed;
  meta["fine_fingerprint"] = ds.fine_fingerprint;
  std::ofstream mout(path + ".meta.json");
  if (!mout) throw ConfigError("save_dataset: cannot write sidecar");
  mout << meta.dump(2);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream min(path + ".meta.json");
  if (!min) throw ConfigError("load_dataset: missing sidecar for " + path);
  nlohmann::json meta;
  min >> meta;

  Dataset ds;
  ds.layout = ObservationOperator::uniform(meta.at("n_x").get<int>(),
                                           meta.at("n_t").get<int>(),
                                           meta.at("T").get<double>());
  ds.sigma_eps2 = meta.at("sigma_eps2").get<double>();
  ds.noise_seed = meta.at("noise_seed").get<std::uint64_t>();
  ds.profile_tag = meta.at("profile").get<std::string>();
  ds.profile_seed = meta.at("profile_seed").get<std::uint64_t>();
  ds.fine_fingerprint = meta.at("fine_fingerprint").get<std::uint64_t>();

  std::ifstream in(path);
  if (!in) throw ConfigError("load_dataset: cannot read " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ConfigError("load_dataset: malformed CSV line");
    values.push_back(std::stod(line.substr(c2 + 1)));
  }
  if (static_cast<int>(values.size()) != ds.layout.size())
    throw ConfigError("load_dataset: observation count mismatch");
  ds.d = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
  return ds;
}

}  // namespace klpc
