#include "klpc/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace klpc {

namespace {

using nlohmann::json;

json prior_to_json(const ScalarPrior& p) {
  return std::visit(
      [](const auto& dist) -> json {
        using T = std::decay_t<decltype(dist)>;
        if constexpr (std::is_same_v<T, UniformDist>)
          return {{"type", "uniform"}, {"lo", dist.lo}, {"hi", dist.hi}};
        else if constexpr (std::is_same_v<T, PointMassDist>)
          return {{"type", "point"}, {"value", dist.value}};
        else if constexpr (std::is_same_v<T, InvGammaDist>)
          return {{"type", "inverse_gamma"},
                  {"alpha", dist.alpha},
                  {"beta", dist.beta}};
        else
          return {{"type", "discrete"},
                  {"values", dist.values},
                  {"weights", dist.weights}};
      },
      p);
}

ScalarPrior prior_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "uniform")
    return UniformDist{j.at("lo").get<double>(), j.at("hi").get<double>()};
  if (type == "point") return PointMassDist{j.at("value").get<double>()};
  if (type == "inverse_gamma")
    return InvGammaDist{j.at("alpha").get<double>(),
                        j.at("beta").get<double>()};
  if (type == "discrete")
    return DiscreteDist{j.at("values").get<std::vector<double>>(),
                        j.at("weights").get<std::vector<double>>()};
  throw ConfigError("config: unknown prior type '" + type + "'");
}

json solver_to_json(const DiffusionConfig& s) {
  return {{"nu0", s.nu0}, {"n_elems", s.n_elems}, {"dt", s.dt}, {"T", s.T}};
}

DiffusionConfig solver_from_json(const json& j) {
  DiffusionConfig s;
  s.nu0 = j.at("nu0").get<double>();
  s.n_elems = j.at("n_elems").get<int>();
  s.dt = j.at("dt").get<double>();
  s.T = j.at("T").get<double>();
  return s;
}

json config_to_json_object(const ExperimentConfig& c) {
  json j;
  j["kernel"] = {{"type", c.kernel_type},
                 {"sigma_d2", c.composite.sigma_d2},
                 {"sigma_b2", c.composite.sigma_b2},
                 {"sigma_n2", c.composite.sigma_n2}};
  j["prior"] = {{"l", prior_to_json(c.prior.l)},
                {"sigma_f2", prior_to_json(c.prior.sigma_f2)}};
  j["reference"] = {{"type", c.reference_type},
                    {"l", c.reference_q.l},
                    {"sigma_f2", c.reference_q.sigma_f2}};
  j["kl"] = {{"grid_n", c.grid_n}, {"K", c.K}};
  j["pc"] = {{"order", c.pc_order},
             {"kappa", c.kappa},
             {"study_kappa", c.study_kappa},
             {"fit_method", c.fit_method},
             {"oversampling", c.oversampling},
             {"train_samples", c.train_samples},
             {"held_out_samples", c.held_out_samples}};
  j["quadrature"] = {{"l_nodes", c.quad_l_nodes}};
  j["solver"] = {{"surrogate", solver_to_json(c.surrogate_solver)},
                 {"data", solver_to_json(c.data_solver)}};
  j["observations"] = {{"n_x", c.n_x},
                       {"n_t", c.n_t},
                       {"sigma_eps2", c.sigma_eps2},
                       {"profile", c.profile}};
  j["mcmc"] = {{"steps", c.mcmc_steps},
               {"burn_in_fraction", c.burn_in_fraction},
               {"sample_hyperparams", c.sample_hyperparams},
               {"adapt_start", c.adapt_start},
               {"adapt_eps", c.adapt_eps},
               {"init",
                {{"l", c.init_l},
                 {"sigma_f2", c.init_sigma_f2},
                 {"sigma_o2", c.init_sigma_o2}}}};
  j["studies"] = {{"n_mc_M", c.study_n_mc_M}, {"n_mc_U", c.study_n_mc_U}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  const auto& jk = j.at("kernel");
  c.kernel_type = jk.at("type").get<std::string>();
  c.composite.sigma_d2 = jk.at("sigma_d2").get<double>();
  c.composite.sigma_b2 = jk.at("sigma_b2").get<double>();
  c.composite.sigma_n2 = jk.at("sigma_n2").get<double>();
  c.prior.l = prior_from_json(j.at("prior").at("l"));
  c.prior.sigma_f2 = prior_from_json(j.at("prior").at("sigma_f2"));
  const auto& jr = j.at("reference");
  c.reference_type = jr.at("type").get<std::string>();
  c.reference_q.l = jr.at("l").get<double>();
  c.reference_q.sigma_f2 = jr.at("sigma_f2").get<double>();
  c.grid_n = j.at("kl").at("grid_n").get<int>();
  c.K = j.at("kl").at("K").get<int>();
  const auto& jp = j.at("pc");
  c.pc_order = jp.at("order").get<int>();
  c.kappa = jp.at("kappa").get<double>();
  c.study_kappa = jp.at("study_kappa").get<double>();
  c.fit_method = jp.at("fit_method").get<std::string>();
  c.oversampling = jp.at("oversampling").get<double>();
  c.train_samples = jp.at("train_samples").get<int>();
  c.held_out_samples = jp.at("held_out_samples").get<int>();
  c.quad_l_nodes = j.at("quadrature").at("l_nodes").get<int>();
  c.surrogate_solver = solver_from_json(j.at("solver").at("surrogate"));
  c.data_solver = solver_from_json(j.at("solver").at("data"));
  const auto& jo = j.at("observations");
  c.n_x = jo.at("n_x").get<int>();
  c.n_t = jo.at("n_t").get<int>();
  c.sigma_eps2 = jo.at("sigma_eps2").get<double>();
  c.profile = jo.at("profile").get<std::string>();
  const auto& jm = j.at("mcmc");
  c.mcmc_steps = jm.at("steps").get<int>();
  c.burn_in_fraction = jm.at("burn_in_fraction").get<double>();
  c.sample_hyperparams = jm.at("sample_hyperparams").get<bool>();
  c.adapt_start = jm.at("adapt_start").get<int>();
  c.adapt_eps = jm.at("adapt_eps").get<double>();
  c.init_l = jm.at("init").at("l").get<double>();
  c.init_sigma_f2 = jm.at("init").at("sigma_f2").get<double>();
  c.init_sigma_o2 = jm.at("init").at("sigma_o2").get<double>();
  c.study_n_mc_M = j.at("studies").at("n_mc_M").get<int>();
  c.study_n_mc_U = j.at("studies").at("n_mc_U").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.threads = j.at("threads").get<int>();
  return c;
}

void check_unknown_keys(const json& file, const json& schema,
                        const std::string& path) {
  if (!file.is_object()) return;
  for (auto it = file.begin(); it != file.end(); ++it) {
    if (!schema.contains(it.key()))
      throw ConfigError("config: unknown key '" + path + it.key() + "'");
    if (it.value().is_object())
      check_unknown_keys(it.value(), schema.at(it.key()),
                         path + it.key() + ".");
  }
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  return config_to_json_object(cfg).dump(2);
}

ExperimentConfig load_config_over(const ExperimentConfig& base,
                                  const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  json patch;
  try {
    in >> patch;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
  }
  json merged = config_to_json_object(base);
  check_unknown_keys(patch, merged, "");
  merged.update(patch, /*merge_objects=*/true);
  ExperimentConfig cfg = config_from_json(merged);
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return load_config_over(ExperimentConfig{}, path);
}

std::vector<std::string> preset_names() {
  return {"desk-sin",  "desk-step",  "desk-ran",
          "desk-sin-fixed", "desk-step-fixed", "desk-ran-fixed",
          "paper-sin", "paper-step", "paper-ran",
          "paper-sin-fixed", "paper-step-fixed", "paper-ran-fixed"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;  // desk defaults
  std::string rest = name;
  const bool paper = rest.rfind("paper-", 0) == 0;
  const bool desk = rest.rfind("desk-", 0) == 0;
  if (!paper && !desk)
    throw ConfigError("unknown preset '" + name + "'");
  rest = rest.substr(rest.find('-') + 1);
  const bool fixed = rest.size() > 6 && rest.substr(rest.size() - 6) == "-fixed";
  if (fixed) rest = rest.substr(0, rest.size() - 6);
  if (rest != "sin" && rest != "step" && rest != "ran")
    throw ConfigError("unknown preset '" + name + "'");

  c.profile = rest;
  if (paper) {
    c.K = 15;
    c.pc_order = 10;
    c.mcmc_steps = 250000;
  }
  if (fixed) {
    c.reference_type = "fixed";
    c.reference_q = {0.5, 0.5};
    c.sample_hyperparams = false;
  }
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.kernel_type != "squared_exponential" && c.kernel_type != "composite")
    throw ConfigError("config: unknown kernel type '" + c.kernel_type + "'");
  if (c.composite.sigma_d2 < 0 || c.composite.sigma_b2 < 0 ||
      c.composite.sigma_n2 < 0)
    throw ConfigError("config: composite coefficients must be >= 0");
  if (c.reference_type != "averaged" && c.reference_type != "fixed")
    throw ConfigError("config: reference type must be averaged or fixed");
  if (c.reference_type == "fixed") validate(c.reference_q);
  if (c.grid_n < 2) throw ConfigError("config: grid_n must be >= 2");
  if (c.K < 1 || c.K > c.grid_n)
    throw ConfigError("config: K must be in [1, grid_n]");
  if (c.pc_order < 0) throw ConfigError("config: pc order must be >= 0");
  if (c.kappa < 0 || c.study_kappa < 0)
    throw ConfigError("config: kappa must be >= 0");
  if (c.fit_method != "regression" && c.fit_method != "projection")
    throw ConfigError("config: fit method must be regression or projection");
  if (c.oversampling <= 0)
    throw ConfigError("config: oversampling must be > 0");
  if (c.quad_l_nodes < 1)
    throw ConfigError("config: quadrature needs at least one node");
  if (c.n_x < 0 || c.n_t < 0)
    throw ConfigError("config: observation layout needs n_x, n_t >= 0");
  if (c.sigma_eps2 < 0) throw ConfigError("config: sigma_eps2 must be >= 0");
  if (c.profile != "sin" && c.profile != "step" && c.profile != "ran")
    throw ConfigError("config: profile must be sin, step or ran");
  if (c.mcmc_steps < 1) throw ConfigError("config: mcmc steps must be >= 1");
  if (c.burn_in_fraction < 0 || c.burn_in_fraction >= 1)
    throw ConfigError("config: burn-in fraction must be in [0, 1)");
  if (!(c.init_l > 0) || !(c.init_sigma_f2 > 0) || !(c.init_sigma_o2 > 0))
    throw ConfigError("config: MCMC init values must be positive");
  if (c.study_n_mc_M < 2 || c.study_n_mc_U < 2)
    throw ConfigError("config: study sample counts must be >= 2");
  if (c.threads < 0) throw ConfigError("config: threads must be >= 0");
  for (const DiffusionConfig& s : {c.surrogate_solver, c.data_solver}) {
    if (s.n_elems < 2 || !(s.dt > 0) || !(s.T > 0) || !(s.nu0 > 0))
      throw ConfigError("config: invalid solver block");
  }
  if (c.surrogate_solver.T != c.data_solver.T)
    throw ConfigError("config: solver horizons must agree");
}

std::uint64_t config_fingerprint(const ExperimentConfig& cfg) {
  return fnv1a64(config_to_json_object(cfg).dump());
}

std::uint64_t surrogate_fingerprint(const ExperimentConfig& cfg) {
  const json full = config_to_json_object(cfg);
  json sub;
  sub["kernel"] = full.at("kernel");
  sub["prior"] = full.at("prior");
  sub["reference"] = full.at("reference");
  sub["kl"] = full.at("kl");
  sub["pc"] = {{"order", cfg.pc_order},
               {"fit_method", cfg.fit_method},
               {"oversampling", cfg.oversampling},
               {"train_samples", cfg.train_samples}};
  sub["quadrature"] = full.at("quadrature");
  sub["solver"] = full.at("solver").at("surrogate");
  sub["observations"] = {{"n_x", cfg.n_x}, {"n_t", cfg.n_t}};
  sub["T"] = cfg.surrogate_solver.T;
  return fnv1a64(sub.dump());
}

Kernel make_kernel(const ExperimentConfig& cfg) {
  if (cfg.kernel_type == "composite") return cfg.composite;
  return SquaredExponentialKernel{};
}

std::string reference_label(const ExperimentConfig& cfg) {
  if (cfg.reference_type == "averaged") return "averaged";
  std::ostringstream os;
  os << "fixed-l" << cfg.reference_q.l << "-sf2_" << cfg.reference_q.sigma_f2;
  return os.str();
}

}  // namespace klpc
