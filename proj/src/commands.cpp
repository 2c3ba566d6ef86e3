#include "klpc/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "klpc/inference.hpp"
#include "klpc/parallel.hpp"
#include "klpc/rng.hpp"

namespace klpc {

namespace {

using nlohmann::json;

void write_run_sidecar(const ExperimentConfig& cfg, const std::string& command,
                       const json& extra, const std::string& path) {
  json j;
  j["command"] = command;
  j["config_fingerprint"] = config_fingerprint(cfg);
  j["seed"] = cfg.seed;
  j["config"] = json::parse(config_to_json(cfg));
  j["outputs"] = extra;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write sidecar " + path);
  out << j.dump(2);
}

std::string ensure_dir(const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  return out_dir;
}

}  // namespace

KLBasis build_reference(const ExperimentConfig& cfg, int K_override) {
  const Grid1D grid = Grid1D::uniform(cfg.grid_n);
  const Kernel kernel = make_kernel(cfg);
  const int K = K_override > 0 ? K_override : cfg.K;
  CovMatrix cov;
  if (cfg.reference_type == "averaged") {
    const Kernel averaged = average_kernel(kernel, cfg.prior, grid,
                                           AveragingQuadrature{cfg.quad_l_nodes});
    cov = assemble_cov_matrix(averaged, grid, cfg.reference_q);
  } else {
    cov = assemble_cov_matrix(kernel, grid, cfg.reference_q);
  }
  return orient_canonical(decompose(cov, K));
}

BuildOutcome cmd_build_surrogate(const ExperimentConfig& cfg,
                                 const std::string& out_dir) {
  validate(cfg);
  ensure_dir(out_dir);
  const KLBasis reference = build_reference(cfg);
  const ObservationOperator op =
      ObservationOperator::uniform(cfg.n_x, cfg.n_t, cfg.surrogate_solver.T);
  const DiffusionConfig solver =
      snapped_to_observations(cfg.surrogate_solver, cfg.n_t);
  const ModelSpec model = make_diffusion_model(solver, op);

  TrainingSpec spec;
  spec.order = cfg.pc_order;
  spec.method = cfg.fit_method == "projection" ? FitMethod::Projection
                                               : FitMethod::Regression;
  spec.oversampling = cfg.oversampling;
  spec.n_samples = cfg.train_samples;
  spec.seed = Rng::derive(cfg.seed, seed_channel::kTraining);
  spec.threads = cfg.threads;

  PCSurrogate surrogate = build_surrogate(model, reference, spec);
  surrogate.kappa = cfg.kappa;

  // Held-out check at fresh reference-measure draws.
  const int K = reference.truncation();
  double num = 0.0, den = 0.0;
  Rng rng(Rng::derive(cfg.seed, seed_channel::kHeldOut));
  for (int s = 0; s < cfg.held_out_samples; ++s) {
    Eigen::VectorXd xi(K);
    for (int k = 0; k < K; ++k) xi(k) = rng.normal();
    const Eigen::VectorXd direct = model.fn(reconstruct(reference, xi));
    const Eigen::VectorXd fitted = eval_surrogate(surrogate, xi);
    num += (direct - fitted).squaredNorm();
    den += direct.squaredNorm();
  }
  const double held_out = den > 0.0 ? std::sqrt(num / den) : 0.0;

  BuildOutcome outcome;
  outcome.fingerprint = surrogate_fingerprint(cfg);
  outcome.artifact_path = out_dir + "/surrogate.json";
  outcome.held_out_error = held_out;
  outcome.rel_residual = surrogate.diag.rel_residual;
  save_surrogate(surrogate, reference, outcome.fingerprint,
                 outcome.artifact_path);
  write_run_sidecar(cfg, "build-surrogate",
                    {{"artifact", outcome.artifact_path},
                     {"surrogate_fingerprint", outcome.fingerprint},
                     {"training_seed", spec.seed},
                     {"held_out_error", held_out},
                     {"rel_residual", surrogate.diag.rel_residual},
                     {"n_samples", surrogate.diag.n_samples}},
                    out_dir + "/surrogate.run.json");
  return outcome;
}

DataOutcome cmd_generate_data(const ExperimentConfig& cfg,
                              const std::string& out_dir) {
  validate(cfg);
  ensure_dir(out_dir);
  const TrueProfile profile =
      make_profile(cfg.profile, cfg.data_solver.n_elems);
  const ObservationOperator op =
      ObservationOperator::uniform(cfg.n_x, cfg.n_t, cfg.data_solver.T);
  const Dataset ds = generate_observations(
      profile, cfg.data_solver, cfg.surrogate_solver, op, cfg.sigma_eps2,
      Rng::derive(cfg.seed, seed_channel::kNoise));

  DataOutcome outcome;
  outcome.dataset_path = out_dir + "/dataset.csv";
  outcome.profile_path = out_dir + "/true_profile.csv";
  save_dataset(ds, outcome.dataset_path);

  std::ofstream pout(outcome.profile_path);
  pout << "x,m\n";
  pout.precision(12);
  for (int i = 0; i < profile.field.grid.size(); ++i)
    pout << profile.field.grid.midpoint(i) << ',' << profile.field.values(i)
         << '\n';
  write_run_sidecar(cfg, "generate-data",
                    {{"dataset", outcome.dataset_path},
                     {"profile", outcome.profile_path},
                     {"noise_seed", ds.noise_seed},
                     {"profile_seed", ds.profile_seed}},
                    out_dir + "/dataset.run.json");
  return outcome;
}

InferOutcome cmd_infer(const ExperimentConfig& cfg,
                       const std::string& dataset_path,
                       const std::string& surrogate_path,
                       const std::string& out_dir) {
  validate(cfg);
  ensure_dir(out_dir);
  const Dataset ds = load_dataset(dataset_path);
  if (static_cast<int>(ds.layout.xs.size()) != cfg.n_x ||
      static_cast<int>(ds.layout.ts.size()) != cfg.n_t ||
      ds.layout.T != cfg.surrogate_solver.T)
    throw ConfigError("cmd_infer: dataset layout does not match the config");

  LoadedSurrogate loaded = load_surrogate(surrogate_path);
  if (loaded.config_fingerprint != surrogate_fingerprint(cfg))
    throw StaleArtifactError(
        "cmd_infer: surrogate artifact was built from a different config");
  if (loaded.surrogate.n_obs != ds.layout.size())
    throw ConfigError("cmd_infer: surrogate/dataset observation mismatch");

  const Kernel kernel = make_kernel(cfg);
  TransformFactory tf(kernel, loaded.reference, cfg.kappa);
  const Priors priors{cfg.prior.l, cfg.prior.sigma_f2};
  const int K = loaded.reference.truncation();

  PosteriorState init;
  init.eta = Eigen::VectorXd::Zero(K);
  init.q = cfg.sample_hyperparams ? HyperParams{cfg.init_l, cfg.init_sigma_f2}
                                  : cfg.reference_q;
  init.sigma_o2 = cfg.init_sigma_o2;

  AdaptConfig adapt;
  adapt.adapt_start = cfg.adapt_start;
  adapt.eps = cfg.adapt_eps;
  adapt.sample_hyperparams = cfg.sample_hyperparams;

  const PCSurrogate& surrogate = loaded.surrogate;
  const Eigen::VectorXd& d = ds.d;
  const LogPost logpost = [&](const PosteriorState& s) {
    const double prior_term = log_prior(s, priors);
    if (!std::isfinite(prior_term)) return prior_term;
    return prior_term + log_likelihood(d, s, surrogate, tf);
  };

  const Chain chain =
      mcmc_sample(logpost, init, cfg.mcmc_steps, adapt,
                  Rng::derive(cfg.seed, seed_channel::kChain));
  const int burn_in =
      static_cast<int>(cfg.mcmc_steps * cfg.burn_in_fraction);

  InferOutcome outcome;
  outcome.chain_path = out_dir + "/chain.csv";
  outcome.diagnostics_path = out_dir + "/diagnostics.json";
  outcome.profile_path = out_dir + "/profile_stats.csv";
  outcome.acceptance_rate = chain.acceptance_rate(burn_in);
  save_chain_csv(chain, outcome.chain_path);

  // Marginal KLD of each eta coordinate against its standard-normal prior.
  const int kept = cfg.mcmc_steps - burn_in;
  json diag;
  diag["acceptance_rate"] = outcome.acceptance_rate;
  diag["burn_in"] = burn_in;
  diag["kept_states"] = kept;
  std::vector<double> series(kept);
  json kld_list = json::array();
  json ess_list = json::array();
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < kept; ++i)
      series[i] = chain.states[burn_in + i].eta(k);
    const Kde post = kde(series);
    Eigen::VectorXd prior_density(post.grid.size());
    for (int g = 0; g < post.grid.size(); ++g)
      prior_density(g) = std::exp(-0.5 * post.grid(g) * post.grid(g)) /
                         std::sqrt(2.0 * M_PI);
    kld_list.push_back(kld(post.grid, post.density, prior_density));
    ess_list.push_back(effective_sample_size(series));
  }
  diag["eta_kld"] = kld_list;
  diag["eta_ess"] = ess_list;

  for (int i = 0; i < kept; ++i)
    series[i] = chain.states[burn_in + i].sigma_o2;
  diag["sigma_o2_kde_mode"] = kde_mode(kde(series));
  diag["sigma_o2_ess"] = effective_sample_size(series);

  if (cfg.sample_hyperparams) {
    for (int i = 0; i < kept; ++i)
      series[i] = chain.states[burn_in + i].q.l;
    diag["l_kde_mode"] = kde_mode(kde(series));
    diag["l_ess"] = effective_sample_size(series);
    double above = 0.0;
    for (double v : series) above += v > 0.4 ? 1.0 : 0.0;
    diag["l_prob_above_0.4"] = above / kept;
    for (int i = 0; i < kept; ++i)
      series[i] = chain.states[burn_in + i].q.sigma_f2;
    diag["sigma_f2_kde_mode"] = kde_mode(kde(series));
  }

  int map_at = burn_in;
  for (int i = burn_in; i < cfg.mcmc_steps; ++i)
    if (chain.log_post[i] > chain.log_post[map_at]) map_at = i;
  const PosteriorState& map_state = chain.states[map_at];
  diag["map"] = {{"step", map_at},
                 {"log_post", chain.log_post[map_at]},
                 {"l", map_state.q.l},
                 {"sigma_f2", map_state.q.sigma_f2},
                 {"sigma_o2", map_state.sigma_o2}};

  const FieldStats stats = field_posterior_stats(chain, burn_in, tf);
  auto to_array = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  diag["profile"] = {{"x", to_array(stats.grid.midpoints())},
                     {"mean", to_array(stats.mean)},
                     {"median", to_array(stats.median)},
                     {"q05", to_array(stats.quantiles[0])},
                     {"q95", to_array(stats.quantiles[1])},
                     {"map", to_array(stats.map_profile)}};
  diag["chain_seed"] = chain.seed;

  std::ofstream dout(outcome.diagnostics_path);
  dout << diag.dump(2);

  std::ofstream pout(outcome.profile_path);
  pout << "x,mean,median,q05,q95,map\n";
  pout.precision(12);
  for (int i = 0; i < stats.grid.size(); ++i)
    pout << stats.grid.midpoint(i) << ',' << stats.mean(i) << ','
         << stats.median(i) << ',' << stats.quantiles[0](i) << ','
         << stats.quantiles[1](i) << ',' << stats.map_profile(i) << '\n';

  write_run_sidecar(cfg, "infer",
                    {{"chain", outcome.chain_path},
                     {"diagnostics", outcome.diagnostics_path},
                     {"profile_stats", outcome.profile_path},
                     {"chain_seed", chain.seed},
                     {"acceptance_rate", outcome.acceptance_rate}},
                    out_dir + "/infer.run.json");
  return outcome;
}

namespace {

// The Figure-3 style comparison set: the configured reference plus fixed
// references at selected correlation lengths.
std::vector<std::pair<std::string, ExperimentConfig>> comparison_references(
    const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, ExperimentConfig>> refs;
  refs.emplace_back(reference_label(cfg), cfg);
  if (cfg.kernel_type == "squared_exponential") {
    const double sf2 = prior_mean(cfg.prior.sigma_f2);
    for (double lr : {0.1, 0.3, 0.5, 1.0}) {
      ExperimentConfig alt = cfg;
      alt.reference_type = "fixed";
      alt.reference_q = {lr, sf2};
      if (reference_label(alt) == refs.front().first) continue;
      refs.emplace_back(reference_label(alt), alt);
    }
  }
  return refs;
}

}  // namespace

std::string cmd_error_study(const ExperimentConfig& cfg,
                            const std::string& study,
                            const std::string& out_dir) {
  validate(cfg);
  ensure_dir(out_dir);
  const Kernel kernel = make_kernel(cfg);
  const double sf2_eval = cfg.reference_type == "fixed"
                              ? cfg.reference_q.sigma_f2
                              : prior_mean(cfg.prior.sigma_f2);
  std::vector<double> l_grid;
  for (int i = 1; i <= 10; ++i) l_grid.push_back(0.1 * i);

  const std::string csv_path = out_dir + "/" + study + ".csv";
  std::vector<ErrorCurve> curves;
  std::string value_name = "error";

  if (study == "eps_M_vs_K") {
    std::vector<int> Ks;
    for (int k = 1; k <= std::min(25, cfg.grid_n); ++k) Ks.push_back(k);
    const std::uint64_t seed = Rng::derive(cfg.seed, seed_channel::kStudyM);
    for (const auto& [label, ref_cfg] : comparison_references(cfg)) {
      const KLBasis ref = build_reference(ref_cfg, Ks.back());
      const auto est = E_M(kernel, cfg.prior, Ks, ref, cfg.study_n_mc_M, seed,
                           cfg.threads);
      ErrorCurve curve;
      curve.reference_label = label;
      curve.n_mc = cfg.study_n_mc_M;
      curve.seed = seed;
      for (std::size_t i = 0; i < Ks.size(); ++i) {
        curve.abscissa.push_back(Ks[i]);
        curve.values.push_back(est[i].value);
        curve.ses.push_back(est[i].se);
      }
      curves.push_back(std::move(curve));
    }
  } else if (study == "eps_M_vs_l") {
    const std::uint64_t seed = Rng::derive(cfg.seed, seed_channel::kStudyM);
    for (const auto& [label, ref_cfg] : comparison_references(cfg)) {
      const KLBasis ref = build_reference(ref_cfg, cfg.K);
      ErrorCurve curve;
      curve.reference_label = label;
      curve.n_mc = cfg.study_n_mc_M;
      curve.seed = seed;
      for (std::size_t i = 0; i < l_grid.size(); ++i) {
        const auto est = eps_M(kernel, {l_grid[i], sf2_eval}, cfg.K, ref,
                               cfg.study_n_mc_M, Rng::derive(seed, i));
        curve.abscissa.push_back(l_grid[i]);
        curve.values.push_back(est.value);
        curve.ses.push_back(est.se);
      }
      curves.push_back(std::move(curve));
    }
  } else if (study == "eps_U_vs_o" || study == "eps_U_vs_K") {
    const ObservationOperator op =
        ObservationOperator::uniform(cfg.n_x, cfg.n_t, cfg.surrogate_solver.T);
    const DiffusionConfig solver =
        snapped_to_observations(cfg.surrogate_solver, cfg.n_t);
    const std::uint64_t eval_seed =
        Rng::derive(cfg.seed, seed_channel::kStudyU);
    ErrorCurve curve;
    curve.reference_label = reference_label(cfg);
    curve.n_mc = cfg.study_n_mc_U;
    curve.seed = eval_seed;

    if (study == "eps_U_vs_o") {
      const KLBasis reference = build_reference(cfg);
      const ModelSpec model = make_diffusion_model(solver, op, true);
      std::vector<PCSurrogate> surrogates;
      std::vector<const PCSurrogate*> ptrs;
      for (int o = 1; o <= cfg.pc_order; ++o) {
        TrainingSpec spec;
        spec.order = o;
        spec.oversampling = cfg.oversampling;
        spec.seed = Rng::derive(cfg.seed, seed_channel::kTraining + o);
        spec.threads = cfg.threads;
        spec.store_full_field = true;
        surrogates.push_back(build_surrogate(model, reference, spec));
      }
      for (const auto& s : surrogates) ptrs.push_back(&s);
      SurrogateErrorSetup setup{kernel, reference, solver, cfg.study_kappa,
                                cfg.threads};
      const auto est = surrogate_solution_error(
          setup, ptrs, cfg.prior, std::nullopt, cfg.study_n_mc_U, eval_seed);
      for (int o = 1; o <= cfg.pc_order; ++o) {
        curve.abscissa.push_back(o);
        curve.values.push_back(est[o - 1].value);
        curve.ses.push_back(est[o - 1].se);
      }
    } else {
      const ModelSpec model = make_diffusion_model(solver, op, true);
      for (int K = 1; K <= cfg.K; ++K) {
        const KLBasis reference = build_reference(cfg, K);
        TrainingSpec spec;
        spec.order = cfg.pc_order;
        spec.oversampling = cfg.oversampling;
        spec.seed = Rng::derive(cfg.seed, seed_channel::kTraining + 100 + K);
        spec.threads = cfg.threads;
        spec.store_full_field = true;
        const PCSurrogate s = build_surrogate(model, reference, spec);
        SurrogateErrorSetup setup{kernel, reference, solver, cfg.study_kappa,
                                  cfg.threads};
        const auto est = surrogate_solution_error(
            setup, {&s}, cfg.prior, std::nullopt, cfg.study_n_mc_U,
            Rng::derive(eval_seed, K));
        curve.abscissa.push_back(K);
        curve.values.push_back(est[0].value);
        curve.ses.push_back(est[0].se);
      }
    }
    curves.push_back(std::move(curve));
  } else if (study == "stretching_vs_l") {
    value_name = "sqrt_beta_max";
    const KLBasis reference = build_reference(cfg);
    const Grid1D grid = reference.grid;
    ErrorCurve curve;
    curve.reference_label = reference_label(cfg);
    curve.n_mc = 0;
    curve.seed = 0;
    for (double l = 0.1; l <= 1.0 + 1e-12; l += 0.025) {
      const HyperParams q{l, sf2_eval};
      const KLBasis basis = orient(
          decompose(assemble_cov_matrix(kernel, grid, q), cfg.K), reference);
      CoordinateTransform t =
          thresholded(projection_coeffs(basis, reference), cfg.study_kappa);
      t.q = q;
      const StretchReport report = stretching(t);
      curve.abscissa.push_back(l);
      curve.values.push_back(std::sqrt(report.beta_max));
      curve.ses.push_back(0.0);
    }
    curves.push_back(std::move(curve));
  } else {
    throw ConfigError("cmd_error_study: unknown study '" + study + "'");
  }

  const std::string abscissa_name =
      (study == "eps_M_vs_K" || study == "eps_U_vs_K") ? "K"
      : study == "eps_U_vs_o"                          ? "o"
                                                        : "l";
  write_error_curve_csv(curves, abscissa_name, value_name, csv_path);
  write_run_sidecar(cfg, "error-study",
                    {{"study", study}, {"csv", csv_path}},
                    out_dir + "/" + study + ".run.json");
  return csv_path;
}

}  // namespace klpc
