#pragma once

#include <cstdint>
#include <string>

#include "klpc/forward.hpp"
#include "klpc/kl.hpp"

namespace klpc {

// Ground-truth log-diffusivity profile tabulated on the fine (data
// generation) grid.
struct TrueProfile {
  std::string tag;  // "sin", "step" or "ran"
  FieldSample field;
  std::uint64_t seed = 0;  // ran only
  double l = 0.0, sigma_f2 = 0.0;  // ran only
};

// sin: sin(2 pi x); step: -1/2 below x = 0.5, +1/2 above; ran: a pinned-
// seed draw from GP(0, SE(l = 0.25, sigma_f2 = 0.65)).
TrueProfile make_profile(const std::string& tag, int fine_cells,
                         std::uint64_t ran_seed = 424242);

// Profile values resampled onto another grid (piecewise constant lookup).
FieldSample profile_on_grid(const TrueProfile& profile, const Grid1D& grid);

struct Dataset {
  Eigen::VectorXd d;
  ObservationOperator layout;
  double sigma_eps2 = 0.0;
  std::uint64_t noise_seed = 0;
  std::string profile_tag;
  std::uint64_t profile_seed = 0;
  std::uint64_t fine_fingerprint = 0;  // fine-solve configuration
};

// Solves on the fine mesh, observes, adds iid N(0, sigma_eps2) noise. The
// inverse-crime guard requires fine_cfg to have at least 4x the elements
// and at most 1/4 the (snapped) time step of coarse_cfg.
Dataset generate_observations(const TrueProfile& profile,
                              const DiffusionConfig& fine_cfg,
                              const DiffusionConfig& coarse_cfg,
                              const ObservationOperator& layout,
                              double sigma_eps2, std::uint64_t seed);

// CSV (x, t, d) plus a JSON metadata sidecar at path + ".meta.json".
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

std::uint64_t solver_fingerprint(const DiffusionConfig& cfg);

}  // namespace klpc
