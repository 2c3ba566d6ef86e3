#pragma once

#include <Eigen/Dense>
#include <vector>

#include "klpc/kl.hpp"

namespace klpc {

// dU/dt = d/dx(nu dU/dx) on [0,1] with nu = nu0 + exp(m), U(0,t) = bc_left,
// U(1,t) = bc_right, U(x,0) = 0 at interior nodes.
struct DiffusionConfig {
  double nu0 = 0.1;
  int n_elems = 56;
  double dt = 1e-4;
  double T = 0.05;
  double bc_left = -1.0;
  double bc_right = 1.0;
};

struct Solution {
  int n_elems = 0;
  double dt = 0.0;                // effective step after rounding
  std::vector<double> times;      // all stored levels, starting at t = 0
  Eigen::MatrixXd nodal;          // (n_elems + 1) x n_levels

  Eigen::VectorXd node_coords() const {
    Eigen::VectorXd x(n_elems + 1);
    for (int i = 0; i <= n_elems; ++i)
      x(i) = static_cast<double>(i) / n_elems;
    return x;
  }
};

struct ObservationOperator {
  std::vector<double> xs;  // strictly interior
  std::vector<double> ts;  // in (0, T]
  double T = 0.05;

  // n_x locations i/(n_x+1) and n_t times j*T/n_t.
  static ObservationOperator uniform(int n_x, int n_t, double T);
  int size() const { return static_cast<int>(xs.size() * ts.size()); }
};

// Adjusts dt so each observation interval T/n_t is an integer number of
// steps (closest to the requested dt); removes temporal interpolation.
DiffusionConfig snapped_to_observations(DiffusionConfig cfg, int n_t);

// Piecewise-constant field sampled at element midpoints.
Eigen::VectorXd field_on_mesh(const FieldSample& m, int n_elems);

// P1 finite elements + Crank-Nicolson; returns the full nodal history.
Solution solve(const FieldSample& m, const DiffusionConfig& cfg);

// Linear space interpolation at stored time levels; time-major then space
// ordering: index = it * n_x + ix.
Eigen::VectorXd observe(const Solution& sol, const ObservationOperator& op);

}  // namespace klpc
