#include "klpc/forward.hpp"

#include <cmath>

namespace klpc {

ObservationOperator ObservationOperator::uniform(int n_x, int n_t, double T) {
  if (n_x < 0 || n_t < 0 || !(T > 0.0))
    throw ConfigError("ObservationOperator: need n_x, n_t >= 0 and T > 0");
  ObservationOperator op;
  op.T = T;
  op.xs.resize(n_x);
  for (int i = 1; i <= n_x; ++i)
    op.xs[i - 1] = static_cast<double>(i) / (n_x + 1);
  op.ts.resize(n_t);
  for (int j = 1; j <= n_t; ++j)
    op.ts[j - 1] = T * static_cast<double>(j) / n_t;
  return op;
}

DiffusionConfig snapped_to_observations(DiffusionConfig cfg, int n_t) {
  if (n_t < 0) throw ConfigError("snapped_to_observations: n_t >= 0");
  if (n_t == 0) return cfg;  // nothing to align with
  const double obs_interval = cfg.T / n_t;
  const long steps = std::max(1L, std::lround(obs_interval / cfg.dt));
  cfg.dt = obs_interval / static_cast<double>(steps);
  return cfg;
}

Eigen::VectorXd field_on_mesh(const FieldSample& m, int n_elems) {
  Eigen::VectorXd values(n_elems);
  for (int e = 0; e < n_elems; ++e) {
    const double x = (e + 0.5) / n_elems;
    values(e) = m.values(m.grid.locate(x));
  }
  return values;
}

namespace {

struct Tridiag {
  Eigen::VectorXd lower, diag, upper;  // lower/upper have size n-1
  explicit Tridiag(int n)
      : lower(Eigen::VectorXd::Zero(n - 1)),
        diag(Eigen::VectorXd::Zero(n)),
        upper(Eigen::VectorXd::Zero(n - 1)) {}
};

// Thomas factorization; the LHS matrix is fixed over the time loop.
struct TridiagLU {
  Eigen::VectorXd c_prime;  // modified upper
  Eigen::VectorXd denom;    // pivots
  const Tridiag* m;

  explicit TridiagLU(const Tridiag& t) : m(&t) {
    const int n = static_cast<int>(t.diag.size());
    c_prime.resize(n - 1);
    denom.resize(n);
    denom(0) = t.diag(0);
    for (int i = 0; i < n - 1; ++i) {
      if (denom(i) == 0.0) throw NumericError("solve: singular system");
      c_prime(i) = t.upper(i) / denom(i);
      denom(i + 1) = t.diag(i + 1) - t.lower(i) * c_prime(i);
    }
    if (denom(n - 1) == 0.0) throw NumericError("solve: singular system");
  }

  void solve_in_place(Eigen::VectorXd& rhs) const {
    const int n = static_cast<int>(rhs.size());
    rhs(0) /= denom(0);
    for (int i = 1; i < n; ++i)
      rhs(i) = (rhs(i) - m->lower(i - 1) * rhs(i - 1)) / denom(i);
    for (int i = n - 2; i >= 0; --i) rhs(i) -= c_prime(i) * rhs(i + 1);
  }
};

void tridiag_matvec(const Tridiag& t, const Eigen::VectorXd& x,
                    Eigen::VectorXd& y) {
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    double s = t.diag(i) * x(i);
    if (i > 0) s += t.lower(i - 1) * x(i - 1);
    if (i + 1 < n) s += t.upper(i) * x(i + 1);
    y(i) = s;
  }
}

}  // namespace

Solution solve(const FieldSample& m, const DiffusionConfig& cfg) {
  if (cfg.n_elems < 2) throw ConfigError("solve: need at least 2 elements");
  if (!(cfg.nu0 > 0.0)) throw ConfigError("solve: nu0 must be > 0");
  if (!(cfg.dt > 0.0) || !(cfg.T > 0.0))
    throw ConfigError("solve: dt and T must be > 0");
  if (!m.values.allFinite()) throw NumericError("solve: non-finite field");

  const int ne = cfg.n_elems;
  const int nn = ne + 1;
  const double h = 1.0 / ne;

  Eigen::VectorXd field = field_on_mesh(m, ne);
  Eigen::VectorXd nu(ne);
  for (int e = 0; e < ne; ++e) nu(e) = cfg.nu0 + std::exp(field(e));
  if (!nu.allFinite()) throw NumericError("solve: non-finite diffusivity");

  // Consistent P1 mass and nu-weighted stiffness.
  Tridiag mass(nn), stiff(nn);
  for (int e = 0; e < ne; ++e) {
    mass.diag(e) += h / 3.0;
    mass.diag(e + 1) += h / 3.0;
    mass.lower(e) += h / 6.0;
    mass.upper(e) += h / 6.0;
    const double k = nu(e) / h;
    stiff.diag(e) += k;
    stiff.diag(e + 1) += k;
    stiff.lower(e) -= k;
    stiff.upper(e) -= k;
  }

  const long n_steps = std::max(1L, std::lround(cfg.T / cfg.dt));
  const double dt = cfg.T / static_cast<double>(n_steps);

  auto make_lhs_rhs = [&](double theta_dt, Tridiag& lhs, Tridiag& rhs) {
    for (int i = 0; i < nn; ++i) {
      lhs.diag(i) = mass.diag(i) + theta_dt * stiff.diag(i);
      rhs.diag(i) = mass.diag(i) - theta_dt * stiff.diag(i);
      if (i < nn - 1) {
        lhs.lower(i) = mass.lower(i) + theta_dt * stiff.lower(i);
        lhs.upper(i) = mass.upper(i) + theta_dt * stiff.upper(i);
        rhs.lower(i) = mass.lower(i) - theta_dt * stiff.lower(i);
        rhs.upper(i) = mass.upper(i) - theta_dt * stiff.upper(i);
      }
    }
    // Dirichlet rows: identity on the boundary nodes.
    lhs.diag(0) = 1.0;
    lhs.upper(0) = 0.0;
    lhs.diag(nn - 1) = 1.0;
    lhs.lower(nn - 2) = 0.0;
  };

  Tridiag lhs(nn), rhs_op(nn);
  make_lhs_rhs(0.5 * dt, lhs, rhs_op);
  TridiagLU lu(lhs);

  // Rannacher startup: the first steps are pairs of backward-Euler
  // half-steps, damping the stiff modes excited by the t = 0 boundary
  // jump that plain Crank-Nicolson would leave oscillating.
  const long startup_steps = std::min<long>(2, n_steps);
  Tridiag be_lhs(nn), be_rhs(nn);
  make_lhs_rhs(0.5 * dt, be_lhs, be_rhs);  // BE with step dt/2
  for (int i = 0; i < nn; ++i) {
    be_rhs.diag(i) = mass.diag(i);
    if (i < nn - 1) {
      be_rhs.lower(i) = mass.lower(i);
      be_rhs.upper(i) = mass.upper(i);
    }
  }
  TridiagLU be_lu(be_lhs);

  Solution sol;
  sol.n_elems = ne;
  sol.dt = dt;
  sol.times.resize(n_steps + 1);
  sol.nodal.resize(nn, n_steps + 1);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(nn);
  u(0) = cfg.bc_left;
  u(nn - 1) = cfg.bc_right;
  sol.times[0] = 0.0;
  sol.nodal.col(0) = u;

  Eigen::VectorXd rhs(nn);
  auto advance = [&](const Tridiag& op, const TridiagLU& fac) {
    tridiag_matvec(op, u, rhs);
    rhs(0) = cfg.bc_left;
    rhs(nn - 1) = cfg.bc_right;
    fac.solve_in_place(rhs);
    u = rhs;
  };

  for (long step = 1; step <= n_steps; ++step) {
    if (step <= startup_steps) {
      advance(be_rhs, be_lu);
      advance(be_rhs, be_lu);
    } else {
      advance(rhs_op, lu);
    }
    sol.times[step] = dt * static_cast<double>(step);
    sol.nodal.col(step) = u;
  }
  return sol;
}

Eigen::VectorXd observe(const Solution& sol, const ObservationOperator& op) {
  const int n_levels = static_cast<int>(sol.times.size());
  const int nn = sol.n_elems + 1;
  Eigen::VectorXd out(op.size());
  int idx = 0;
  for (double t : op.ts) {
    const long level = std::lround(t / sol.dt);
    if (level < 0 || level >= n_levels ||
        std::abs(t - sol.times[level]) > 1e-9 * std::max(1.0, op.T))
      throw ConfigError("observe: observation time is not a stored level");
    for (double x : op.xs) {
      if (x < 0.0 || x > 1.0)
        throw ConfigError("observe: observation point outside the mesh");
      const double s = x * sol.n_elems;
      int j = std::min(static_cast<int>(s), sol.n_elems - 1);
      const double w = s - j;
      out(idx++) =
          (1.0 - w) * sol.nodal(j, level) + w * sol.nodal(j + 1, level);
    }
  }
  return out;
}

}  // namespace klpc
