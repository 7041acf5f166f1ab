#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qdot/specfun.hpp"

// Independent finite-difference reference solver for the partial radial
// Hamiltonians
//   H_m = -d^2/drho^2 + (m^2 - 1/4)/(a^2 sinh^2(rho/a))
//         + (a^2 omega^2 / 4) sinh^2(rho/a)
// on L^2((0,inf), drho), used as a second opinion for the spheroidal-series
// eigenvalue solver.  It shares no code with that solver.
//
// Discretization note: a plain central-difference scheme for u with a
// Dirichlet node at rho = 0 converges only logarithmically for m = 0
// because u ~ sqrt(rho) there (the -1/(4 rho^2) borderline singularity);
// measured error is ~12% at N = 2000 and decays like 1/log N.  The solver
// therefore removes the half-density factor first, u = sqrt(rho) w, which
// turns the problem into the regular Bessel-type Sturm-Liouville form
//   -(rho w')' + rho (V_m + 1/(4 rho^2)) w = E rho w
// with smooth w (w ~ rho^{|m|}).  Central differences on a uniform
// staggered grid (cell centers (i-1/2)h, fluxes at faces i h) are then
// genuinely second order for every m, the natural boundary condition at
// rho = 0 selects the Friedrichs solution, and Richardson extrapolation
// over N and 2N is justified.  Dirichlet is imposed at rho = R with
// V_m(a, R) at least box_factor times the largest requested level.

namespace qdot::oracle {

struct OracleOptions {
  int grid_points = 2000;        // N of the coarse grid; the fine grid is 2N
  double box_factor = 3.0;       // V(R) >= box_factor * E_max
  double rel_disagreement_cap = 0.01;  // coarse/fine relative mismatch limit
};

struct OracleSolution {
  std::vector<double> energies;  // Richardson-extrapolated
  std::vector<double> coarse, fine;
  double box_radius = 0.0;
  double max_disagreement = 0.0;
};

// V_m(a, rho); a = infinity gives the flat (Euclidean) potential.
inline double potential(int m, double a, double omega, double rho) {
  double m2 = double(m) * m;
  if (std::isinf(a))
    return (m2 - 0.25) / (rho * rho) + 0.25 * omega * omega * rho * rho;
  double s = a * std::sinh(rho / a);
  return (m2 - 0.25) / (s * s) + 0.25 * omega * omega * s * s;
}

// Exact potential and its large-a expansion
//   (m^2 - 1/4)/rho^2 + omega^2 rho^2/4 + (1/4 - m^2)/(3 a^2)
//   + omega^2 rho^4 / (12 a^2),
// for certifying the O(1/a^4) remainder.
inline std::pair<double, double> potential_expansion_check(int m, double a,
                                                           double omega,
                                                           double rho) {
  double m2 = double(m) * m;
  double exact = potential(m, a, omega, rho);
  double expansion = (m2 - 0.25) / (rho * rho) +
                     0.25 * omega * omega * rho * rho +
                     (0.25 - m2) / (3.0 * a * a) +
                     omega * omega * std::pow(rho, 4) / (12.0 * a * a);
  return {exact, expansion};
}

namespace detail {

// Number of eigenvalues of the symmetric tridiagonal (d, e) below x,
// by the standard LDL^T inertia count.
inline int sturm_count(const std::vector<double>& d,
                       const std::vector<double>& e, double x) {
  int cnt = 0;
  double q = d[0] - x;
  if (q < 0) ++cnt;
  for (size_t i = 1; i < d.size(); ++i) {
    double off = e[i - 1];
    if (q == 0.0) q = 1e-300;
    q = d[i] - x - off * off / q;
    if (q < 0) ++cnt;
  }
  return cnt;
}

// Lowest k eigenvalues of the symmetric tridiagonal (d, e) by bisection.
inline std::vector<double> tridiag_lowest(const std::vector<double>& d,
                                          const std::vector<double>& e,
                                          int k) {
  double lo = d[0], hi = d[0];
  for (size_t i = 0; i < d.size(); ++i) {
    double r = (i > 0 ? std::abs(e[i - 1]) : 0.0) +
               (i + 1 < d.size() ? std::abs(e[i]) : 0.0);
    lo = std::min(lo, d[i] - r);
    hi = std::max(hi, d[i] + r);
  }
  std::vector<double> out;
  for (int idx = 0; idx < k; ++idx) {
    double a = lo, b = hi;
    for (int it = 0; it < 120 && b - a > 1e-14 * (std::abs(a) + 1.0); ++it) {
      double mid = 0.5 * (a + b);
      if (sturm_count(d, e, mid) > idx)
        b = mid;
      else
        a = mid;
    }
    out.push_back(0.5 * (a + b));
  }
  return out;
}

// Lowest k eigenvalues at a given resolution.  Cell centers (i-1/2)h,
// i = 1..N; the generalized problem A w = E B w with B = diag(rho_i) is
// symmetrized by the congruence B^{-1/2} A B^{-1/2}.
inline std::vector<double> fd_levels(int m, double a, double omega, int N,
                                     double R, int k) {
  double h = R / N;
  std::vector<double> d(static_cast<size_t>(N));
  std::vector<double> e(static_cast<size_t>(N - 1));
  for (int i = 1; i <= N; ++i) {
    double rho = (i - 0.5) * h;
    double vt = potential(m, a, omega, rho) + 0.25 / (rho * rho);
    double face_l = (i - 1) * h, face_r = i * h;
    d[size_t(i - 1)] = ((face_l + face_r) / (h * h) + rho * vt) / rho;
  }
  for (int i = 1; i < N; ++i) {
    double rho_i = (i - 0.5) * h, rho_j = (i + 0.5) * h;
    e[size_t(i - 1)] = -(i * h) / (h * h) / std::sqrt(rho_i * rho_j);
  }
  return tridiag_lowest(d, e, k);
}

}  // namespace detail

// Lowest `count` eigenvalues of H_m with Richardson extrapolation over the
// two grids N and 2N.  Throws if the two resolutions disagree beyond the
// configured cap (unconverged result).
inline OracleSolution direct_eigenvalues(int m, double a, double omega,
                                         int count, OracleOptions opt = {}) {
  if (count < 1) throw std::domain_error("direct_eigenvalues: count >= 1");
  if (!(omega > 0)) throw std::domain_error("direct_eigenvalues: omega > 0");
  if (!(a > 0)) throw std::domain_error("direct_eigenvalues: a > 0");
  const int mu = std::abs(m);
  // generous level estimate from the flat value plus the 1/a^2 correction
  int n_top = count - 1;
  double e_est = (2.0 * n_top + mu + 1) * omega;
  if (!std::isinf(a))
    e_est += (2.0 * n_top * (n_top + mu + 1) + mu + 0.75) / (a * a);
  double e_max = 1.5 * e_est + 2.0 * omega;
  // box radius from the confining sinh^2 (resp. rho^2) term alone; the
  // remaining terms only increase V for large rho
  double target = opt.box_factor * e_max;
  double R;
  if (std::isinf(a)) {
    R = 2.0 * std::sqrt(target) / omega;
  } else {
    double s = std::sqrt(4.0 * target / (a * a * omega * omega));
    R = a * std::asinh(s);
  }
  R = std::max(R, 4.0 / std::sqrt(omega));

  OracleSolution sol;
  sol.box_radius = R;
  sol.coarse = detail::fd_levels(m, a, omega, opt.grid_points, R, count);
  sol.fine = detail::fd_levels(m, a, omega, 2 * opt.grid_points, R, count);
  for (int i = 0; i < count; ++i) {
    double c = sol.coarse[size_t(i)], f = sol.fine[size_t(i)];
    double richardson = (4.0 * f - c) / 3.0;
    sol.energies.push_back(richardson);
    double dis = std::abs(f - c) / std::max(1.0, std::abs(richardson));
    sol.max_disagreement = std::max(sol.max_disagreement, dis);
  }
  if (sol.max_disagreement > opt.rel_disagreement_cap)
    throw ConvergenceError(
        "direct_eigenvalues: grid refinement disagreement; raise grid_points");
  return sol;
}

}  // namespace qdot::oracle
