#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "qdot/oracle.hpp"

using namespace qdot;
static const double kInf = std::numeric_limits<double>::infinity();

TEST_CASE("flat oscillator levels are reproduced to high accuracy") {
  for (int m : {0, 1, 2}) {
    auto sol = oracle::direct_eigenvalues(m, kInf, 1.0, 3);
    for (int n = 0; n < 3; ++n) {
      double exact = 2.0 * n + std::abs(m) + 1.0;
      CAPTURE(m, n);
      CHECK(std::abs(sol.energies[size_t(n)] - exact) < 1e-6);
    }
  }
  // omega scaling
  auto sol2 = oracle::direct_eigenvalues(1, kInf, 2.0, 2);
  CHECK(std::abs(sol2.energies[0] - 4.0) < 2e-6);
  CHECK(std::abs(sol2.energies[1] - 8.0) < 4e-6);
}

TEST_CASE("weak curvature approaches flat values") {
  auto sol = oracle::direct_eigenvalues(1, 1e3, 1.0, 3);
  CHECK(std::abs(sol.energies[0] - 2.0) < 1e-3);
  CHECK(std::abs(sol.energies[1] - 4.0) < 1e-3);
  CHECK(std::abs(sol.energies[2] - 6.0) < 1e-3);
}

TEST_CASE("benchmark point a^2 = 24") {
  // Reference values computed with two independent discretizations (in the
  // geodesic-radius and in the hyperbolic-cosine coordinate) agreeing to
  // six significant digits.
  const double ref0[3] = {1.030447, 3.186723, 5.486168};
  const double ref1[3] = {2.069816, 4.299874, 6.667154};
  double a = std::sqrt(24.0);
  auto s0 = oracle::direct_eigenvalues(0, a, 1.0, 3);
  auto s1 = oracle::direct_eigenvalues(1, a, 1.0, 3);
  for (int n = 0; n < 3; ++n) {
    CAPTURE(n);
    CHECK(std::abs(s0.energies[size_t(n)] / ref0[n] - 1.0) < 5e-3);
    CHECK(std::abs(s1.energies[size_t(n)] / ref1[n] - 1.0) < 5e-3);
    // the Richardson-extrapolated values are far tighter than the headline
    // tolerance
    CHECK(std::abs(s0.energies[size_t(n)] / ref0[n] - 1.0) < 2e-6);
    CHECK(std::abs(s1.energies[size_t(n)] / ref1[n] - 1.0) < 2e-6);
  }
}

TEST_CASE("sign of m does not matter") {
  auto p = oracle::direct_eigenvalues(2, 5.0, 1.0, 2);
  auto q = oracle::direct_eigenvalues(-2, 5.0, 1.0, 2);
  CHECK(p.energies[0] == q.energies[0]);
  CHECK(p.energies[1] == q.energies[1]);
}

TEST_CASE("potential expansion residual scales as 1/a^4") {
  // V_m(rho) minus its displayed large-a expansion is O(1/a^4) pointwise
  double rho = 1.3;
  for (int m : {0, 1}) {
    auto [e100, x100] = oracle::potential_expansion_check(m, 10.0, 1.0, rho);
    auto [e400, x400] = oracle::potential_expansion_check(m, 20.0, 1.0, rho);
    double r100 = std::abs(e100 - x100) * 1e4;     // a^2 = 100
    double r400 = std::abs(e400 - x400) * 16e4;    // a^2 = 400
    CAPTURE(m, r100, r400);
    CHECK(r100 / r400 > 0.5);
    CHECK(r100 / r400 < 2.0);
  }
}

TEST_CASE("refinement disagreement is reported") {
  oracle::OracleOptions opt;
  opt.grid_points = 12;  // deliberately unconverged
  opt.rel_disagreement_cap = 1e-8;
  CHECK_THROWS_AS(oracle::direct_eigenvalues(0, std::sqrt(24.0), 1.0, 3, opt),
                  ConvergenceError);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(oracle::direct_eigenvalues(0, -1.0, 1.0, 1),
                  std::domain_error);
  CHECK_THROWS_AS(oracle::direct_eigenvalues(0, 1.0, 0.0, 1),
                  std::domain_error);
  CHECK_THROWS_AS(oracle::direct_eigenvalues(0, 1.0, 1.0, 0),
                  std::domain_error);
}
