#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdot/detail/quad.hpp"
#include "qdot/detail/rootfind.hpp"
#include "qdot/oracle.hpp"
#include "qdot/spheroidal.hpp"

// Spectral solver for the partial Hamiltonians H_m of the quantum dot on
// the Lobachevsky plane: nu <-> z maps, eigenvalues via the joining-factor
// condition, normalized eigenfunctions, and the flat-case reference with
// the 1/a^2 asymptotic machinery.

namespace qdot {

struct ModelParams {
  double a = 1.0;      // curvature radius; infinity selects the flat case
  double omega = 1.0;  // oscillator frequency

  bool is_flat() const { return std::isinf(a); }
  double a_squared() const { return a * a; }
  double theta() const {
    return is_flat() ? 0.0 : -(a * a) * (a * a) * omega * omega / 16.0;
  }
  void validate() const {
    if (!(a > 0)) throw std::domain_error("ModelParams: a must be > 0");
    if (!(omega > 0)) throw std::domain_error("ModelParams: omega must be > 0");
  }
  static ModelParams from_a_squared(double a2, double omega = 1.0) {
    return {std::sqrt(a2), omega};
  }
  static ModelParams flat(double omega = 1.0) {
    return {std::numeric_limits<double>::infinity(), omega};
  }
};

enum class EntryKind { PartialWave, PointLevel };

struct SpectrumEntry {
  int n = 0;  // radial index (ascending within fixed m)
  int m = 0;
  double energy = 0.0;
  EntryKind kind = EntryKind::PartialWave;
  // multiplicity within the full Hamiltonian: the +-m partial waves are
  // degenerate, so |m| >= 1 levels carry 2 by default
  int multiplicity = 1;
};

struct CurveSample {
  std::vector<double> grid;
  std::vector<double> values;
  std::string label;
};

// ---------------------------------------------------------------------------
// Flat-case closed forms and the appendix integral identity.

inline double flat_energy(int n, int m, double omega) {
  if (n < 0) throw std::domain_error("flat_energy: n >= 0");
  return (2.0 * n + std::abs(m) + 1.0) * omega;
}

// Exact rational value (num/den, reduced) with a floating fallback when the
// exact path would overflow.
struct KummerValue {
  bool exact = false;
  long long num = 0, den = 1;
  double value = 0.0;
};

namespace detail {

using int128 = __int128;

inline int128 gcd_128(int128 a, int128 b) {
  while (b != 0) {
    int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

struct Rat {
  int128 num = 0, den = 1;
  void reduce() {
    if (den < 0) { num = -num; den = -den; }
    int128 g = gcd_128(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
  }
  Rat& operator+=(const Rat& o) {
    num = num * o.den + o.num * den;
    den *= o.den;
    reduce();
    return *this;
  }
};

inline int128 factorial_128(int n) {
  int128 f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline int128 binomial_128(int n, int k) {
  if (k < 0 || k > n) return 0;
  int128 b = 1;
  for (int i = 1; i <= k; ++i) {
    b *= (n - k + i);
    b /= i;
  }
  return b;
}

}  // namespace detail

// Integral of t^{m+l} e^{-t} 1F1(-n, 1+m, t)^2 over (0, inf), evaluated
// through the finite-sum identity
//   (m!)^2 sum_{k=max(0,n-l)}^{n} (-1)^{n+k} C(n,k) (k+l)!/(k+m)!
//                                 C(k+m+l, n+m)
// in exact integer arithmetic when the factorials fit into 128-bit
// integers (arguments up to 33), with a floating gamma-function fallback
// beyond that.
inline KummerValue kummer_integral(int n, int m, int l) {
  if (n < 0 || m < 0 || l < 0)
    throw std::domain_error("kummer_integral: n, m, l must be >= 0");
  bool fits = (n + m + l <= 33) && (m <= 33);
  KummerValue out;
  if (fits) {
    detail::Rat sum;
    for (int k = std::max(0, n - l); k <= n; ++k) {
      detail::Rat term;
      term.num = detail::binomial_128(n, k) * detail::factorial_128(k + l) *
                 detail::binomial_128(k + m + l, n + m);
      term.den = detail::factorial_128(k + m);
      if ((n + k) % 2 != 0) term.num = -term.num;
      term.reduce();
      sum += term;
    }
    detail::Rat mf;
    mf.num = detail::factorial_128(m) * detail::factorial_128(m);
    sum.num *= mf.num;
    sum.reduce();
    if (sum.num > std::numeric_limits<long long>::max() ||
        sum.num < std::numeric_limits<long long>::min() ||
        sum.den > std::numeric_limits<long long>::max()) {
      fits = false;
    } else {
      out.exact = true;
      out.num = (long long)sum.num;
      out.den = (long long)sum.den;
      out.value = double(out.num) / double(out.den);
    }
  }
  if (!fits) {
    double lm = std::lgamma(m + 1.0);
    double sum = 0.0;
    for (int k = std::max(0, n - l); k <= n; ++k) {
      double lt = 2.0 * lm + std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0) + std::lgamma(k + l + 1.0) -
                  std::lgamma(k + m + 1.0) + std::lgamma(k + m + l + 1.0) -
                  std::lgamma(n + m + 1.0) - std::lgamma(k + l - n + 1.0);
      sum += (((n + k) % 2 == 0) ? 1.0 : -1.0) * std::exp(lt);
    }
    out.exact = false;
    out.num = 0;
    out.den = 1;
    out.value = sum;
  }
  return out;
}

// Exact first-order perturbation coefficient
//   (1/12) <Phi, U_m Phi> / <Phi, Phi>,  U_m = 1 - 4 m^2 + omega^2 rho^4,
// reduced through the integral identity above; equals
// 2n(n+|m|+1) + |m| + 3/4 and does not depend on omega.
inline KummerValue perturbation_coefficient_exact(int n, int m) {
  int mu = std::abs(m);
  KummerValue i0 = kummer_integral(n, mu, 0);
  KummerValue i2 = kummer_integral(n, mu, 2);
  if (!i0.exact || !i2.exact) {
    KummerValue out;
    out.exact = false;
    out.value =
        ((1.0 - 4.0 * double(mu) * mu) + 4.0 * i2.value / i0.value) / 12.0;
    return out;
  }
  // (1 - 4 mu^2 + 4 i2/i0) / 12
  detail::Rat r;
  r.num = detail::int128(1 - 4 * mu * mu) * i2.den * i0.num +
          detail::int128(4) * i2.num * i0.den;
  r.den = detail::int128(12) * i2.den * i0.num;
  r.reduce();
  KummerValue out;
  out.exact = true;
  out.num = (long long)r.num;
  out.den = (long long)r.den;
  out.value = double(out.num) / double(out.den);
  return out;
}

// Floating evaluation with the omega algebra written out; the frequency
// cancels identically.
inline double perturbation_coefficient(int n, int m, double omega) {
  int mu = std::abs(m);
  double i0 = kummer_integral(n, mu, 0).value;
  double i2 = kummer_integral(n, mu, 2).value;
  double rho4 = omega * omega * (2.0 / omega) * (2.0 / omega) * i2 / i0;
  return ((1.0 - 4.0 * double(mu) * mu) + rho4) / 12.0;
}

inline double asymptotic_energy(int n, int m, const ModelParams& params) {
  params.validate();
  double flat = flat_energy(n, m, params.omega);
  if (params.is_flat()) return flat;
  int mu = std::abs(m);
  return flat + (2.0 * n * (n + mu + 1.0) + mu + 0.75) / params.a_squared();
}

// ---------------------------------------------------------------------------
// nu <-> z maps and the eigenvalue condition.

inline double z_from_nu(const NuPoint& nu, int m, const ModelParams& params) {
  params.validate();
  if (params.is_flat())
    throw std::domain_error("z_from_nu: undefined in the flat limit");
  SpheroidalParams p{m, params.theta(), nu};
  double lam = lambda_eig(p);
  return -(lam + 0.25) / params.a_squared();
}

// Left-hand side of the eigenvalue condition
//   e^{i(3 nu + 1/2) pi} K^m_{-nu-1}(theta) + K^m_nu(theta)
// at the given family point.
inline cplx eigencondition(const NuPoint& nu, int m,
                           const ModelParams& params) {
  params.validate();
  if (params.is_flat())
    throw std::domain_error("eigencondition: undefined in the flat limit");
  SpheroidalParams p{m, params.theta(), nu};
  auto tab = coefficient_table(p);
  auto dec = radial_decomposition(tab);
  return eigencondition_value(dec, nu);
}

// ---------------------------------------------------------------------------
// Partial-wave eigenvalue solver.

struct SolveOptions {
  double scan_start_factor = 0.1;  // scan starts at this multiple of omega
  double scan_step_factor = 0.4;   // z step in units of omega
  double certify_tol = 1e-10;      // eigencondition residual at each root
  double oracle_rtol = 1e-4;       // second-opinion agreement requirement
  bool run_oracle = true;
  oracle::OracleOptions oracle_options{};
};

struct CertifiedLevel {
  SpectrumEntry entry;
  NuPoint nu{NuPoint::Family::RealAxis, 0.0};
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double residual = 0.0;
  double oracle_energy = std::numeric_limits<double>::quiet_NaN();
};

struct EigenvalueReport {
  std::vector<CertifiedLevel> levels;
  std::vector<std::string> warnings;
  double max_oracle_deviation = 0.0;
};

struct BracketMissError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Scan function in the spectral parameter: the normalized coefficient of
// the singular Frobenius branch of the decaying radial solution.  Real,
// smooth in z, with a simple zero at every eigenvalue of H_m and no poles,
// so plain sign-change bracketing cannot misclassify roots.
inline double spectral_bracket(int mu, const ModelParams& params, double z) {
  double lam = -params.a_squared() * z - 0.25;
  return eigencondition_bracket(singular_constants(mu, params.theta(), lam));
}

}  // namespace detail

inline EigenvalueReport partial_wave_eigenvalues_report(
    int m, const ModelParams& params, int count, SolveOptions opts = {}) {
  params.validate();
  if (count < 1)
    throw std::domain_error("partial_wave_eigenvalues: count >= 1");
  const int mu = std::abs(m);
  const double w = params.omega;
  EigenvalueReport rep;

  if (params.is_flat()) {
    for (int n = 0; n < count; ++n) {
      CertifiedLevel lvl;
      lvl.entry = {n, m, flat_energy(n, m, w), EntryKind::PartialWave,
                   mu == 0 ? 1 : 2};
      lvl.oracle_energy = lvl.entry.energy;
      rep.levels.push_back(lvl);
    }
    return rep;
  }

  const double a2 = params.a_squared();
  const double th = params.theta();
  auto bracket = [&](double z) { return detail::spectral_bracket(mu, params, z); };

  // estimated ceiling for the topmost requested level (flat value plus a
  // generously scaled curvature correction)
  double cap = flat_energy(count + 1, m, w) +
               8.0 * (2.0 * (count + 1) * (count + mu + 2) + mu + 1) / a2 +
               10.0 * w;
  std::vector<double> roots;
  double dz = opts.scan_step_factor * w;
  for (int attempt = 0; attempt < 2 && int(roots.size()) < count; ++attempt) {
    roots.clear();
    double z = opts.scan_start_factor * w;
    double f_prev = bracket(z);
    while (int(roots.size()) < count && z < cap) {
      double z2 = z + dz;
      double f2 = bracket(z2);
      if (f_prev * f2 < 0.0)
        roots.push_back(qdot::detail::brent(bracket, z, z2, f_prev, f2, 1e-14));
      else if (f2 == 0.0)
        roots.push_back(z2);
      z = z2;
      f_prev = f2;
    }
    dz *= 0.25;  // refinement retry on a bracket miss
  }
  if (int(roots.size()) < count)
    throw BracketMissError(
        "partial_wave_eigenvalues: scan found fewer roots than requested");

  std::optional<double> t_hint;
  for (int n = 0; n < count; ++n) {
    double z_root = roots[size_t(n)];
    CertifiedLevel lvl;
    for (int polish = 0;; ++polish) {
      lvl.lambda = -a2 * z_root - 0.25;
      lvl.nu = nu_from_lambda(m, th, lvl.lambda, t_hint);
      SpheroidalParams sp{m, th, lvl.nu};
      auto tab = coefficient_table_at(sp, lvl.lambda);
      auto dec = radial_decomposition(tab);
      lvl.residual = eigencondition_residual(dec);
      if (lvl.residual <= opts.certify_tol || polish >= 4) break;
      // sharpen the root on the full joining-factor condition
      double h = 1e-9 * std::max(1.0, std::abs(z_root));
      double f0 = bracket(z_root), f1 = bracket(z_root + h);
      if (f1 == f0) break;
      z_root -= f0 * h / (f1 - f0);
    }
    if (lvl.nu.family == NuPoint::Family::CriticalLine)
      t_hint = lvl.nu.parameter;
    if (lvl.residual > opts.certify_tol)
      throw ConvergenceError(
          "partial_wave_eigenvalues: eigencondition residual not certified");
    lvl.entry = {n, m, z_root, EntryKind::PartialWave, mu == 0 ? 1 : 2};
    rep.levels.push_back(lvl);
  }

  if (opts.run_oracle) {
    auto osol =
        oracle::direct_eigenvalues(m, params.a, w, count, opts.oracle_options);
    for (int n = 0; n < count; ++n) {
      double eo = osol.energies[size_t(n)];
      rep.levels[size_t(n)].oracle_energy = eo;
      double dev = std::abs(rep.levels[size_t(n)].entry.energy - eo) /
                   std::max(std::abs(eo), 1e-300);
      rep.max_oracle_deviation = std::max(rep.max_oracle_deviation, dev);
      if (dev > opts.oracle_rtol)
        rep.warnings.push_back(
            "oracle mismatch at (n=" + std::to_string(n) +
            ", m=" + std::to_string(m) + "): relative deviation " +
            std::to_string(dev));
    }
  }
  return rep;
}

inline std::vector<SpectrumEntry> partial_wave_eigenvalues(
    int m, const ModelParams& params, int count, SolveOptions opts = {}) {
  auto rep = partial_wave_eigenvalues_report(m, params, count, opts);
  std::vector<SpectrumEntry> out;
  for (auto& lvl : rep.levels) out.push_back(lvl.entry);
  return out;
}

// ---------------------------------------------------------------------------
// Eigenfunctions.

namespace detail {

// rho beyond which the WKB envelope of the eigenfunction has decayed by
// e^{-tail_log} past the outer turning point.
inline double wkb_rho_max(int m, const ModelParams& params, double energy,
                          double tail_log) {
  double scale = 2.0 * std::sqrt(std::max(energy, params.omega)) /
                     params.omega +
                 1.0;
  double h = scale / 512.0;
  double acc = 0.0;
  double rho = h;
  for (long it = 0; it < 4000000; ++it) {
    double v = oracle::potential(m, params.a, params.omega, rho);
    if (v > energy) acc += std::sqrt(v - energy) * h;
    if (acc >= tail_log) return rho;
    rho += h;
  }
  throw ConvergenceError("wkb_rho_max: envelope never decayed");
}

}  // namespace detail

struct EigenfunctionOptions {
  double tail_log = 30.0;   // envelope decay exponent defining rho_max
  int panels = 96;          // initial GK15 panel count for the norm
  double norm_rtol = 1e-10; // norm quadrature error target
};

// Normalized eigenfunction psi_{n,m}(rho) on L^2((0,inf), drho), positive
// near rho -> 0+.  Batch evaluation amortizes the inward ODE integration
// over all requested points.
class EigenfunctionEvaluator {
 public:
  EigenfunctionEvaluator(const CertifiedLevel& lvl, const ModelParams& params,
                         EigenfunctionOptions opt = {})
      : params_(params), m_(std::abs(lvl.entry.m)), opt_(opt) {
    params_.validate();
    energy_ = lvl.entry.energy;
    n_ = lvl.entry.n;
    rho_max_ = detail::wkb_rho_max(m_, params_, energy_, opt_.tail_log);
    if (!params_.is_flat()) {
      lambda_ = lvl.lambda;
      sc_ = singular_constants(m_, params_.theta(), lambda_);
      sign_ = sc_.B >= 0 ? 1.0 : -1.0;
    }
    scale_ = 1.0;
    scale_ = 1.0 / std::sqrt(integrate_sq(opt_.panels));
    double check = integrate_sq(2 * opt_.panels);
    norm_residual_ = std::abs(check - 1.0);
    if (norm_residual_ > 1e-8)
      throw ConvergenceError("eigenfunction: normalization not converged");
  }

  double rho_max() const { return rho_max_; }
  double norm_residual() const { return norm_residual_; }

  // psi at the given radii (any order, rho > 0)
  std::vector<double> values(const std::vector<double>& rho) const {
    std::vector<double> out(rho.size());
    if (params_.is_flat()) {
      for (size_t i = 0; i < rho.size(); ++i) out[i] = flat_value(rho[i]);
      return out;
    }
    const double a = params_.a;
    const double xi_m = sc_.basis.xi_eval;
    std::vector<double> ode_targets;
    std::vector<size_t> ode_index;
    for (size_t i = 0; i < rho.size(); ++i) {
      if (!(rho[i] > 0.0))
        throw std::domain_error("eigenfunction: rho must be > 0");
      double xi = std::cosh(rho[i] / a);
      if (xi <= xi_m) {
        // Frobenius region: the eigenfunction is the regular branch
        double d = std::max(xi - 1.0, 1e-300);
        double ws, wsp, wr, wrp;
        sc_.basis.eval(d, ws, wsp, wr, wrp);
        out[i] = envelope(rho[i]) * sc_.B * wr;
      } else {
        ode_targets.push_back(xi);
        ode_index.push_back(i);
      }
    }
    if (!ode_targets.empty()) {
      auto uniq = ode_targets;
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      auto sol = qdot::detail::radial_decaying(m_, params_.theta(), lambda_,
                                               uniq, xi_m);
      for (size_t k = 0; k < ode_targets.size(); ++k) {
        auto it = std::find(sol.xi.begin(), sol.xi.end(), ode_targets[k]);
        out[ode_index[k]] =
            envelope(rho[ode_index[k]]) * sol.y[size_t(it - sol.xi.begin())];
      }
    }
    for (auto& v : out) v *= sign_ * scale_;
    return out;
  }

  // composite GK15 integral of psi^2 over (0, rho_max)
  double integrate_sq(int panels) const {
    std::vector<double> nodes, weights;
    double h2 = 0.5 * rho_max_ / panels;
    for (int p = 0; p < panels; ++p) {
      double c = (2 * p + 1) * h2;
      nodes.push_back(c);
      weights.push_back(qdot::detail::gk15_wk[0] * h2);
      for (int i = 1; i < 8; ++i) {
        nodes.push_back(c - h2 * qdot::detail::gk15_x[i]);
        weights.push_back(qdot::detail::gk15_wk[i] * h2);
        nodes.push_back(c + h2 * qdot::detail::gk15_x[i]);
        weights.push_back(qdot::detail::gk15_wk[i] * h2);
      }
    }
    auto vals = values(nodes);
    double acc = 0.0;
    for (size_t i = 0; i < vals.size(); ++i)
      acc += weights[i] * vals[i] * vals[i];
    return acc;
  }

 private:
  double flat_value(double rho) const {
    double w = params_.omega;
    double t = 0.5 * w * rho * rho;
    double raw = std::pow(rho, m_ + 0.5) * std::exp(-0.25 * w * rho * rho) *
                 kummer_1f1_poly(n_, m_, t);
    return raw * scale_;
  }
  double envelope(double rho) const {
    return std::sqrt(std::sinh(rho / params_.a) / params_.a);
  }

  ModelParams params_;
  int m_ = 0, n_ = 0;
  EigenfunctionOptions opt_{};
  double energy_ = 0, lambda_ = 0, rho_max_ = 0;
  SingularConstants sc_{};
  double sign_ = 1.0, scale_ = 1.0, norm_residual_ = 0.0;
};

inline CurveSample eigenfunction(const CertifiedLevel& lvl,
                                 const ModelParams& params,
                                 const std::vector<double>& grid,
                                 EigenfunctionOptions opt = {}) {
  EigenfunctionEvaluator ev(lvl, params, opt);
  CurveSample out;
  out.grid = grid;
  out.values = ev.values(grid);
  out.label = "psi_{" + std::to_string(lvl.entry.n) + "," +
              std::to_string(lvl.entry.m) + "}";
  return out;
}

inline CurveSample eigenfunction(int n, int m, const ModelParams& params,
                                 const std::vector<double>& grid,
                                 SolveOptions sopts = {},
                                 EigenfunctionOptions opt = {}) {
  auto rep = partial_wave_eigenvalues_report(m, params, n + 1, sopts);
  return eigenfunction(rep.levels[size_t(n)], params, grid, opt);
}

// ---------------------------------------------------------------------------
// Flat-limit diagnostics.

// |E_{n,m}(a^2) - asymptotic_energy| along an increasing sequence of a
// values; certifies the O(1/a^4) remainder of the eigenvalue expansion.
inline CurveSample flat_limit_residual(int n, int m, double omega,
                                       const std::vector<double>& a_sequence,
                                       SolveOptions opts = {}) {
  CurveSample out;
  out.label = "flat_limit_residual";
  for (double a : a_sequence) {
    ModelParams params{a, omega};
    auto rep = partial_wave_eigenvalues_report(m, params, n + 1, opts);
    double e = rep.levels[size_t(n)].entry.energy;
    out.grid.push_back(a);
    out.values.push_back(std::abs(e - asymptotic_energy(n, m, params)));
  }
  return out;
}

}  // namespace qdot
