#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qdot/detail/ode.hpp"

// Classical special functions needed by the spheroidal machinery: digamma
// (real and complex), complex log-gamma, the Legendre function of the
// second kind Q^mu_nu(xi) on xi > 1 with integer order and complex degree,
// and the terminating Kummer function 1F1(-n, 1+m, t).

namespace qdot {

using cplx = std::complex<double>;
// extended precision for internally cancellation-heavy sums
using lcplx = std::complex<long double>;

inline constexpr double pi = std::numbers::pi;

struct PoleError : std::domain_error {
  using std::domain_error::domain_error;
};
struct DegenerateDegreeError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Bernoulli-number coefficients B_{2n}/(2n(2n-1)) for the Stirling series.
inline constexpr double stirling_coef[] = {
    1.0 / 12,        -1.0 / 360,       1.0 / 1260,      -1.0 / 1680,
    1.0 / 1188,      -691.0 / 360360,  1.0 / 156,       -3617.0 / 122400};

inline bool near_nonpositive_integer(const cplx& z, double tol = 1e-12) {
  if (std::abs(z.imag()) > tol) return false;
  double r = std::round(z.real());
  return r <= 0.5 && std::abs(z.real() - r) < tol;
}

// tan(pi z) without overflow for large |Im z| (sin and cos overflow
// separately while their ratio tends to +-i).
inline cplx tan_pi(cplx z) {
  using std::numbers::pi;
  double x = 2.0 * pi * z.real(), y = 2.0 * pi * z.imag();
  if (std::abs(y) > 700.0) return cplx(0.0, y > 0 ? 1.0 : -1.0);
  double den = std::cos(x) + std::cosh(y);
  return cplx(std::sin(x) / den, std::sinh(y) / den);
}

}  // namespace detail

// log Gamma(z), principal value up to 2*pi*i jumps (only ever consumed
// through exp of differences, so the branch does not matter).
inline cplx lgamma_c(cplx z) {
  if (detail::near_nonpositive_integer(z))
    throw PoleError("lgamma_c: pole at non-positive integer");
  if (z.real() < 0.5) {
    // reflection: log Gamma(z) = log(pi / sin(pi z)) - log Gamma(1 - z)
    return std::log(pi) - std::log(std::sin(pi * z)) - lgamma_c(1.0 - z);
  }
  cplx shift = 0.0;
  while (std::abs(z) < 15.0) {
    shift -= std::log(z);
    z += 1.0;
  }
  cplx w = 1.0 / (z * z);
  cplx s = detail::stirling_coef[7];
  for (int i = 6; i >= 0; --i) s = s * w + detail::stirling_coef[i];
  return (z - 0.5) * std::log(z) - z + 0.5 * std::log(2 * pi) + s / z + shift;
}

inline cplx digamma(cplx z) {
  if (detail::near_nonpositive_integer(z))
    throw PoleError("digamma: pole at non-positive integer");
  cplx shift = 0.0;
  if (z.real() < 0) {
    // Psi(z) = Psi(1-z) - pi*cot(pi*z)
    shift = -pi / std::tan(pi * z);
    z = 1.0 - z;
  }
  while (std::abs(z) < 12.0) {
    shift -= 1.0 / z;
    z += 1.0;
  }
  cplx w = 1.0 / (z * z);
  // Psi(z) ~ log z - 1/(2z) - sum B_{2n}/(2n) z^{-2n}
  static constexpr double c[] = {1.0 / 12,  -1.0 / 120,   1.0 / 252,
                                 -1.0 / 240, 1.0 / 132,   -691.0 / 32760,
                                 1.0 / 12};
  cplx s = c[6];
  for (int i = 5; i >= 0; --i) s = s * w + c[i];
  return std::log(z) - 0.5 / z - s * w + shift;
}

inline double digamma(double x) {
  if (x <= 0 && std::abs(x - std::round(x)) < 1e-12)
    throw PoleError("digamma: pole at non-positive integer");
  if (x < 0) return digamma(1.0 - x) - pi / std::tan(pi * x);
  double shift = 0;
  while (x < 12.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  double w = 1.0 / (x * x);
  static constexpr double c[] = {1.0 / 12,  -1.0 / 120,   1.0 / 252,
                                 -1.0 / 240, 1.0 / 132,   -691.0 / 32760,
                                 1.0 / 12};
  double s = c[6];
  for (int i = 5; i >= 0; --i) s = s * w + c[i];
  return std::log(x) - 0.5 / x - s * w + shift;
}

namespace detail {

// Gauss series for 2F1(a, b; c; x), real 0 <= x < 1.
inline cplx hyp2f1(cplx a, cplx b, cplx c, double x) {
  if (near_nonpositive_integer(c))
    throw DegenerateDegreeError("hyp2f1: c at non-positive integer");
  cplx term = 1.0, sum = 1.0;
  for (int k = 0; k < 2'000'000; ++k) {
    cplx ck = c + double(k);
    if (std::abs(ck) < 1e-13)
      throw DegenerateDegreeError("hyp2f1: c passes through pole");
    term *= (a + double(k)) * (b + double(k)) / (ck * double(k + 1)) * x;
    sum += term;
    if (std::abs(term) < 1e-17 * (std::abs(sum) + 1e-300) &&
        k > std::max(std::abs(a), std::abs(b)) * x)
      return sum;
  }
  throw ConvergenceError("hyp2f1: series did not converge");
}

}  // namespace detail

struct LegendreArgs {
  int mu;      // order, >= 0
  cplx nu;     // degree
  double xi;   // argument, > 1
};

namespace detail {

// Hypergeometric representation, reliable for 1/xi^2 <= ~0.92:
// Q^mu_nu(x) = (-1)^mu sqrt(pi) Gamma(nu+mu+1)/Gamma(nu+3/2)
//   (2x)^{-nu-1} x^{-mu} (x^2-1)^{mu/2}
//   2F1((nu+mu+1)/2, (nu+mu+2)/2; nu+3/2; x^{-2}).
inline cplx legendre_q_direct(int mu, cplx nu, double x) {
  cplx num = nu + double(mu) + 1.0;
  if (near_nonpositive_integer(num, 1e-10))
    throw DegenerateDegreeError("legendre_q: Gamma(nu+mu+1) pole");
  cplx lg = lgamma_c(num) - lgamma_c(nu + 1.5);
  cplx logpre = 0.5 * std::log(pi) + lg - (nu + 1.0) * std::log(2.0) -
                (nu + double(mu) + 1.0) * std::log(x) +
                0.5 * double(mu) * std::log(x * x - 1.0);
  cplx f = hyp2f1(0.5 * (nu + double(mu) + 1.0), 0.5 * (nu + double(mu) + 2.0),
                  nu + 1.5, 1.0 / (x * x));
  double sign = (mu % 2 == 0) ? 1.0 : -1.0;
  return sign * std::exp(logpre) * f;
}

// (xi^2-1) dQ/dxi = (nu-mu+1) Q^mu_{nu+1} - (nu+1) xi Q^mu_nu.
// The upward neighbour Q_{nu+1} is regular wherever Q_nu is, so this form
// introduces no extra Gamma poles (unlike the one involving Q_{nu-1}).
inline cplx legendre_q_prime_from_pair(int mu, cplx nu, double x, cplx q_nu,
                                       cplx q_nup1) {
  return ((nu - double(mu) + 1.0) * q_nup1 - (nu + 1.0) * x * q_nu) /
         (x * x - 1.0);
}

// Near xi = 1 the Gauss series degenerates; seed value and slope at a safe
// anchor and carry them down by integrating the Legendre equation.  The
// target solution grows toward the singular endpoint, so the inward
// direction is the stable one.
// Direct evaluation loses roughly exp(|Im nu| / (4 xi^2)) digits to series
// cancellation, so for conical-type degrees the seed must sit far enough out.
inline double legendre_q_safe_xi(cplx nu) {
  double ti = std::abs(nu.imag());
  return ti > 30.0 ? std::sqrt(ti / 46.0) : 1.0;
}

inline void legendre_q_ode(int mu, cplx nu, double x, cplx& q, cplx& qp) {
  const double anchor =
      std::max(1.05, std::sqrt(std::abs(nu.imag())) / 5.0);
  cplx qa = legendre_q_direct(mu, nu, anchor);
  cplx qap1 = legendre_q_direct(mu, nu + 1.0, anchor);
  cplx qpa = legendre_q_prime_from_pair(mu, nu, anchor, qa, qap1);
  StateVec<4> y;
  y.v = {qa.real(), qa.imag(), qpa.real(), qpa.imag()};
  auto rhs = [&](double t, const StateVec<4>& s) {
    cplx u(s.v[0], s.v[1]), up(s.v[2], s.v[3]);
    cplx upp = (2 * t * up -
                (nu * (nu + 1.0) - double(mu) * double(mu) / (1 - t * t)) * u) /
               (1 - t * t);
    StateVec<4> d;
    d.v = {up.real(), up.imag(), upp.real(), upp.imag()};
    return d;
  };
  y = ode_integrate<4>(rhs, y, anchor, x, 1e-13, 1e-300);
  q = cplx(y.v[0], y.v[1]);
  qp = cplx(y.v[2], y.v[3]);
}

}  // namespace detail

// Legendre function of the second kind on the real interval xi > 1,
// Hobson convention (real-valued for real degree; carries the (-1)^mu
// factor, so Q^m_nu ~ (-1)^m 2^{m/2-1} Gamma(m) (xi-1)^{-m/2} at xi -> 1+).
inline cplx legendre_q(const LegendreArgs& args) {
  if (!(args.xi > 1.0))
    throw std::domain_error("legendre_q: requires xi > 1");
  if (args.mu < 0) throw std::domain_error("legendre_q: requires mu >= 0");
  double inv2 = 1.0 / (args.xi * args.xi);
  if (inv2 <= 0.92 && args.xi >= detail::legendre_q_safe_xi(args.nu))
    return detail::legendre_q_direct(args.mu, args.nu, args.xi);
  cplx q, qp;
  detail::legendre_q_ode(args.mu, args.nu, args.xi, q, qp);
  return q;
}

// Value and first derivative in one call (used by the series decomposition).
inline void legendre_q_pair(const LegendreArgs& args, cplx& q, cplx& qprime) {
  if (!(args.xi > 1.0))
    throw std::domain_error("legendre_q_pair: requires xi > 1");
  double inv2 = 1.0 / (args.xi * args.xi);
  if (inv2 <= 0.92 && args.xi >= detail::legendre_q_safe_xi(args.nu)) {
    q = detail::legendre_q_direct(args.mu, args.nu, args.xi);
    cplx qp1 = detail::legendre_q_direct(args.mu, args.nu + 1.0, args.xi);
    qprime = detail::legendre_q_prime_from_pair(args.mu, args.nu, args.xi, q,
                                                qp1);
  } else {
    detail::legendre_q_ode(args.mu, args.nu, args.xi, q, qprime);
  }
}

// Values Q^mu_{deg0+k}(xi) for k = 0..count-1 along a unit-step degree
// ladder.  The hypergeometric representation cancels catastrophically for
// large |deg| when xi is close to 1; since Q is the minimal solution of the
// degree recurrence as deg -> +inf (and the dominant one as deg -> -inf), a
// single backward sweep started well above the ladder (Miller's method) is
// stable over the whole range.  The sweep is normalized against one direct
// evaluation at the smallest-|deg| ladder point.
//
// The sweep and the normalization run in extended precision: downstream
// series over the ladder cancel by many orders of magnitude near xi = 1,
// so the per-entry summation noise — not the double rounding of the final
// values — is what limits the client's accuracy.
inline std::vector<lcplx> legendre_q_degree_ladder_ext(int mu, cplx deg0,
                                                       int count, double xi) {
  if (!(xi > 1.0))
    throw std::domain_error("legendre_q_degree_ladder: requires xi > 1");
  if (count < 1) return {};
  const double eta = std::log(xi + std::sqrt(xi * xi - 1.0));
  // seed error decays like e^{-2 eta} per step
  const int extra = int(std::ceil(22.0 / eta)) + 12;
  const int top = count - 1 + extra;

  std::vector<lcplx> vals(static_cast<size_t>(count));
  std::vector<long double> lsc(static_cast<size_t>(count));
  lcplx q_hi = 0.0L, q_lo = 1.0L;  // degrees deg0 + (k+1), deg0 + k
  long double lscale = 0.0L;
  const long double lxi = xi;
  for (int k = top; k >= 0; --k) {
    if (k < count) {
      vals[size_t(k)] = q_lo;
      lsc[size_t(k)] = lscale;
    }
    if (k == 0) break;
    cplx d = deg0 + double(k);
    if (std::abs(d + double(mu)) < 1e-8)
      throw DegenerateDegreeError(
          "legendre_q_degree_ladder: integer-degree pole in sweep");
    lcplx ld(d.real(), d.imag());
    lcplx next = ((2.0L * ld + 1.0L) * lxi * q_lo -
                  (ld - (long double)mu + 1.0L) * q_hi) /
                 (ld + (long double)mu);
    q_hi = q_lo;
    q_lo = next;
    long double m = std::max(std::abs(q_lo.real()), std::abs(q_lo.imag()));
    if (m > 1e250L) {
      q_lo /= m;
      q_hi /= m;
      lscale += std::log(m);
    }
  }

  // anchor at the ladder degree closest to -1/2, away from Gamma poles
  int ka = 0;
  double best = 1e300;
  for (int k = 0; k < count; ++k) {
    cplx d = deg0 + double(k);
    double score = std::abs(d + 0.5);
    if (detail::near_nonpositive_integer(d + double(mu) + 1.0, 0.05) ||
        std::abs(vals[size_t(k)]) < 1e-200L)
      score += 1e6;
    if (score < best) {
      best = score;
      ka = k;
    }
  }
  cplx q_anchor = legendre_q({mu, deg0 + double(ka), xi});
  lcplx ratio = lcplx(q_anchor.real(), q_anchor.imag()) / vals[size_t(ka)];
  std::vector<lcplx> out(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    long double e = lsc[size_t(k)] - lsc[size_t(ka)];
    // entries far above the anchor may underflow; that is their true scale
    out[size_t(k)] = vals[size_t(k)] * ratio * std::exp(e);
  }
  return out;
}

inline std::vector<cplx> legendre_q_degree_ladder(int mu, cplx deg0, int count,
                                                  double xi) {
  auto ext = legendre_q_degree_ladder_ext(mu, deg0, count, xi);
  std::vector<cplx> out(ext.size());
  for (size_t k = 0; k < ext.size(); ++k)
    out[k] = cplx(double(ext[k].real()), double(ext[k].imag()));
  return out;
}

// Terminating Kummer function 1F1(-n, 1+m, t) = sum_k (-n)_k t^k/((1+m)_k k!).
inline double kummer_1f1_poly(int n, int m, double t) {
  if (n < 0 || m < 0)
    throw std::domain_error("kummer_1f1_poly: requires n, m >= 0");
  // build the coefficients, then a Horner evaluation
  double coef = 1.0, sum = 1.0, tp = 1.0;
  double c = 0.0;  // compensated summation
  for (int k = 1; k <= n; ++k) {
    coef *= double(-(n - k + 1)) / (double(m + k) * k);
    tp *= t;
    double term = coef * tp - c;
    double s = sum + term;
    c = (s - sum) - term;
    sum = s;
  }
  return sum;
}

}  // namespace qdot
