#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qdot/detail/ode.hpp"
#include "qdot/specfun.hpp"

// Spheroidal-function engine: eigenvalue lambda^m_nu(theta) of the
// three-term coefficient recurrence, expansion coefficients a^m_{nu,r},
// the sums s^m_nu and Psi-s_nu, Legendre-series functions Qs^m_nu(xi),
// the radial solution of the third kind (square integrable at infinity),
// and the joining factors K^m_nu entering the eigenvalue condition.

namespace qdot {

// Characteristic exponent restricted to the loci on which the spheroidal
// eigenvalue stays real: the real axis, the critical line nu = -1/2 + i t,
// and the lattice arcs nu = (k - 1/2) + i s rising from the half-integer
// double points (they carry the spectral-gap intervals of the real-axis
// band structure).
struct NuPoint {
  enum class Family { RealAxis, CriticalLine, LatticeArc };
  Family family;
  double parameter;    // nu itself, t on the critical line, s on an arc
  double anchor = 0.0; // Re(nu) on a lattice arc (a half-integer)

  static NuPoint real_axis(double nu) { return {Family::RealAxis, nu}; }
  static NuPoint critical_line(double t) {
    return {Family::CriticalLine, t};
  }
  static NuPoint lattice_arc(double re, double s) {
    return {Family::LatticeArc, s, re};
  }

  cplx value() const {
    switch (family) {
      case Family::RealAxis: return cplx(parameter, 0.0);
      case Family::CriticalLine: return cplx(-0.5, parameter);
      default: return cplx(anchor, parameter);
    }
  }
  // the partner exponent -nu-1 (conjugate point on the critical line)
  cplx reflected_value() const { return -value() - 1.0; }

  // distance to the excluded half-integer lattice {-1/2 + k}
  double lattice_distance() const {
    if (family != Family::RealAxis) return std::abs(parameter);
    double u = parameter + 0.5;
    return std::abs(u - std::round(u));
  }
};

struct SpheroidalParams {
  int m = 0;           // angular momentum; the equation uses mu = |m|
  double theta = 0.0;  // theta = -a^4 omega^2 / 16, <= 0 for physical input
  NuPoint nu{NuPoint::Family::RealAxis, 0.0};

  int mu() const { return std::abs(m); }
  void validate() const {
    if (theta > 0)
      throw std::domain_error("SpheroidalParams: theta must be <= 0");
    if (nu.lattice_distance() < 1e-6)
      throw std::domain_error(
          "SpheroidalParams: nu too close to the half-integer lattice; "
          "step past it");
    if (nu.family == NuPoint::Family::CriticalLine && nu.parameter < 0)
      throw std::domain_error("SpheroidalParams: critical-line t must be >= 0");
    if (nu.family == NuPoint::Family::LatticeArc) {
      if (nu.parameter <= 0)
        throw std::domain_error("SpheroidalParams: arc height must be > 0");
      double u = nu.anchor + 0.5;
      if (std::abs(u - std::round(u)) > 1e-12)
        throw std::domain_error(
            "SpheroidalParams: arc anchor must be a half-integer");
    }
  }
};

namespace detail {

// Coefficients of the three-term recurrence
//   beta_r a_{r-1} + alpha_r a_r + gamma_r a_{r+1} = lambda a_r,   n = nu+2r,
// obtained by inserting the series sum_r (-1)^r a_r Q^mu_{nu+2r} into the
// spheroidal equation and using the xi-multiplication recurrence of the
// Legendre functions.
inline cplx rec_beta(int mu, double theta, cplx n) {
  return -4.0 * theta * (n - double(mu) - 1.0) * (n - double(mu)) /
         ((2.0 * n - 3.0) * (2.0 * n - 1.0));
}
inline cplx rec_gamma(int mu, double theta, cplx n) {
  return -4.0 * theta * (n + double(mu) + 1.0) * (n + double(mu) + 2.0) /
         ((2.0 * n + 3.0) * (2.0 * n + 5.0));
}
inline cplx rec_alpha(int mu, double theta, cplx n) {
  cplx w1 = (n - double(mu) + 1.0) * (n + double(mu) + 1.0) /
            ((2.0 * n + 1.0) * (2.0 * n + 3.0));
  cplx w2 = (n + double(mu)) * (n - double(mu)) /
            ((2.0 * n + 1.0) * (2.0 * n - 1.0));
  return n * (n + 1.0) - 4.0 * theta + 4.0 * theta * (w1 + w2);
}

// Continued-fraction tails of the minimal solution.
// x_1 = a_1/a_0 from the +r side, t_1 = a_{-1}/a_0 from the -r side.
inline cplx cf_plus(int mu, double theta, cplx nu, cplx lambda, int depth) {
  cplx x = 0.0;
  for (int r = depth; r >= 1; --r) {
    cplx n = nu + 2.0 * r;
    x = -rec_beta(mu, theta, n) /
        (rec_alpha(mu, theta, n) - lambda + rec_gamma(mu, theta, n) * x);
  }
  return x;
}
inline cplx cf_minus(int mu, double theta, cplx nu, cplx lambda, int depth) {
  cplx t = 0.0;
  for (int r = depth; r >= 1; --r) {
    cplx n = nu - 2.0 * r;
    t = -rec_gamma(mu, theta, n) /
        (rec_alpha(mu, theta, n) - lambda + rec_beta(mu, theta, n) * t);
  }
  return t;
}

// Matching function whose zero (in lambda) is the eigenvalue:
//   F(lambda) = alpha_0 - lambda + gamma_0 x_1 + beta_0 t_1.
inline cplx lambda_match(int mu, double theta, cplx nu, cplx lambda,
                         int depth) {
  cplx n = nu;
  return rec_alpha(mu, theta, n) - lambda +
         rec_gamma(mu, theta, n) * cf_plus(mu, theta, nu, lambda, depth) +
         rec_beta(mu, theta, n) * cf_minus(mu, theta, nu, lambda, depth);
}

inline int cf_depth(double theta, cplx nu) {
  double t = std::abs(nu.imag());
  return 60 + int(std::ceil(std::sqrt(4.0 * std::abs(theta) + t * t)));
}

// On both families the matching function is real for real lambda: on the
// real axis everything is manifestly real, and on the critical line the
// two continued-fraction tails are complex conjugates of each other while
// alpha_0 is real by the nu -> -nu-1 symmetry.
inline double lambda_match_real(int mu, double theta, cplx nu, double lambda,
                                int depth) {
  return lambda_match(mu, theta, nu, cplx(lambda, 0.0), depth).real();
}

// Secant iteration on lambda_match from a given guess.
inline std::optional<cplx> lambda_secant(int mu, double theta, cplx nu,
                                         cplx guess, int depth) {
  cplx l0 = guess;
  cplx l1 = guess + 1e-5 * (std::abs(guess) + 1.0);
  cplx f0 = lambda_match(mu, theta, nu, l0, depth);
  cplx f1 = lambda_match(mu, theta, nu, l1, depth);
  for (int it = 0; it < 80; ++it) {
    cplx denom = f1 - f0;
    if (std::abs(denom) == 0.0) return std::nullopt;
    cplx l2 = l1 - f1 * (l1 - l0) / denom;
    l0 = l1; f0 = f1;
    l1 = l2; f1 = lambda_match(mu, theta, nu, l1, depth);
    if (std::abs(l1 - l0) < 1e-13 * (std::abs(l1) + 1.0)) return l1;
  }
  return std::nullopt;
}

// Real zero of the matching function closest to `guess`.  Scans expanding
// windows for sign changes and polishes them by bisection; bisection limits
// ending up on a continued-fraction pole are rejected by a residual check.
// Characteristic function of the truncated doubly infinite tridiagonal
// system: det(T_W - lambda) computed by the principal-minor recurrence,
// rescaled to avoid overflow (the rescaling is positive, so sign changes in
// lambda are preserved).  Unlike the continued-fraction matching function
// this has no poles, which makes real-eigenvalue scans robust near the
// half-integer lattice where the matching function degenerates into
// near-cancelling pole/zero pairs.
inline double tridiag_det_scaled(int mu, double theta, double nu, double lam,
                                 int W) {
  double pm1 = 0.0, p = 1.0;
  for (int r = -W; r <= W; ++r) {
    double n = nu + 2.0 * r;
    double a = rec_alpha(mu, theta, cplx(n, 0)).real();
    double next = (a - lam) * p;
    if (r > -W) {
      double prod = rec_beta(mu, theta, cplx(n, 0)).real() *
                    rec_gamma(mu, theta, cplx(n - 2.0, 0)).real();
      next -= prod * pm1;
    }
    pm1 = p;
    p = next;
    double m = std::max(std::abs(p), std::abs(pm1));
    if (m > 1e120) {
      p /= m;
      pm1 /= m;
    }
  }
  return p;
}

// Real-eigenvalue scan for real-axis nu built on the determinant above.
// Close pairs of real eigenvalues produce no net sign change over a coarse
// step, so intervals whose midpoint magnitude dips far below both
// neighbours are refined as well.
inline std::optional<double> nearest_real_eig_det(int mu, double theta,
                                                  double nu, double guess,
                                                  int W) {
  auto fd = [&](double lam) { return tridiag_det_scaled(mu, theta, nu, lam, W); };
  auto fd2 = [&](double lam) {
    return tridiag_det_scaled(mu, theta, nu, lam, W + 40);
  };
  std::optional<double> best;
  auto bisect = [](auto&& f, double a, double b, double fa, double fb) {
    for (int it = 0; it < 200 && b - a > 1e-14 * (std::abs(a) + 1.0); ++it) {
      double mid = 0.5 * (a + b), fm = f(mid);
      if (fa * fm <= 0.0) {
        b = mid; fb = fm;
      } else {
        a = mid; fa = fm;
      }
    }
    return 0.5 * (a + b);
  };
  auto consider = [&](double a, double b, double fa, double fb) {
    double root = bisect(fd, a, b, fa, fb);
    // certify against a deeper truncation: re-solve in a small bracket
    double w = std::max(1e-7, 1e-7 * std::abs(root));
    double la = root - w, lb = root + w;
    double fla = fd2(la), flb = fd2(lb);
    if (fla * flb > 0.0) return;  // not stable under truncation doubling
    double root2 = bisect(fd2, la, lb, fla, flb);
    if (std::abs(root2 - root) > 1e-8 * (1.0 + std::abs(root))) return;
    if (!best || std::abs(root2 - guess) < std::abs(*best - guess))
      best = root2;
  };
  // flag an interval for refinement when its endpoints flip sign or when
  // the magnitude dips far below both outer neighbours (a close pair of
  // real zeros with no net sign change)
  auto flagged = [](const double* f, int i, int n) {
    if (f[i] * f[i + 1] < 0.0) return true;
    int il = std::max(0, i - 1), ir = std::min(n, i + 2);
    double outer = std::min(std::abs(f[il]), std::abs(f[ir]));
    return std::abs(f[i]) < 0.05 * outer || std::abs(f[i + 1]) < 0.05 * outer;
  };
  // refine a flagged interval
  auto scan = [&](auto&& self, double a, double b, double fa, double fb,
                  int level) -> void {
    if (fa * fb < 0.0 &&
        (level == 0 || b - a < 1e-13 * (1.0 + std::abs(a)))) {
      consider(a, b, fa, fb);
      return;
    }
    if (level == 0) return;
    const int sub = 8;
    double xs[sub + 1], fs[sub + 1];
    for (int i = 0; i <= sub; ++i) {
      xs[i] = (i == 0) ? a : (i == sub ? b : a + (b - a) * i / sub);
      fs[i] = (i == 0) ? fa : (i == sub ? fb : fd(xs[i]));
    }
    for (int i = 0; i < sub; ++i)
      if (flagged(fs, i, sub))
        self(self, xs[i], xs[i + 1], fs[i], fs[i + 1], level - 1);
  };
  for (double radius = 1.0; radius <= 4096.0 * (1.0 + std::abs(guess));
       radius *= 2.0) {
    const int n = 1024;
    double lo = guess - radius, hi = guess + radius;
    std::vector<double> xs(n + 1), fs(n + 1);
    for (int i = 0; i <= n; ++i) {
      xs[size_t(i)] = lo + (hi - lo) * i / n;
      fs[size_t(i)] = fd(xs[size_t(i)]);
    }
    for (int i = 0; i < n; ++i)
      if (flagged(fs.data(), i, n))
        scan(scan, xs[size_t(i)], xs[size_t(i + 1)], fs[size_t(i)],
             fs[size_t(i + 1)], 6);
    if (best) return best;
  }
  return best;
}

// Locate the real zero of the matching function closest to `guess`.  The
// matching function has simple poles, and a pole and a genuine zero can sit
// arbitrarily close together (near-defective pairs); such a pair produces
// no net sign change over a coarse step, so intervals are also refined
// whenever the magnitude jumps sharply, which flags a hidden pole.
inline std::optional<double> nearest_real_zero(int mu, double theta, cplx nu,
                                               double guess, int depth) {
  if (nu.imag() == 0.0)
    return nearest_real_eig_det(mu, theta, nu.real(), guess, depth);
  auto fr = [&](double lam) {
    return lambda_match_real(mu, theta, nu, lam, depth);
  };
  std::optional<double> best;
  auto is_zero = [&](double root) {
    return std::abs(fr(root)) < 1e-5 * (1.0 + std::abs(root));
  };
  auto consider = [&](double root) {
    if (is_zero(root) &&
        (!best || std::abs(root - guess) < std::abs(*best - guess)))
      best = root;
  };
  // resolve a sign change to its crossing point; returns it unclassified
  auto bisect = [&](double a, double b, double fa, double fb) {
    for (int it = 0; it < 200 && b - a > 1e-14 * (std::abs(a) + 1.0); ++it) {
      double mid = 0.5 * (a + b), fm = fr(mid);
      if (fa * fm <= 0.0) {
        b = mid; fb = fm;
      } else {
        a = mid; fa = fm;
      }
    }
    return 0.5 * (a + b);
  };
  // a pole can hide a companion zero arbitrarily close by; probe both sides
  // at geometrically shrinking offsets and resolve any sign change found
  // strictly on one side of the pole
  auto companion = [&](double p, double w) {
    for (int side = -1; side <= 1; side += 2) {
      double eprev = w, fprev = fr(p + side * eprev);
      for (int k = 1; k <= 48; ++k) {
        double e = eprev * 0.5;
        double f = fr(p + side * e);
        if (fprev * f < 0.0) {
          double a = std::min(p + side * e, p + side * eprev);
          double b = std::max(p + side * e, p + side * eprev);
          consider(bisect(a, b, fr(a), fr(b)));
        }
        eprev = e;
        fprev = f;
      }
    }
  };
  auto resolve = [&](double a, double b, double fa, double fb) {
    double root = bisect(a, b, fa, fb);
    if (is_zero(root))
      consider(root);
    else
      companion(root, std::max(b - a, 64.0 * 1e-14 * (1.0 + std::abs(root))));
  };
  // recursive refinement: subdivide on sign change or magnitude jump (the
  // latter flags poles whose net sign change cancelled against a zero)
  auto scan = [&](auto&& self, double a, double b, double fa, double fb,
                  int level) -> void {
    bool flip = fa * fb < 0.0;
    double ra = std::abs(fa), rb = std::abs(fb);
    bool jump = std::max(ra, rb) > 8.0 * (std::min(ra, rb) + 1e-12);
    if (!flip && !jump) return;
    if (level == 0) {
      if (flip) resolve(a, b, fa, fb);
      return;
    }
    const int sub = 8;
    double xprev = a, fprev = fa;
    for (int i = 1; i <= sub; ++i) {
      double x = (i == sub) ? b : a + (b - a) * i / sub;
      double f = (i == sub) ? fb : fr(x);
      if (f == 0.0) consider(x);
      self(self, xprev, x, fprev, f, level - 1);
      xprev = x;
      fprev = f;
    }
  };
  for (double radius = 1.0; radius <= 4096.0 * (1.0 + std::abs(guess));
       radius *= 2.0) {
    const int n = 512;
    double lo = guess - radius, hi = guess + radius;
    double xprev = lo, fprev = fr(lo);
    for (int i = 1; i <= n; ++i) {
      double x = lo + (hi - lo) * i / n;
      double f = fr(x);
      if (f == 0.0) consider(x);
      scan(scan, xprev, x, fprev, f, 4);
      xprev = x;
      fprev = f;
    }
    if (best) return best;
  }
  return best;
}

}  // namespace detail

struct BranchTrackingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Eigenvalue of the doubly infinite tridiagonal system on the branch
// continued from lambda = nu(nu+1) at theta = 0, tracked by a homotopy in
// theta with secant correction at every step.  The continuation can leave
// the real axis: for real-axis nu two neighbouring branches may collide at
// some intermediate theta and re-emerge as a complex-conjugate pair.  The
// returned value is kept real in that case by projecting onto the nearest
// real eigenvalue of the recurrence (the adjacent real branch); the
// full-pipeline consumers never rely on these windows because they
// parametrize by lambda and invert for nu instead (see nu_from_lambda).
// An optional hint (from an adjacent scan point) skips the homotopy.
inline double lambda_eig(const SpheroidalParams& p,
                         std::optional<double> hint = std::nullopt) {
  p.validate();
  const int mu = p.mu();
  const cplx nu = p.nu.value();
  const int depth = detail::cf_depth(p.theta, nu);
  const cplx lambda0 = nu * (nu + 1.0);  // exact at theta = 0

  auto realize = [&](cplx lam) -> double {
    if (std::abs(lam.imag()) > 1e-10 * std::max(1.0, std::abs(lam.real()))) {
      auto real_root =
          detail::nearest_real_zero(mu, p.theta, nu, lam.real(), depth);
      if (!real_root)
        throw ConvergenceError("lambda_eig: no real eigenvalue located");
      lam = cplx(*real_root, 0.0);
    }
    // verify against a deeper continued fraction
    cplx check = detail::lambda_secant(mu, p.theta, nu, lam, 2 * depth)
                     .value_or(lam);
    if (std::abs(check - lam) > 1e-9 * (std::abs(lam) + 1.0))
      throw ConvergenceError("lambda_eig: truncation not converged");
    if (std::abs(check.imag()) > 1e-10 * std::max(1.0, std::abs(check.real())))
      throw ConvergenceError("lambda_eig: residual imaginary part");
    return check.real();
  };

  if (p.theta == 0.0) return lambda0.real();

  if (hint) {
    auto lam = detail::lambda_secant(mu, p.theta, nu, cplx(*hint, 0), depth);
    if (lam && std::abs(lam->imag()) < 1e-8 * (1.0 + std::abs(*hint)) &&
        std::abs(*lam - cplx(*hint, 0)) <
            std::max(2.0, 0.05 * std::abs(*hint)))
      return realize(*lam);
  }

  // homotopy in theta from 0 to the target
  double th = 0.0;
  double dth = p.theta / 8.0;
  cplx lam = lambda0, lam_prev = lambda0;
  double th_prev = 0.0;
  int steps = 0;
  while (th > p.theta) {
    if (++steps > 20000)
      throw BranchTrackingError("lambda_eig: homotopy step limit");
    double th_next = std::max(p.theta, th + dth);
    // linear prediction along the path
    cplx pred = lam;
    if (th != th_prev)
      pred = lam + (lam - lam_prev) * ((th_next - th) / (th - th_prev));
    auto trial = detail::lambda_secant(mu, th_next, nu, pred, depth);
    double allowed = std::max(2.0, 0.25 * (std::abs(pred - lam) + 1.0) +
                                       0.02 * std::abs(pred));
    if (!trial || std::abs(*trial - pred) > allowed) {
      dth *= 0.5;
      if (std::abs(dth) < 1e-12 * std::abs(p.theta)) {
        // branches too entangled to follow; settle for the nearest real
        // eigenvalue around the last confirmed position
        auto rr =
            detail::nearest_real_zero(mu, p.theta, nu, lam.real(), depth);
        if (rr) return realize(cplx(*rr, 0.0));
        throw BranchTrackingError(
            "lambda_eig: homotopy cannot separate branches");
      }
      continue;
    }
    lam_prev = lam; th_prev = th;
    lam = *trial; th = th_next;
    dth *= 1.7;
    if (std::abs(dth) > std::abs(p.theta) / 4) dth = p.theta / 4;
  }
  return realize(lam);
}

// Truncated two-sided coefficient sequence a^m_{nu,r}, r in [r_min, r_max],
// normalized to a_{nu,0} = 1.
struct CoefficientTable {
  SpheroidalParams params;
  double lambda = 0.0;
  int r_min = 0, r_max = 0;
  std::vector<cplx> values;  // index r - r_min
  double tail_estimate = 0.0;
  double max_residual = 0.0;

  const cplx& at(int r) const { return values[size_t(r - r_min)]; }
  cplx reflected_at(int r) const {
    // a^m_{-nu-1,r} = a^m_{nu,-r}
    return at(-r);
  }
};

// Coefficient table for a known eigenpair (nu, lambda).  The recurrence
// residual check at the end certifies that lambda really is the eigenvalue
// belonging to this exponent.
inline CoefficientTable coefficient_table_at(const SpheroidalParams& p,
                                             double lambda) {
  p.validate();
  const int mu = p.mu();
  const cplx nu = p.nu.value();
  CoefficientTable tab;
  tab.params = p;
  tab.lambda = lambda;
  if (p.theta == 0.0) {
    tab.r_min = tab.r_max = 0;
    tab.values = {1.0};
    return tab;
  }
  int depth = detail::cf_depth(p.theta, nu);
retry:
  // ratios a_r / a_{r-1} on the +side, a_{-r} / a_{-r+1} on the -side
  std::vector<cplx> xp(depth + 1), xm(depth + 1);
  {
    cplx x = 0.0;
    for (int r = depth; r >= 1; --r) {
      cplx n = nu + 2.0 * r;
      x = -detail::rec_beta(mu, p.theta, n) /
          (detail::rec_alpha(mu, p.theta, n) - lambda +
           detail::rec_gamma(mu, p.theta, n) * x);
      xp[size_t(r)] = x;
    }
    cplx t = 0.0;
    for (int r = depth; r >= 1; --r) {
      cplx n = nu - 2.0 * r;
      t = -detail::rec_gamma(mu, p.theta, n) /
          (detail::rec_alpha(mu, p.theta, n) - lambda +
           detail::rec_beta(mu, p.theta, n) * t);
      xm[size_t(r)] = t;
    }
  }
  // accumulate values until they fall below 1e-20 of the maximum
  std::vector<cplx> plus{1.0}, minus;
  cplx acc = 1.0;
  for (int r = 1; r <= depth; ++r) {
    acc *= xp[size_t(r)];
    plus.push_back(acc);
    if (std::abs(acc) < 1e-22) break;
  }
  acc = 1.0;
  for (int r = 1; r <= depth; ++r) {
    acc *= xm[size_t(r)];
    minus.push_back(acc);
    if (std::abs(acc) < 1e-22) break;
  }
  tab.r_min = -int(minus.size());
  tab.r_max = int(plus.size()) - 1;
  tab.values.resize(size_t(tab.r_max - tab.r_min + 1));
  for (int r = tab.r_min; r < 0; ++r)
    tab.values[size_t(r - tab.r_min)] = minus[size_t(-r - 1)];
  for (int r = 0; r <= tab.r_max; ++r)
    tab.values[size_t(r - tab.r_min)] = plus[size_t(r)];

  double amax = 0;
  for (auto& v : tab.values) amax = std::max(amax, std::abs(v));
  tab.tail_estimate =
      std::max(std::abs(tab.values.front()), std::abs(tab.values.back())) /
      amax;
  if (tab.tail_estimate > 1e-15 && depth < (1 << 16)) {
    depth *= 2;
    tab.values.clear();
    tab.max_residual = 0;
    goto retry;
  }
  if (tab.tail_estimate > 1e-14)
    throw ConvergenceError("coefficient_table: tails not converged");

  // recurrence residual at every interior r; the allowance term accounts
  // for the conditioning limit of the exponent itself: nu is resolved to
  // ~1e-14 relative, which moves alpha(nu + 2r) by |2n+1| ulps of nu
  for (int r = tab.r_min + 1; r < tab.r_max; ++r) {
    cplx n = nu + 2.0 * r;
    cplx res = detail::rec_beta(mu, p.theta, n) * tab.at(r - 1) +
               (detail::rec_alpha(mu, p.theta, n) - lambda) * tab.at(r) +
               detail::rec_gamma(mu, p.theta, n) * tab.at(r + 1);
    double scale = std::abs(detail::rec_alpha(mu, p.theta, n) - lambda) *
                       std::abs(tab.at(r)) +
                   std::abs(tab.at(r - 1)) + std::abs(tab.at(r + 1)) + 1e-300;
    double allow = std::abs(2.0 * n + 1.0) * 3e-14 * (std::abs(nu) + 1.0) *
                   std::abs(tab.at(r));
    tab.max_residual = std::max(
        tab.max_residual, std::max(0.0, std::abs(res) - allow) / scale);
  }
  if (tab.max_residual > 1e-8)
    throw ConvergenceError("coefficient_table: recurrence residual too large");
  return tab;
}

inline CoefficientTable coefficient_table(const SpheroidalParams& p,
                                          std::optional<double> lambda_hint =
                                              std::nullopt) {
  return coefficient_table_at(p, lambda_eig(p, lambda_hint));
}

// Inverse of the eigenvalue map at fixed theta: find the family point nu
// whose spheroidal eigenvalue equals the given real lambda.  The critical
// line is tried first (it carries every lambda below the family junction);
// failing that, the real-axis arcs over the fundamental domain
// nu in (-1/2, 1/2] are scanned.  Throws if neither family matches --
// deep in the discrete-well region the real-eigenvalue arcs leave gaps.
inline NuPoint nu_from_lambda(int m, double theta, double lambda,
                              std::optional<double> t_hint = std::nullopt) {
  const int mu = std::abs(m);
  if (theta > 0) throw std::domain_error("nu_from_lambda: theta must be <= 0");
  if (theta == 0.0) {
    // lambda = nu(nu+1): critical line for lambda < -1/4, else real axis
    if (lambda < -0.25) return NuPoint::critical_line(std::sqrt(-lambda - 0.25));
    return NuPoint::real_axis(-0.5 + std::sqrt(lambda + 0.25));
  }
  const int depth = detail::cf_depth(theta, cplx(-0.5, 1.0));
  const double t_floor = 2e-6;

  auto fr_t = [&](double t) {
    return detail::lambda_match_real(mu, theta, cplx(-0.5, t), lambda, depth);
  };
  auto polish = [&](auto f, double a, double b, double fa, double fb)
      -> std::optional<double> {
    for (int it = 0; it < 200 && b - a > 1e-14 * (std::abs(a) + 1.0); ++it) {
      double mid = 0.5 * (a + b), fm = f(mid);
      if (fa * fm <= 0.0) { b = mid; fb = fm; } else { a = mid; fa = fm; }
    }
    double root = 0.5 * (a + b);
    if (std::abs(f(root)) < 1e-5 * (1.0 + std::abs(lambda)))
      return root;
    return std::nullopt;  // pole, not a zero
  };

  // critical line: the principal arc is monotone in t, so a modest scan
  // around the asymptotic estimate suffices
  {
    double t_est = std::sqrt(std::max(0.0, -lambda - 0.25 - 2.0 * theta));
    std::vector<std::pair<double, double>> windows;
    if (t_hint && *t_hint > 0)
      windows.push_back({std::max(t_floor, 0.8 * *t_hint), 1.25 * *t_hint + 0.1});
    windows.push_back({t_floor, std::max(2.0 * t_est + 2.0, 4.0)});
    windows.push_back({t_floor, 8.0 * t_est + 64.0});
    for (auto [lo, hi] : windows) {
      const int n = 700;
      double xprev = lo, fprev = fr_t(lo);
      for (int i = 1; i <= n; ++i) {
        double x = lo + (hi - lo) * i / n;
        double f = fr_t(x);
        if (fprev * f < 0.0) {
          if (auto r = polish(fr_t, xprev, x, fprev, f))
            if (*r >= t_floor) return NuPoint::critical_line(*r);
        }
        xprev = x; fprev = f;
      }
    }
  }

  // real-axis arcs, scanned unreduced: the matching function can miss an
  // eigenvalue at a shifted representative (eigenvector node at r = 0), so
  // nu is searched directly up to the lambda-implied bound
  {
    auto fr_nu = [&](double v) {
      return detail::lambda_match_real(mu, theta, cplx(v, 0.0), lambda, depth);
    };
    const double edge = 1e-5;
    double lo = -0.5 + edge;
    double hi = std::sqrt(std::max(lambda + 0.25 - 2.0 * theta, 1.0)) + 0.5;
    const int n = std::max(1400, int(300.0 * (hi - lo)));
    double xprev = lo, fprev = fr_nu(lo);
    for (int i = 1; i <= n; ++i) {
      double x = lo + (hi - lo) * i / n;
      double f = fr_nu(x);
      if (fprev * f < 0.0) {
        if (auto r = polish(fr_nu, xprev, x, fprev, f)) {
          NuPoint cand = NuPoint::real_axis(*r);
          // a root pinned onto a half-integer double point is a degenerate
          // representative; keep scanning for a usable one
          if (cand.lattice_distance() >= 2e-6) return cand;
        }
      }
      xprev = x; fprev = f;
    }
  }

  // lattice arcs: gap intervals of the real-axis band structure live on
  // nu = 1/2 + i s (the half-integer anchor of the fundamental domain)
  {
    auto fr_s = [&](double s) {
      return detail::lambda_match_real(mu, theta, cplx(0.5, s), lambda, depth);
    };
    const double s_floor = 1e-6;
    double s_top = 2.0 + std::sqrt(std::abs(theta));
    const int n = 1400;
    double xprev = s_floor, fprev = fr_s(s_floor);
    for (int i = 1; i <= n; ++i) {
      double x = s_floor + (s_top - s_floor) * i / n;
      double f = fr_s(x);
      if (fprev * f < 0.0) {
        if (auto r = polish(fr_s, xprev, x, fprev, f))
          if (*r >= s_floor) return NuPoint::lattice_arc(0.5, *r);
      }
      xprev = x; fprev = f;
    }
  }
  throw ConvergenceError(
      "nu_from_lambda: no family point found (lambda in an arc gap)");
}

// (s^m_nu)^{-1} = sum_r (-1)^r a_r.  Summed from both truncation ends inward.
inline cplx s_sum_inverse(const CoefficientTable& tab) {
  cplx lo = 0.0, hi = 0.0;
  for (int r = tab.r_min; r < 0; ++r)
    lo += (r % 2 == 0 ? 1.0 : -1.0) * tab.at(r);
  for (int r = tab.r_max; r >= 0; --r)
    hi += (r % 2 == 0 ? 1.0 : -1.0) * tab.at(r);
  return lo + hi;
}

inline cplx s_sum(const CoefficientTable& tab) {
  cplx inv = s_sum_inverse(tab);
  double scale = 0;
  for (auto& v : tab.values) scale = std::max(scale, std::abs(v));
  if (std::abs(inv) < 1e-12 * scale)
    throw ConvergenceError("s_sum: vanishing alternating sum");
  return 1.0 / inv;
}

// Psi-s_nu = sum_r (-1)^r a^0_{nu,r} Psi(nu+1+2r), m = 0 only.
inline cplx psi_s_sum(const CoefficientTable& tab) {
  if (tab.params.mu() != 0)
    throw std::domain_error("psi_s_sum: defined for m = 0 only");
  cplx nu = tab.params.nu.value();
  cplx sum = 0.0;
  for (int r = tab.r_min; r <= tab.r_max; ++r) {
    cplx arg = nu + 1.0 + 2.0 * r;
    if (detail::near_nonpositive_integer(arg, 1e-9))
      throw PoleError("psi_s_sum: digamma pole hit; perturb nu");
    sum += (r % 2 == 0 ? 1.0 : -1.0) * tab.at(r) * digamma(arg);
  }
  return sum;
}

// Qs^m_nu(xi) = sum_r (-1)^r a_r Q^m_{nu+2r}(xi), plus the same series for
// the partner exponent -nu-1 and the xi-derivatives of both.
struct QsValues {
  cplx qs, qs_prime;        // family nu
  cplx qs_ref, qs_ref_prime;  // family -nu-1
};

inline QsValues qs_series_full(const CoefficientTable& tab, double xi) {
  if (!(xi > 1.0)) throw std::domain_error("qs_series: requires xi > 1");
  const int mu = tab.params.mu();
  const cplx nu = tab.params.nu.value();
  // Evaluate all needed degrees along two unit-step ladders (stable at any
  // xi, in particular near 1 where per-degree series evaluations cancel).
  // The series loses |r_min| * eta-ish digits to cancellation near xi = 1,
  // so accumulate everything in extended precision and round once at the
  // end; the per-term noise then sits three to four digits below double.
  const int span = tab.r_max - tab.r_min;
  // direct ladder covers nu + 2 r_min .. nu + 2 r_max + 1
  auto lad = legendre_q_degree_ladder_ext(mu, nu + 2.0 * tab.r_min,
                                          2 * span + 2, xi);
  // partner ladder covers -nu-1 - 2 r_max .. -nu-1 - 2 r_min + 1
  auto ladr = legendre_q_degree_ladder_ext(mu, -nu - 1.0 - 2.0 * tab.r_max,
                                           2 * span + 2, xi);
  const long double lxi = xi;
  const long double w2 = lxi * lxi - 1.0L;
  auto prime = [&](cplx deg, const lcplx& q, const lcplx& qnext) {
    lcplx d(deg.real(), deg.imag());
    return ((d - (long double)mu + 1.0L) * qnext - (d + 1.0L) * lxi * q) / w2;
  };
  lcplx qs = 0, qs_p = 0, qs_ref = 0, qs_ref_p = 0;
  for (int r = tab.r_min; r <= tab.r_max; ++r) {
    long double sgn = (r % 2 == 0) ? 1.0L : -1.0L;
    cplx ar = tab.at(r);
    lcplx a = sgn * lcplx(ar.real(), ar.imag());
    cplx deg = nu + 2.0 * r;
    const lcplx& q = lad[size_t(2 * (r - tab.r_min))];
    const lcplx& qnext = lad[size_t(2 * (r - tab.r_min) + 1)];
    qs += a * q;
    qs_p += a * prime(deg, q, qnext);
    // partner series re-indexed through a_{-nu-1,-r} = a_{nu,r}
    const lcplx& qr = ladr[size_t(2 * (tab.r_max - r))];
    const lcplx& qrnext = ladr[size_t(2 * (tab.r_max - r) + 1)];
    qs_ref += a * qr;
    qs_ref_p += a * prime(-deg - 1.0, qr, qrnext);
  }
  auto down = [](const lcplx& v) {
    return cplx(double(v.real()), double(v.imag()));
  };
  return QsValues{down(qs), down(qs_p), down(qs_ref), down(qs_ref_p)};
}

inline cplx qs_series(const CoefficientTable& tab, double xi) {
  return qs_series_full(tab, xi).qs;
}

// ---------------------------------------------------------------------------
// Radial solution of the third kind and the joining-factor decomposition.

// Frobenius basis of the radial equation at the regular singular point
// xi = 1 (indices +-mu/2, resonant for integer mu):
//   w_reg  = d^{mu/2} (1 + ...),
//   w_sing = d^{-mu/2}(1 + ... + 0*d^{mu} + ...) + clog * ln(d) * w_reg,
// with d = xi - 1; for mu = 0, w_sing = ln(d) w_reg + (0 + d...).  The pair
// is evaluated (value and xi-derivative) at xi_eval = 1 + delta.  All
// arithmetic is real: lambda is real on both nu families.
struct FrobeniusBasis {
  int mu = 0;
  double lambda = 0, theta = 0;
  double xi_eval = 1.1;
  double w_sing = 0, w_sing_p = 0;
  double w_reg = 0, w_reg_p = 0;
  double clog = 0;
  // series coefficients, usable at any offset 0 < d <= xi_eval - 1
  std::vector<double> reg_coef, sing_coef;

  // value and derivative of the pair at xi = 1 + d
  void eval(double d, double& wsing, double& wsing_p, double& wreg,
            double& wreg_p) const {
    const double sig_p = 0.5 * mu, sig_m = -0.5 * mu;
    double wr = 0, wrp = 0;
    for (int k = int(reg_coef.size()) - 1; k >= 0; --k) {
      wr = wr * d + reg_coef[size_t(k)];
      wrp = wrp * d + reg_coef[size_t(k)] * (sig_p + k);
    }
    double pref = std::pow(d, sig_p);
    wreg = pref * wr;
    wreg_p = pref / d * wrp;
    double ws = 0, wsp = 0;
    for (int k = int(sing_coef.size()) - 1; k >= 0; --k) {
      ws = ws * d + sing_coef[size_t(k)];
      wsp = wsp * d + sing_coef[size_t(k)] * (sig_m + k);
    }
    double prefm = std::pow(d, sig_m);
    double ld = std::log(d);
    wsing = prefm * ws + clog * ld * wreg;
    wsing_p = prefm / d * wsp + clog * (wreg / d + ld * wreg_p);
  }
};

// Connection constants of the decaying radial solution with respect to the
// Frobenius basis: S3 = A w_sing + B w_reg.  A multiplies the singular
// branch, so A = 0 is the square-integrability condition at xi = 1; for
// m = 0, A is exactly the logarithmic coefficient alpha.
struct SingularConstants {
  double A = 0, B = 0;
  FrobeniusBasis basis;
};

struct RadialDecomposition {
  double lambda = 0;
  double xi_m = 1.1;  // Frobenius matching point
  double A = 0, B = 0;
  cplx c1, c2;  // S3 = c1 Qs_nu + c2 Qs_{-nu-1}
  cplx s;       // s^m_nu(theta)
  cplx a_qs;    // singular constant of Qs (equals (-1)^m 2^{m/2-1}Gamma(m)/s)
};

namespace detail {

inline FrobeniusBasis frobenius_basis(int mu, double theta, double lambda,
                                      double delta = 0.1) {
  // polynomial coefficients of the equation written as
  //   P2(d) psi'' + P1(d) psi' + P0(d) psi = 0,  d = xi-1,
  // P2 = d^2(2+d)^2, P1 = 2d(1+d)(2+d), P0 = -lambda d(2+d)
  //      + 4 theta d^2 (2+d)^2 - mu^2
  const double a2[5] = {4, 4, 1, 0, 0};
  const double a1[5] = {4, 6, 2, 0, 0};
  const double a0[5] = {-double(mu) * mu, -2 * lambda, -lambda + 16 * theta,
                        16 * theta, 4 * theta};
  auto term = [&](double s, int i) {
    return s * (s - 1) * a2[i] + s * a1[i] + a0[i];
  };
  auto indicial = [&](double s) { return 4 * s * s - double(mu) * mu; };

  const int nmax = 500;
  const double sig_p = 0.5 * mu, sig_m = -0.5 * mu;

  // regular solution p_k, sigma = +mu/2
  std::vector<double> p{1.0};
  for (int n = 1; n < nmax; ++n) {
    double acc = 0;
    for (int i = 1; i <= 4 && i <= n; ++i)
      acc += p[size_t(n - i)] * term(sig_p + (n - i), i);
    p.push_back(-acc / indicial(sig_p + n));
    if (std::abs(p.back()) * std::pow(delta, n) < 1e-20 && n > 8) break;
  }
  // series G_j of L[ln(d) w_reg] = d(2+d)[2(2+d) w_reg' + w_reg], offset
  // d^{mu/2 + j}
  std::vector<double> S1(p.size() + 1, 0.0), G(p.size() + 1, 0.0);
  for (size_t j = 0; j < S1.size(); ++j) {
    double v = 0;
    if (j < p.size()) v += 4 * (sig_p + double(j)) * p[j];
    if (j >= 1 && j - 1 < p.size())
      v += (2 * (sig_p + double(j) - 1) + 1) * p[j - 1];
    S1[j] = v;
  }
  for (size_t j = 0; j < G.size(); ++j)
    G[j] = 2 * S1[j] + (j >= 1 ? S1[j - 1] : 0.0);

  // singular solution c_k, sigma = -mu/2, with log coupling clog
  std::vector<double> c{1.0};
  double clog = 0.0;
  if (mu == 0) clog = 1.0;  // w_sing = ln(d) w_reg + sum d_k, d_0 = 0
  if (mu == 0) c[0] = 0.0;
  int ncap = int(p.size()) + mu + 40;
  for (int n = 1; n < ncap; ++n) {
    double acc = 0;
    for (int i = 1; i <= 4 && i <= n; ++i)
      acc += c[size_t(n - i)] * term(sig_m + (n - i), i);
    if (n >= mu && size_t(n - mu) < G.size()) acc += clog * G[size_t(n - mu)];
    if (mu != 0 && n == mu) {
      // resonant order: indicial factor vanishes; choose c_mu = 0 and fix
      // the log coupling from the obstruction
      clog = -acc / G[0];
      // re-add this order's log contribution so acc would vanish
      c.push_back(0.0);
      continue;
    }
    c.push_back(-acc / indicial(sig_m + n));
    if (n > mu + 8 && std::abs(c.back()) * std::pow(delta, n) < 1e-20 &&
        (size_t(n) >= G.size() + size_t(mu)))
      break;
  }

  FrobeniusBasis fb;
  fb.mu = mu; fb.lambda = lambda; fb.theta = theta;
  fb.xi_eval = 1.0 + delta;
  fb.clog = clog;
  fb.reg_coef = std::move(p);
  fb.sing_coef = std::move(c);
  fb.eval(delta, fb.w_sing, fb.w_sing_p, fb.w_reg, fb.w_reg_p);
  return fb;
}

// Solve  val = A w_sing + B w_reg,  der = A w_sing' + B w_reg'.
template <class T>
inline void frobenius_project(const FrobeniusBasis& fb, T val, T der, T& A,
                              T& B) {
  double det = fb.w_sing * fb.w_reg_p - fb.w_sing_p * fb.w_reg;
  if (std::abs(det) < 1e-280)
    throw ConvergenceError("frobenius_project: degenerate basis");
  A = (val * fb.w_reg_p - der * fb.w_reg) / det;
  B = (fb.w_sing * der - fb.w_sing_p * val) / det;
}

// Decaying-at-infinity solution of the spheroidal ODE, integrated inward.
// Values are recorded at the requested targets (descending order not
// required; they are sorted internally).  The solution is normalized to a
// unit (value, slope) pair at xi_ref.  Returns value/derivative pairs.
struct RadialSolution {
  std::vector<double> xi;
  std::vector<double> y, yp;
};

inline RadialSolution radial_decaying(int mu, double theta, double lambda,
                                      std::vector<double> targets,
                                      double xi_ref) {
  if (theta >= 0.0)
    throw std::domain_error("radial_decaying: requires theta < 0");
  std::sort(targets.begin(), targets.end(), std::greater<>());
  const double gamma = 2.0 * std::sqrt(-theta);
  double xi_turn =
      std::sqrt(1.0 + 3.0 * (std::abs(lambda) + mu * mu + 10.0) /
                          (4.0 * std::abs(theta)));
  double xi_max = std::max({xi_ref, targets.empty() ? 1.0 : targets.front(),
                            xi_turn}) +
                  40.0 / gamma;

  StateVec<2> y;
  y.v = {1.0, -gamma - 1.0 / xi_max};
  auto rhs = [&](double x, const StateVec<2>& s) {
    double L = lambda + 4.0 * theta * (1.0 - x * x) -
               double(mu) * double(mu) / (1.0 - x * x);
    StateVec<2> d;
    d.v = {s.v[1], (2.0 * x * s.v[1] - L * s.v[0]) / (1.0 - x * x)};
    return d;
  };
  // The solution grows inward like e^{gamma xi_max}/e^{gamma xi}; rescale
  // when it gets large and track the accumulated log-scale so that records
  // taken at different stops stay mutually consistent.
  double lscale = 0.0;
  auto renorm = [&lscale](double, StateVec<2>& s) {
    double m = std::max(std::abs(s.v[0]), std::abs(s.v[1]));
    if (m > 1e200) {
      s.v[0] /= m;
      s.v[1] /= m;
      lscale += std::log(m);
    }
  };

  RadialSolution sol;
  std::vector<double> stops = targets;
  stops.push_back(xi_ref);
  std::sort(stops.begin(), stops.end(), std::greater<>());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  double x = xi_max;
  double ref_y = 0, ref_yp = 0, ref_lscale = 0;
  bool have_ref = false;
  struct Rec {
    double xi, y, yp, lscale;
  };
  std::vector<Rec> recorded;
  for (double stop : stops) {
    if (stop >= x) {
      // target above the start: the decaying branch is ~e^{-gamma xi}; not
      // supported, extend xi_max instead
      throw std::domain_error("radial_decaying: target beyond xi_max");
    }
    y = ode_integrate<2>(rhs, y, x, stop, 1e-12, 1e-290, renorm);
    x = stop;
    recorded.push_back({stop, y.v[0], y.v[1], lscale});
    if (stop == xi_ref) {
      ref_y = y.v[0];
      ref_yp = y.v[1];
      ref_lscale = lscale;
      have_ref = true;
    }
  }
  if (!have_ref)
    throw std::logic_error("radial_decaying: reference point not recorded");
  double geff = std::max(1.0, gamma);
  double norm = std::hypot(ref_y, ref_yp / geff);
  if (!(norm > 0)) throw ConvergenceError("radial_decaying: zero solution");
  for (const Rec& rec : recorded) {
    if (std::find(targets.begin(), targets.end(), rec.xi) != targets.end()) {
      double rescale = std::exp(rec.lscale - ref_lscale) / norm;
      sol.xi.push_back(rec.xi);
      sol.y.push_back(rec.y * rescale);
      sol.yp.push_back(rec.yp * rescale);
    }
  }
  return sol;
}

}  // namespace detail

namespace detail {

// Offset of the Frobenius matching point above xi = 1: close enough that
// the local series dominates, far enough that the Legendre representation
// of the Qs series stays cheap.  For strongly oblate theta the series
// coefficients grow like I_0(gamma d) with gamma = 2 sqrt(-theta), so the
// offset shrinks accordingly to keep the evaluation well inside the
// numerically convergent range.
inline double matching_delta(double theta) {
  double gamma = 2.0 * std::sqrt(std::max(0.0, -theta));
  return std::min(0.1, 4.0 / std::max(1.0, gamma));
}

}  // namespace detail

// Frobenius matching point for the radial decomposition.
inline double decomposition_point(const SpheroidalParams& p) {
  return 1.0 + detail::matching_delta(p.theta);
}

// Connection constants of the deterministically normalized decaying
// solution with respect to the Frobenius basis at xi = 1.  A pointwise
// match of (value, derivative) against the Qs pair is catastrophically
// ill-conditioned — the two Qs solutions share their singular behavior at
// xi = 1 and stay nearly parallel along the whole axis — whereas the
// (singular, regular) Frobenius pair is well separated, so projecting onto
// it loses no accuracy.
// Matching offset for decompositions against the Qs series.  The series
// terms a_r Q_{nu+2r}(xi) grow like e^{2|r|eta} toward the negative end of
// the table while the sum stays exponentially small near xi = 1, so both
// the truncated tail (|a_r| ~ 1e-22) and the summation cancellation blow
// up with the offset; keeping 2 * rspan * eta bounded keeps the series
// error a few orders below the pair-splitting scale it gets divided by.
inline double qs_matching_delta(const CoefficientTable& tab) {
  int rspan = std::max({-tab.r_min, tab.r_max, 1});
  // second cap: the Qs pair splits like e^{2 eta Re nu}, which the
  // decomposition has to cancel, so large real exponents need to stay
  // close to the singular point as well
  double re_nu = std::abs(tab.params.nu.value().real());
  double eta = std::min(7.0 / double(rspan), 9.0 / std::max(1.0, re_nu));
  double delta = std::cosh(eta) - 1.0;
  return std::min(std::max(delta, 1e-3),
                  detail::matching_delta(tab.params.theta));
}

inline SingularConstants singular_constants(const CoefficientTable& tab) {
  const SpheroidalParams& p = tab.params;
  SingularConstants sc;
  sc.basis = detail::frobenius_basis(p.mu(), p.theta, tab.lambda,
                                     p.theta == 0.0
                                         ? decomposition_point(p) - 1.0
                                         : qs_matching_delta(tab));
  if (p.theta == 0.0) {
    cplx q, qp;
    legendre_q_pair({p.mu(), p.nu.value(), sc.basis.xi_eval}, q, qp);
    cplx A, B;
    detail::frobenius_project(sc.basis, q, qp, A, B);
    sc.A = A.real();
    sc.B = B.real();
    return sc;
  }
  auto sol = detail::radial_decaying(p.mu(), p.theta, tab.lambda,
                                     {sc.basis.xi_eval}, sc.basis.xi_eval);
  detail::frobenius_project(sc.basis, sol.y[0], sol.yp[0], sc.A, sc.B);
  return sc;
}

// Same decomposition keyed by (m, theta, lambda) alone.  The connection
// constants of the decaying solution do not involve the characteristic
// exponent at all, which makes this the natural scan function in the
// spectral parameter: A is real, smooth in lambda, and vanishes exactly at
// the eigenvalues of the partial Hamiltonian.
inline SingularConstants singular_constants(int m, double theta,
                                            double lambda) {
  if (!(theta < 0.0))
    throw std::domain_error("singular_constants: requires theta < 0");
  const int mu = std::abs(m);
  SingularConstants sc;
  sc.basis =
      detail::frobenius_basis(mu, theta, lambda, detail::matching_delta(theta));
  auto sol = detail::radial_decaying(mu, theta, lambda, {sc.basis.xi_eval},
                                     sc.basis.xi_eval);
  detail::frobenius_project(sc.basis, sol.y[0], sol.yp[0], sc.A, sc.B);
  return sc;
}

inline RadialDecomposition radial_decomposition(const CoefficientTable& tab) {
  const SpheroidalParams& p = tab.params;
  RadialDecomposition out;
  out.lambda = tab.lambda;
  out.s = s_sum(tab);
  SingularConstants sc = singular_constants(tab);
  out.xi_m = sc.basis.xi_eval;
  out.A = sc.A;
  out.B = sc.B;
  if (p.theta == 0.0) {
    // the decaying solution is the single Legendre function Q^mu_nu itself
    out.c1 = 1.0;
    out.c2 = 0.0;
    out.a_qs = cplx(sc.A, 0.0);
    return out;
  }
  // Decompose the two Qs solutions in the same Frobenius basis.  Their
  // singular constants coincide (both equal (-1)^m 2^{m/2-1} Gamma(m)/s up
  // to the shared s normalization), so (c1, c2) follow from the singular
  // constant and the regular-constant difference, which is O(1).
  QsValues qv = qs_series_full(tab, out.xi_m);
  cplx aq1, bq1, aq2, bq2;
  detail::frobenius_project(sc.basis, qv.qs, qv.qs_prime, aq1, bq1);
  detail::frobenius_project(sc.basis, qv.qs_ref, qv.qs_ref_prime, aq2, bq2);
  out.a_qs = 0.5 * (aq1 + aq2);
  if (std::abs(out.a_qs) < 1e-280)
    throw ConvergenceError("radial_decomposition: vanishing Qs singular part");
  cplx sum = cplx(sc.A, 0.0) / out.a_qs;  // c1 + c2
  cplx bdiff = bq1 - bq2;
  if (std::abs(bdiff) <
      1e-12 * (std::abs(bq1) + std::abs(bq2) + std::abs(sc.B)))
    throw ConvergenceError(
        "radial_decomposition: Qs pair degenerate (regular parts coincide)");
  out.c1 = (cplx(sc.B, 0.0) - sum * bq2) / bdiff;
  out.c2 = sum - out.c1;
  return out;
}

// Joining factors in the convention fixed by declaring the
// deterministically normalized decaying solution to be S^{m(3)} and
// matching its representation
//   S3 = (i tan(nu pi) / (pi e^{-i(nu+1)pi}))
//        (K_{-nu-1} Qs_nu + K_nu Qs_{-nu-1} e^{-i(3nu+1/2)pi}),
// which yields
//   K_nu     = -pi e^{2 pi i nu} c2 / tan(nu pi),
//   K_{-nu-1} = pi e^{-i pi (nu+3/2)} c1 / tan(nu pi).
// Both are always evaluated from the decomposition at exponent nu; with
// these phases e^{i(3nu+1/2)pi} K_{-nu-1} + K_nu = -pi e^{2 pi i nu}
// (c1+c2)/tan(nu pi), so the eigenvalue condition reduces to c1+c2 = 0.
inline cplx joining_factor(const RadialDecomposition& d, const NuPoint& nu) {
  cplx v = nu.value();
  return -pi * std::exp(cplx(0, 2 * pi) * v) * d.c2 / detail::tan_pi(v);
}

inline cplx joining_factor_reflected(const RadialDecomposition& d,
                                     const NuPoint& nu) {
  cplx v = nu.value();
  return pi * std::exp(cplx(0, -pi) * (v + 1.5)) * d.c1 / detail::tan_pi(v);
}

// Left-hand side of the eigenvalue condition
//   e^{i(3nu+1/2)pi} K^m_{-nu-1} + K^m_nu = -pi e^{2 pi i nu} (c1+c2)/tan(nu pi).
inline cplx eigencondition_value(const RadialDecomposition& d,
                                 const NuPoint& nu) {
  cplx v = nu.value();
  return -pi * std::exp(cplx(0, 2 * pi) * v) * (d.c1 + d.c2) /
         detail::tan_pi(v);
}

// Scale-free residual of the eigenvalue condition; < tol certifies a root.
inline double eigencondition_residual(const RadialDecomposition& d) {
  return std::abs(d.c1 + d.c2) / (std::abs(d.c1) + std::abs(d.c2) + 1e-300);
}

// Real-valued bracketing function, smooth along each nu family and changing
// sign at eigenvalues; immune to the spurious common zeros of (c1, c2) at
// integer exponents.
inline double eigencondition_bracket(const RadialDecomposition& d) {
  return (d.c1 + d.c2).real() / (std::abs(d.c1) + std::abs(d.c2) + 1e-300);
}

// Cheap real bracketing function built from the Frobenius singular
// constant alone (A = 0 is exactly the square-integrability condition at
// xi = 1).  Unlike the (c1, c2) form it needs no Qs evaluation, so it is
// usable arbitrarily close to integer exponents.
inline double eigencondition_bracket(const SingularConstants& sc) {
  return sc.A / (std::abs(sc.A) + std::abs(sc.B) + 1e-300);
}

// Logarithmic coefficient of S^{0(3)} = alpha log(xi-1) + beta + ...
// In the implemented convention alpha = -(c1+c2)/(2 s^0_nu).
inline cplx alpha_log_coefficient(const RadialDecomposition& d) {
  return -(d.c1 + d.c2) / (2.0 * d.s);
}

// Radial solution of the third kind at the given points (unique decaying
// solution, unit (value, slope/gamma) pair at the decomposition point).
inline std::vector<double> radial_s3(const CoefficientTable& tab,
                                     const std::vector<double>& xi) {
  const SpheroidalParams& p = tab.params;
  for (double x : xi)
    if (!(x > 1.0)) throw std::domain_error("radial_s3: requires xi > 1");
  if (p.theta == 0.0) {
    std::vector<double> out;
    for (double x : xi)
      out.push_back(legendre_q({p.mu(), p.nu.value(), x}).real());
    return out;
  }
  double xi0 = decomposition_point(p);
  auto sol = detail::radial_decaying(p.mu(), p.theta, tab.lambda, xi, xi0);
  // radial_decaying returns targets sorted descending; restore caller order
  std::vector<double> out(xi.size());
  for (size_t i = 0; i < xi.size(); ++i) {
    auto it = std::find(sol.xi.begin(), sol.xi.end(), xi[i]);
    out[i] = sol.y[size_t(it - sol.xi.begin())];
  }
  return out;
}

}  // namespace qdot
