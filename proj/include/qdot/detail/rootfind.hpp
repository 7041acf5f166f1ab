#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace qdot::detail {

// Brent's method on a sign-changing bracket [a, b].
template <typename F>
double brent(F&& f, double a, double b, double fa, double fb,
             double xtol = 1e-13, int maxit = 200) {
  if (fa == 0) return a;
  if (fb == 0) return b;
  if (fa * fb > 0) throw std::invalid_argument("brent: no sign change");
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < maxit; ++it) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    double tol = 2 * 2.22e-16 * std::abs(b) + 0.5 * xtol;
    double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0) return b;
    if (std::abs(e) < tol || std::abs(fa) <= std::abs(fb)) {
      d = e = m;
    } else {
      double s = fb / fa, p, q;
      if (a == c) {
        p = 2 * m * s;
        q = 1 - s;
      } else {
        double r = fb / fc;
        double t = fa / fc;
        p = s * (2 * m * t * (t - r) - (b - a) * (r - 1));
        q = (t - 1) * (r - 1) * (s - 1);
      }
      if (p > 0) q = -q; else p = -p;
      if (2 * p < std::min(3 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d; d = p / q;
      } else {
        d = e = m;
      }
    }
    a = b; fa = fb;
    b += (std::abs(d) > tol) ? d : (m > 0 ? tol : -tol);
    fb = f(b);
    if ((fb > 0) == (fc > 0)) { c = a; fc = fa; e = d = b - a; }
  }
  return b;
}

struct Bracket {
  double a, b, fa, fb;
};

// Scans f on n+1 equidistant points of [lo, hi] and returns the sign-change
// brackets in order.  Non-finite samples are skipped.
template <typename F>
std::vector<Bracket> scan_brackets(F&& f, double lo, double hi, int n) {
  std::vector<Bracket> out;
  double xprev = lo, fprev = f(lo);
  for (int i = 1; i <= n; ++i) {
    double x = lo + (hi - lo) * i / n;
    double fx = f(x);
    if (std::isfinite(fprev) && std::isfinite(fx) && fprev * fx <= 0 &&
        fprev != fx)
      out.push_back({xprev, x, fprev, fx});
    xprev = x;
    fprev = fx;
  }
  return out;
}

}  // namespace qdot::detail
