#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace qdot::detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
inline constexpr double gk15_x[8] = {
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329};
inline constexpr double gk15_wk[8] = {
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970};
inline constexpr double g7_w[4] = {
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082};

template <typename F>
void gk15(F&& f, double a, double b, double& result, double& abserr) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double fc = f(c);
  double resk = gk15_wk[0] * fc;
  double resg = g7_w[0] * fc;
  for (int i = 1; i < 8; ++i) {
    double f1 = f(c - h * gk15_x[i]);
    double f2 = f(c + h * gk15_x[i]);
    resk += gk15_wk[i] * (f1 + f2);
    if (i % 2 == 0) resg += g7_w[i / 2] * (f1 + f2);
  }
  result = resk * h;
  abserr = std::abs((resk - resg) * h);
}

// Globally adaptive bisection quadrature with GK15 panels.
template <typename F>
double integrate(F&& f, double a, double b, double rtol = 1e-12,
                 double atol = 1e-300, int max_depth = 48) {
  struct Frame { double a, b; int depth; };
  double total = 0, r0, e0;
  gk15(f, a, b, r0, e0);
  double scale = std::abs(r0);
  std::function<double(double, double, double, int)> rec =
      [&](double lo, double hi, double whole, int depth) -> double {
    double m = 0.5 * (lo + hi), rl, el, rr, er;
    gk15(f, lo, m, rl, el);
    gk15(f, m, hi, rr, er);
    if (depth >= max_depth)
      throw std::runtime_error("integrate: max recursion depth");
    if (el + er < std::max(atol, rtol * std::max(scale, std::abs(rl + rr))) ||
        std::abs(rl + rr - whole) <
            std::max(atol, 0.1 * rtol * std::max(scale, std::abs(rl + rr))))
      return rl + rr;
    return rec(lo, m, rl, depth + 1) + rec(m, hi, rr, depth + 1);
  };
  total = rec(a, b, r0, 0);
  return total;
}

}  // namespace qdot::detail
