#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace qdot::detail {

// Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.
// The state type S must support +, scalar *, and an inf-norm via absmax().
template <typename S>
struct OdeResult {
  S y;
  double x;
  long n_steps;
};

template <std::size_t N>
struct StateVec {
  std::array<double, N> v{};

  StateVec operator+(const StateVec& o) const {
    StateVec r;
    for (std::size_t i = 0; i < N; ++i) r.v[i] = v[i] + o.v[i];
    return r;
  }
  StateVec operator*(double c) const {
    StateVec r;
    for (std::size_t i = 0; i < N; ++i) r.v[i] = v[i] * c;
    return r;
  }
  double absmax() const {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
};

// Integrates y' = f(x, y) from x0 to x1 (either direction).  The observer,
// when given, is called after every accepted step with (x, y).  Rescaling of
// the state between steps is the caller's job (see the observer in the
// radial solver, which renormalizes to avoid under/overflow).
template <std::size_t N, typename F, typename Obs>
StateVec<N> ode_integrate(F&& f, StateVec<N> y, double x0, double x1,
                          double rtol, double atol, Obs&& observer) {
  using S = StateVec<N>;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // embedded 4th order weights
  static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695,
                          e4 = 393.0 / 640, e5 = -92097.0 / 339200,
                          e6 = 187.0 / 2100, e7 = 1.0 / 40;

  const double dir = (x1 >= x0) ? 1.0 : -1.0;
  double x = x0;
  double span = std::abs(x1 - x0);
  if (span == 0) return y;
  double h = dir * std::min(span, std::max(1e-8, span / 100));
  long steps = 0;
  const long max_steps = 80'000'000L;

  while (dir * (x1 - x) > 0) {
    if (dir * (x + h - x1) > 0) h = x1 - x;
    S k1 = f(x, y);
    S k2 = f(x + c2 * h, y + k1 * (a21 * h));
    S k3 = f(x + c3 * h, y + k1 * (a31 * h) + k2 * (a32 * h));
    S k4 = f(x + c4 * h, y + k1 * (a41 * h) + k2 * (a42 * h) + k3 * (a43 * h));
    S k5 = f(x + c5 * h, y + k1 * (a51 * h) + k2 * (a52 * h) + k3 * (a53 * h) +
                             k4 * (a54 * h));
    S k6 = f(x + h, y + k1 * (a61 * h) + k2 * (a62 * h) + k3 * (a63 * h) +
                        k4 * (a64 * h) + k5 * (a65 * h));
    S y5 = y + k1 * (b1 * h) + k3 * (b3 * h) + k4 * (b4 * h) + k5 * (b5 * h) +
           k6 * (b6 * h);
    S k7 = f(x + h, y5);
    S y4 = y + k1 * (e1 * h) + k3 * (e3 * h) + k4 * (e4 * h) + k5 * (e5 * h) +
           k6 * (e6 * h) + k7 * (e7 * h);
    double sc = atol + rtol * std::max(y.absmax(), y5.absmax());
    double err = (y5 + y4 * (-1.0)).absmax() / sc;

    if (err <= 1.0) {
      x += h;
      y = y5;
      observer(x, y);  // may rescale y in place
    }
    double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
    fac = std::min(5.0, std::max(0.2, fac));
    h *= fac;
    if (std::abs(h) < 1e-15 * std::max(1.0, std::abs(x)))
      throw std::runtime_error("ode_integrate: step size underflow");
    if (++steps > max_steps)
      throw std::runtime_error("ode_integrate: too many steps");
  }
  return y;
}

template <std::size_t N, typename F>
StateVec<N> ode_integrate(F&& f, StateVec<N> y, double x0, double x1,
                          double rtol, double atol) {
  return ode_integrate<N>(std::forward<F>(f), y, x0, x1, rtol, atol,
                          [](double, StateVec<N>&) {});
}

}  // namespace qdot::detail
