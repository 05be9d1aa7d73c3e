#pragma once

#include "bifrb/model.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace testing {

using bifrb::Vector;

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double amp = 1.0)
{
  std::uniform_real_distribution<double> u(-amp, amp);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

// Smooth random state: a few sine modes with decaying amplitudes.
inline Vector random_smooth(const bifrb::FiniteElement1D& m, std::mt19937_64& rng, double amp = 1.0, int modes = 5)
{
  std::uniform_real_distribution<double> u(-amp, amp);
  std::vector<double> a(static_cast<std::size_t>(modes));
  for (int k = 0; k < modes; ++k) a[static_cast<std::size_t>(k)] = u(rng) / (k + 1);
  return m.interpolate([&](double x) {
    double s = 0.0;
    for (int k = 0; k < modes; ++k) s += a[static_cast<std::size_t>(k)] * std::sin((k + 1) * std::numbers::pi * x);
    return s;
  });
}

inline double bisect(const std::function<double(double)>& f, double a, double b, int iters = 200)
{
  double fa = f(a);
  for (int i = 0; i < iters; ++i) {
    const double c = 0.5 * (a + b);
    const double fc = f(c);
    if ((fc < 0) == (fa < 0)) {
      a = c;
      fa = fc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

// Continuous Bratu: u = -2 ln[cosh((x - 1/2) t / 2) / cosh(t / 4)], t = sqrt(2 mu) cosh(t / 4).
inline double bratu_fold_theta()
{
  return bisect([](double t) { return t * std::tanh(t / 4.0) - 4.0; }, 1.0, 10.0);
}

inline double bratu_fold()
{
  const double t = bratu_fold_theta();
  return t * t / (2.0 * std::pow(std::cosh(t / 4.0), 2));
}

inline double bratu_theta(double mu, bool upper)
{
  const double tf = bratu_fold_theta();
  auto g = [mu](double t) { return t - std::sqrt(2.0 * mu) * std::cosh(t / 4.0); };
  return upper ? bisect(g, tf, 60.0) : bisect(g, 0.0, tf);
}

inline double bratu_midpoint(double mu, bool upper)
{
  return 2.0 * std::log(std::cosh(bratu_theta(mu, upper) / 4.0));
}

}  // namespace testing
