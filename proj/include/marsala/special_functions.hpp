#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace marsala {

namespace detail {

// Power series, accurate to ~1e-12 for x <= 4.
inline void sici_series(double x, double& si, double& ci) {
  const double x2 = x * x;
  double term = x;  // x^(2k+1)/(2k+1)! with sign
  si = 0.0;
  for (int k = 0; k < 60; ++k) {
    const double add = term / (2 * k + 1);
    si += add;
    if (std::abs(add) < 1e-17 * std::abs(si)) break;
    term *= -x2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
  }
  double cterm = -x2 / 2.0;  // -x^2/2!
  double csum = 0.0;
  for (int k = 1; k < 60; ++k) {
    const double add = cterm / (2 * k);
    csum += add;
    if (std::abs(add) < 1e-17 * (std::abs(csum) + 1e-300)) break;
    cterm *= -x2 / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
  }
  ci = std::numbers::egamma + std::log(x) + csum;
}

// Modified Lentz continued fraction for E1(ix); then Ci + i(Si - pi/2) = -E1(ix).
inline void sici_continued_fraction(double x, double& si, double& ci) {
  using c = std::complex<double>;
  constexpr double tiny = 1e-300;
  c b(1.0, x);
  c cc = 1.0 / tiny;
  c d = 1.0 / b;
  c h = d;
  for (int i = 1; i < 1000; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    cc = b + a / cc;
    const c del = cc * d;
    h *= del;
    if (std::abs(del.real() - 1.0) + std::abs(del.imag()) < 1e-16) break;
  }
  h *= c(std::cos(x), -std::sin(x));
  ci = -h.real();
  si = std::numbers::pi / 2.0 + h.imag();
}

}  // namespace detail

/// Sine integral Si(x) = int_0^x sin(t)/t dt.
inline double sine_integral(double x) {
  if (x == 0.0) return 0.0;
  const double ax = std::abs(x);
  double si = 0.0, ci = 0.0;
  if (ax <= 4.0)
    detail::sici_series(ax, si, ci);
  else
    detail::sici_continued_fraction(ax, si, ci);
  return x < 0 ? -si : si;
}

/// Cosine integral Ci(x) = gamma + ln x + int_0^x (cos t - 1)/t dt, x > 0.
inline double cosine_integral(double x) {
  if (!(x > 0.0)) throw std::domain_error("cosine_integral requires x > 0");
  double si = 0.0, ci = 0.0;
  if (x <= 4.0)
    detail::sici_series(x, si, ci);
  else
    detail::sici_continued_fraction(x, si, ci);
  return ci;
}

/// Entire cosine integral Cin(x) = int_0^x (1 - cos t)/t dt = gamma + ln x - Ci(x).
/// Evaluated directly for small x, where forming it from Ci cancels badly.
inline double cosine_integral_entire(double x) {
  const double ax = std::abs(x);
  if (ax > 4.0) return std::numbers::egamma + std::log(ax) - cosine_integral(ax);
  const double x2 = ax * ax;
  double term = x2 / 2.0;  // x^(2k)/(2k)!
  double sum = 0.0;
  for (int k = 1; k < 60; ++k) {
    const double add = term / (2 * k);
    sum += add;
    if (std::abs(add) < 1e-17 * (std::abs(sum) + 1e-300)) break;
    term *= -x2 / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
  }
  return sum;
}

}  // namespace marsala
