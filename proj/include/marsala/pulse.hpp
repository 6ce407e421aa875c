#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace marsala {

// Square-root raised cosine shaping parameters. Times are in seconds unless a
// name says otherwise; most internal work is done in symbol units (t / Ts).
struct PulseShape {
  double rolloff{0.2};
  int span_symbols{40};
  int oversampling{4};
  double symbol_period{1.0};

  void validate() const {
    if (!(rolloff > 0.0 && rolloff < 1.0))
      throw std::invalid_argument("rolloff must lie in (0,1)");
    if (span_symbols < 4 || span_symbols % 2 != 0)
      throw std::invalid_argument("span_symbols must be an even integer >= 4");
    if (oversampling < 2)
      throw std::invalid_argument("oversampling must be >= 2");
    if (!(symbol_period > 0.0))
      throw std::invalid_argument("symbol_period must be > 0");
  }

  int guard_symbols() const { return span_symbols / 2; }
};

namespace detail {

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Unit-energy RRC over the real line, x in symbol periods.
inline double rrc_value(double x, double alpha) {
  constexpr double pi = std::numbers::pi;
  if (std::abs(x) < 1e-12) return 1.0 - alpha + 4.0 * alpha / pi;
  const double edge = 1.0 / (4.0 * alpha);
  if (std::abs(std::abs(x) - edge) < 1e-9) {
    return alpha / std::numbers::sqrt2 *
           ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * alpha)) +
            (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * alpha)));
  }
  const double num = std::sin(pi * x * (1.0 - alpha)) +
                     4.0 * alpha * x * std::cos(pi * x * (1.0 + alpha));
  const double den = pi * x * (1.0 - 16.0 * alpha * alpha * x * x);
  return num / den;
}

inline double raised_cosine_symbols(double x, double alpha) {
  const double d = 2.0 * alpha * x;
  if (std::abs(std::abs(d) - 1.0) < 1e-9)
    return std::numbers::pi / 4.0 * sinc(1.0 / (2.0 * alpha));
  return sinc(x) * std::cos(std::numbers::pi * alpha * x) / (1.0 - d * d);
}

}  // namespace detail

/// Exact raised cosine (the composite transmit/receive response) at time t,
/// normalized so that H(0) = 1.
inline double raised_cosine(double t, const PulseShape& pulse) {
  return detail::raised_cosine_symbols(t / pulse.symbol_period, pulse.rolloff);
}

/// Truncated root raised cosine sampled at Q samples per symbol.
///
/// The pulse is scaled so that (1/Q) * sum h(j/Q)^2 == 1, i.e. a burst of
/// unit-energy symbols has unit average power per sample and the matched
/// filter output at the symbol instants reproduces the symbols. Evaluation
/// at arbitrary (fractional) instants uses the same scale and truncation, so
/// delayed bursts are synthesized exactly rather than interpolated.
class RootPulse {
 public:
  explicit RootPulse(const PulseShape& shape) : shape_(shape) {
    shape_.validate();
    const int q = shape_.oversampling;
    const int half = half_length();
    taps_.resize(static_cast<std::size_t>(2 * half + 1));
    double energy = 0.0;
    for (int j = -half; j <= half; ++j) {
      const double v = detail::rrc_value(static_cast<double>(j) / q, shape_.rolloff);
      taps_[static_cast<std::size_t>(j + half)] = v;
      energy += v * v;
    }
    scale_ = 1.0 / std::sqrt(energy / q);
    for (double& v : taps_) v *= scale_;
  }

  const PulseShape& shape() const { return shape_; }
  int oversampling() const { return shape_.oversampling; }
  int guard_symbols() const { return shape_.guard_symbols(); }

  // Taps cover [-half_length, half_length] samples.
  int half_length() const { return shape_.oversampling * shape_.guard_symbols(); }
  std::span<const double> taps() const { return taps_; }

  /// Scaled pulse at x symbol periods; zero outside the truncation window.
  double operator()(double x) const {
    if (std::abs(x) > static_cast<double>(shape_.guard_symbols()) + 1e-12) return 0.0;
    return scale_ * detail::rrc_value(x, shape_.rolloff);
  }

 private:
  PulseShape shape_;
  std::vector<double> taps_;
  double scale_{1.0};
};

}  // namespace marsala
