#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "marsala/common.hpp"
#include "marsala/pulse.hpp"
#include "marsala/special_functions.hpp"

// Closed-form model of the average SNIR after combining N_b replicas with
// residual timing and phase errors.
//
// Timing: the reference replica keeps a residual tau_1 ~ U(-Ts/2Q, Ts/2Q);
// every other replica is off by tau_err = tau_1 + err with a triangular law on
// (-Ts/Q, Ts/Q). The raised cosine main lobe is approximated by sinc on
// [-Ts, Ts], which gives the expectations below in terms of Si and Ci.
// Phase: each non-reference replica carries phi_err ~ N(0, sigma^2).
// ISI: worst case, with the raised cosine linearized around its zero
// crossings (slopes m_l, beta = sum |m_l| over the three lobes either side).
namespace marsala {

namespace detail {
inline double two_sin2_half(double x) {  // 1 - cos(x) without cancellation
  const double s = std::sin(x / 2.0);
  return 2.0 * s * s;
}
}  // namespace detail

/// E[H(tau_1)], tau_1 ~ U(-Ts/2Q, Ts/2Q).
inline double expected_H_tau1(double q) {
  constexpr double pi = std::numbers::pi;
  return 2.0 * q / pi * sine_integral(pi / (2.0 * q));
}

/// E[H^2(tau_1)], tau_1 ~ U(-Ts/2Q, Ts/2Q).
inline double expected_H2_tau1(double q) {
  constexpr double pi = std::numbers::pi;
  const double s = std::sin(pi / (2.0 * q));
  return 2.0 * q / pi * (sine_integral(pi / q) - s * s / (pi / (2.0 * q)));
}

/// E[H(tau_err)], tau_err ~ triangular(-Ts/Q, Ts/Q).
inline double expected_H_tauerr(double q) {
  constexpr double pi = std::numbers::pi;
  return 2.0 * q / pi * (sine_integral(pi / q) - q / pi * detail::two_sin2_half(pi / q));
}

/// E[H^2(tau_err)], tau_err ~ triangular(-Ts/Q, Ts/Q).
///
/// (2Q/pi)(Si(2pi/Q) - sin^2(pi/Q)/(pi/Q)) + (Q^2/pi^2)(Ci(2pi/Q) - gamma + ln(Q/2pi)).
/// The last bracket is -Cin(2pi/Q); it is evaluated that way so large Q does
/// not lose the O(1/Q^2) remainder to cancellation.
inline double expected_H2_tauerr(double q) {
  constexpr double pi = std::numbers::pi;
  const double s = std::sin(pi / q);
  return 2.0 * q / pi * (sine_integral(2.0 * pi / q) - s * s / (pi / q)) -
         q * q / (pi * pi) * cosine_integral_entire(2.0 * pi / q);
}

/// E[H(tau_err_i) H(tau_err_j)] for independent i != j.
inline double expected_H_cross(double q) {
  const double m = expected_H_tauerr(q);
  return m * m;
}

struct PhaseMoments {
  double mean{1.0};
  double variance{0.0};
};

/// Moments of e^{j phi}, phi ~ N(0, sigma2). The variance is reported as the
/// non-negative (1 - e^{-s}) e^{-s}.
inline PhaseMoments phase_factor_moments(double sigma2) {
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("phase error variance must be >= 0");
  const double e = std::exp(-sigma2);
  return {std::exp(-sigma2 / 2.0), (1.0 - e) * e};
}

struct SnirModelInput {
  int n_replicas{2};
  int oversampling{4};
  double phase_err_variance{0.0};
  double isi_slope_sum{0.0};
  std::vector<double> interference_powers;  // I_1 (reference) .. I_Nb, linear
  double noise_power{0.0};                  // N0 relative to unit signal power
  bool perfect_sync{false};                 // zero timing/phase error

  void validate() const {
    if (n_replicas < 1) throw std::invalid_argument("n_replicas must be >= 1");
    if (oversampling < 1) throw std::invalid_argument("oversampling must be >= 1");
    if (!(phase_err_variance >= 0.0) || !std::isfinite(phase_err_variance))
      throw std::invalid_argument("phase_err_variance must be finite and >= 0");
    if (!(isi_slope_sum >= 0.0)) throw std::invalid_argument("isi_slope_sum must be >= 0");
    if (static_cast<int>(interference_powers.size()) != n_replicas)
      throw std::invalid_argument("need one interference power per replica");
    for (double i : interference_powers)
      if (!(i >= 0.0)) throw std::invalid_argument("interference powers must be >= 0");
    if (!(noise_power >= 0.0)) throw std::invalid_argument("noise_power must be >= 0");
  }
};

/// E[P(y_sum,des)] assembled termwise under independence of tau_1, tau_err_i
/// and phi_err_i.
inline double desired_power(const SnirModelInput& in) {
  in.validate();
  const double nb = in.n_replicas;
  if (in.perfect_sync) return nb * nb;
  const double q = in.oversampling;
  const auto ph = phase_factor_moments(in.phase_err_variance);
  return expected_H2_tau1(q) + (nb - 1.0) * expected_H2_tauerr(q) +
         (nb - 1.0) * (nb - 2.0) * expected_H_cross(q) * ph.mean * ph.mean +
         2.0 * expected_H_tau1(q) * (nb - 1.0) * expected_H_tauerr(q) * ph.mean;
}

/// Slopes |m_l|, l = 1..3, of the raised cosine at its zero crossings l*Ts
/// (the piecewise-linear approximation around each crossing). Symmetric in l.
inline std::array<double, 3> isi_slopes(const PulseShape& pulse) {
  std::array<double, 3> m{};
  constexpr double h = 1e-6;
  for (int l = 1; l <= 3; ++l) {
    const double up = detail::raised_cosine_symbols(l + h, pulse.rolloff);
    const double dn = detail::raised_cosine_symbols(l - h, pulse.rolloff);
    m[static_cast<std::size_t>(l - 1)] = std::abs(up - dn) / (2.0 * h);
  }
  return m;
}

/// beta = sum over l in {+-1, +-2, +-3} of |m_l|.
inline double isi_slope_sum(const PulseShape& pulse) {
  const auto m = isi_slopes(pulse);
  return 2.0 * (m[0] + m[1] + m[2]);
}

struct IsiMoments {
  double mean{0.0};
  double variance{0.0};
  double avg_power{0.0};
};

inline IsiMoments isi_moments(double beta, int q, int n_replicas, double sigma2) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (q < 1 || n_replicas < 1) throw std::invalid_argument("Q and n_replicas must be >= 1");
  const auto ph = phase_factor_moments(sigma2);
  const double qd = q;
  const double others = n_replicas - 1.0;
  IsiMoments r;
  r.mean = beta / (4.0 * qd) + others * beta / (3.0 * qd) * ph.mean;
  r.variance = beta * beta / (48.0 * qd * qd) + others * beta * beta / (18.0 * qd * qd) * ph.variance;
  r.avg_power = r.variance + r.mean * r.mean;
  return r;
}

struct SnirBreakdown {
  double p_desired{0.0};
  double p_isi{0.0};
  double denom_noise_interf{0.0};
  double snir_eq_db{0.0};
  double snir_ref_db{0.0};
  double degradation_db{0.0};
};

/// Average equivalent SNIR after combining, together with the reference
/// value for perfect synchronization over the same noise and interference.
inline SnirBreakdown equivalent_snir(const SnirModelInput& in) {
  in.validate();
  SnirBreakdown b;
  b.denom_noise_interf =
      std::accumulate(in.interference_powers.begin(), in.interference_powers.end(), 0.0) +
      in.n_replicas * in.noise_power;
  b.p_desired = desired_power(in);
  b.p_isi = in.perfect_sync
                ? 0.0
                : isi_moments(in.isi_slope_sum, in.oversampling, in.n_replicas, in.phase_err_variance).avg_power;
  const double denom = b.p_isi + b.denom_noise_interf;
  if (!(denom > 0.0) || !(b.denom_noise_interf > 0.0))
    throw std::domain_error("equivalent_snir: zero noise-plus-interference");
  const double nb = in.n_replicas;
  b.snir_eq_db = linear_to_db(b.p_desired / denom);
  b.snir_ref_db = linear_to_db(nb * nb / b.denom_noise_interf);
  b.degradation_db = in.perfect_sync ? 0.0 : b.snir_ref_db - b.snir_eq_db;
  return b;
}

}  // namespace marsala
