#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "marsala/common.hpp"
#include "marsala/waveform.hpp"

namespace marsala {

struct CorrelationSeries {
  std::vector<int> lags;
  std::vector<cplx> values;
};

struct CorrelationPeak {
  int slot_index{-1};
  int lag_samples{0};
  cplx peak_value{};
  double phase_estimate{0.0};
  double timing_error_bound{0.0};  // Ts / (2Q), seconds
};

/// Residual synchronization errors after grid-quantized peak detection.
struct SyncErrorModel {
  int oversampling{4};
  double symbol_period{1.0};
  double phase_err_variance{0.0125};

  double timing_half_width() const { return symbol_period / (2.0 * oversampling); }
  double draw_timing_error(Rng& rng) const { return uniform(rng, -timing_half_width(), timing_half_width()); }
  double draw_reference_residual(Rng& rng) const { return draw_timing_error(rng); }
  double draw_phase_error(Rng& rng) const {
    return std::normal_distribution<double>(0.0, std::sqrt(phase_err_variance))(rng);
  }
};

/// R(lag) = (1/overlap) sum_m candidate[m + lag] conj(reference[m]) for every
/// lag in [min_lag, max_lag]; a candidate delayed by D samples peaks at lag D.
/// The reference index m is restricted to [window_begin, window_end) when a
/// window is given (e.g. the payload part of a slot).
inline CorrelationSeries cross_correlate(std::span<const cplx> reference, std::span<const cplx> candidate,
                                         int min_lag, int max_lag, int window_begin = 0, int window_end = -1) {
  if (min_lag > max_lag) throw std::invalid_argument("empty lag window");
  const int nr = static_cast<int>(reference.size());
  const int nc = static_cast<int>(candidate.size());
  const int wb = std::max(0, window_begin);
  const int we = window_end < 0 ? nr : std::min(nr, window_end);
  CorrelationSeries out;
  out.lags.reserve(static_cast<std::size_t>(max_lag - min_lag + 1));
  out.values.reserve(out.lags.capacity());
  for (int lag = min_lag; lag <= max_lag; ++lag) {
    const int lo = std::max(wb, -lag);
    const int hi = std::min(we, nc - lag);
    if (hi <= lo) throw std::invalid_argument("lag window leaves no overlap");
    cplx acc{};
    for (int m = lo; m < hi; ++m)
      acc += candidate[static_cast<std::size_t>(m + lag)] * std::conj(reference[static_cast<std::size_t>(m)]);
    out.lags.push_back(lag);
    out.values.push_back(acc / static_cast<double>(hi - lo));
  }
  return out;
}

inline CorrelationSeries cross_correlate(const SlotSignal& reference, const SlotSignal& candidate, int min_lag,
                                         int max_lag) {
  if (reference.sample_rate != candidate.sample_rate)
    throw std::invalid_argument("slot signals use different sample rates");
  return cross_correlate(reference.samples, candidate.samples, min_lag, max_lag);
}

/// Correlation restricted to the payload part of the reference slot: the
/// guard tails carry pulse leakage and noise but no packet energy.
inline CorrelationSeries cross_correlate_payload(const SlotSignal& reference, const SlotSignal& candidate,
                                                 int min_lag, int max_lag, const PulseShape& pulse) {
  if (reference.sample_rate != candidate.sample_rate)
    throw std::invalid_argument("slot signals use different sample rates");
  const int q = pulse.oversampling;
  const int begin = q * pulse.guard_symbols();
  const int end = begin + q * reference.symbols_per_slot;
  return cross_correlate(reference.samples, candidate.samples, min_lag, max_lag, begin, end);
}

/// Peak of |R| on the sample grid; ties resolve to the smallest lag.
inline CorrelationPeak detect_peak(const CorrelationSeries& series, const PulseShape& pulse) {
  if (series.values.empty() || series.values.size() != series.lags.size())
    throw std::invalid_argument("detect_peak needs a non-empty series");
  std::size_t best = 0;
  for (std::size_t i = 1; i < series.values.size(); ++i) {
    const double a = std::abs(series.values[i]);
    const double b = std::abs(series.values[best]);
    if (a > b || (a == b && series.lags[i] < series.lags[best])) best = i;
  }
  CorrelationPeak p;
  p.lag_samples = series.lags[best];
  p.peak_value = series.values[best];
  p.phase_estimate = std::arg(p.peak_value);
  p.timing_error_bound = pulse.symbol_period / (2.0 * pulse.oversampling);
  return p;
}

/// Reference slot rule: lowest received power, ties to the smallest index.
inline int select_reference(std::span<const std::pair<int, double>> slot_powers) {
  if (slot_powers.empty()) throw std::invalid_argument("select_reference needs at least one slot");
  auto best = slot_powers.begin();
  for (auto it = slot_powers.begin(); it != slot_powers.end(); ++it) {
    if (it->second < 0.0) throw std::invalid_argument("slot power must be >= 0");
    if (it->second < best->second || (it->second == best->second && it->first < best->first)) best = it;
  }
  return best->first;
}

/// Lag search window covering the worst-case offset between two replicas
/// (each up to one symbol early or late) plus one symbol of margin.
inline int default_lag_reach(const PulseShape& pulse) { return 3 * pulse.oversampling; }


struct LocalizationParams {
  int expected_count{1};            // N_b - 1
  double detection_threshold{0.5};  // fraction of the nominal packet power
  double packet_power{1.0};         // nominal power of one packet
  int lag_reach{12};                // search lags in [-reach, reach]
};

/// Correlates the reference slot against every other slot of the frame and
/// keeps the strongest expected_count peaks above threshold. Returns nullopt
/// when fewer replicas than expected are found.
inline std::optional<std::vector<CorrelationPeak>> localize_replicas(std::span<const SlotSignal> frame,
                                                                     int ref_slot,
                                                                     const LocalizationParams& params,
                                                                     const PulseShape& pulse) {
  if (params.expected_count < 1) throw std::invalid_argument("expected_count must be >= 1");
  const SlotSignal* ref = nullptr;
  for (const auto& s : frame)
    if (s.slot_index == ref_slot) ref = &s;
  if (ref == nullptr) throw std::invalid_argument("reference slot not in frame");

  std::vector<CorrelationPeak> found;
  const double level = params.detection_threshold * params.packet_power;
  for (const auto& s : frame) {
    if (s.slot_index == ref_slot) continue;
    auto peak = detect_peak(cross_correlate_payload(*ref, s, -params.lag_reach, params.lag_reach, pulse), pulse);
    if (std::abs(peak.peak_value) > level) {
      peak.slot_index = s.slot_index;
      found.push_back(peak);
    }
  }
  if (static_cast<int>(found.size()) < params.expected_count) return std::nullopt;
  std::stable_sort(found.begin(), found.end(), [](const CorrelationPeak& a, const CorrelationPeak& b) {
    return std::abs(a.peak_value) > std::abs(b.peak_value);
  });
  found.resize(static_cast<std::size_t>(params.expected_count));
  return found;
}

}  // namespace marsala
