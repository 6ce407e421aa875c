#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "marsala/common.hpp"
#include "marsala/localization.hpp"
#include "marsala/waveform.hpp"

namespace marsala {

inline constexpr double kSnirCapDb = 60.0;
inline constexpr double kPacketErrorFloor = 1e-5;

struct CombineResult {
  std::vector<cplx> symbols;
  double measured_snir_db{0.0};
  int contributors{0};
};

/// Shifts the replica by the detected lag (sample n of the output is replica
/// sample n + lag) and removes the estimated phase. Samples shifted in from
/// outside the slot are zero.
inline std::vector<cplx> align_and_correct(std::span<const cplx> replica, const CorrelationPeak& peak) {
  const int n = static_cast<int>(replica.size());
  if (std::abs(peak.lag_samples) >= n) throw std::out_of_range("lag moves the window outside the slot");
  const cplx rot = std::polar(1.0, -peak.phase_estimate);
  std::vector<cplx> out(replica.size());
  for (int i = 0; i < n; ++i) {
    const int src = i + peak.lag_samples;
    if (src >= 0 && src < n) out[static_cast<std::size_t>(i)] = replica[static_cast<std::size_t>(src)] * rot;
  }
  return out;
}

struct DataAidedEstimate {
  cplx gain{};
  double residual_variance{0.0};
  double snir_db{0.0};
};

/// Projects the received symbols onto the known ones; the SNIR is the
/// projected power over the residual variance, capped at kSnirCapDb.
inline DataAidedEstimate estimate_snir(std::span<const cplx> symbols, std::span<const cplx> known) {
  if (symbols.size() != known.size() || symbols.empty())
    throw std::invalid_argument("estimate_snir: length mismatch");
  const double len = static_cast<double>(symbols.size());
  double known_energy = 0.0;
  cplx corr{};
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    corr += symbols[k] * std::conj(known[k]);
    known_energy += std::norm(known[k]);
  }
  if (known_energy == 0.0) throw std::invalid_argument("estimate_snir: known symbols have zero energy");
  DataAidedEstimate e;
  e.gain = corr / len;
  double resid = 0.0;
  double received = 0.0;
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    resid += std::norm(symbols[k] - e.gain * known[k]);
    received += std::norm(symbols[k]);
  }
  if (received == 0.0) throw std::invalid_argument("estimate_snir: zero-energy input");
  e.residual_variance = resid / len;
  const double signal = std::norm(e.gain);
  e.snir_db = (e.residual_variance <= signal * db_to_linear(-kSnirCapDb))
                  ? kSnirCapDb
                  : std::min(kSnirCapDb, linear_to_db(signal / e.residual_variance));
  return e;
}

inline double measure_snir(std::span<const cplx> symbols, std::span<const cplx> known) {
  return estimate_snir(symbols, known).snir_db;
}

struct SymbolTiming {
  int symbols{0};
  int sample_offset{0};     // coarse timing of the reference packet, in samples
  double freq_offset{0.0};  // genie carrier offset removed before measurement
};

/// Sums the reference with the aligned replicas, matched-filters, samples at
/// the symbol instants and measures the SNIR against the known symbols.
inline CombineResult combine(std::span<const cplx> reference, std::span<const std::vector<cplx>> aligned,
                             const RootPulse& pulse, const SymbolTiming& timing, std::span<const cplx> known) {
  std::vector<cplx> sum(reference.begin(), reference.end());
  for (const auto& a : aligned) {
    if (a.size() != sum.size()) throw std::invalid_argument("combine: replica length mismatch");
    for (std::size_t n = 0; n < sum.size(); ++n) sum[n] += a[n];
  }
  CombineResult r;
  r.contributors = 1 + static_cast<int>(aligned.size());
  r.symbols = matched_filter_symbols(sum, timing.symbols, timing.sample_offset, pulse);
  if (timing.freq_offset != 0.0) {
    const double ts_over_q = pulse.shape().symbol_period / pulse.oversampling();
    for (int k = 0; k < timing.symbols; ++k) {
      const double t = (symbol_sample_index(k, pulse) + timing.sample_offset) * ts_over_q;
      r.symbols[static_cast<std::size_t>(k)] *= std::polar(1.0, -2.0 * std::numbers::pi * timing.freq_offset * t);
    }
  }
  if (!known.empty()) r.measured_snir_db = measure_snir(r.symbols, known);
  return r;
}

/// Threshold decoding: at or above the decoding point a packet fails only
/// with the residual packet error rate; below it, always. `uniform_draw` is a
/// U[0,1) variate owned by the caller.
inline bool decode_decision(double snir_db, const ModCod& modcod, double uniform_draw,
                            double error_floor = kPacketErrorFloor) {
  if (snir_db < modcod.decode_threshold_db) return false;
  return uniform_draw >= error_floor;
}

inline bool decode_decision(double snir_db, const ModCod& modcod, Rng& rng, double error_floor = kPacketErrorFloor) {
  return decode_decision(snir_db, modcod, std::uniform_real_distribution<double>(0.0, 1.0)(rng), error_floor);
}

}  // namespace marsala
