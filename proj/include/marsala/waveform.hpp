#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "marsala/common.hpp"
#include "marsala/pulse.hpp"

namespace marsala {

struct ModCod {
  int modulation_order{4};
  double code_rate{1.0 / 3.0};
  double decode_threshold_db{0.0};  // SNIR decoding point

  void validate() const {
    if (modulation_order < 2 || !std::has_single_bit(static_cast<unsigned>(modulation_order)))
      throw std::invalid_argument("modulation_order must be a power of two >= 2");
    if (!(code_rate > 0.0 && code_rate <= 1.0))
      throw std::invalid_argument("code_rate must lie in (0,1]");
    if (!std::isfinite(decode_threshold_db))
      throw std::invalid_argument("decode_threshold_db must be finite");
  }

  double bits_per_symbol() const { return code_rate * std::log2(modulation_order); }
};

// Per-burst impairments: r(t) = y(t + timing_offset) e^{j(phase + 2 pi freq_offset t)}.
struct ChannelState {
  double timing_offset{0.0};  // seconds
  double freq_offset{0.0};    // Hz
  double phase{0.0};          // radians

  void validate(const PulseShape& pulse) const {
    const double ts = pulse.symbol_period;
    if (std::abs(timing_offset) > ts * (1.0 + 1e-12))
      throw std::invalid_argument("timing offset exceeds one symbol period");
    if (freq_offset < 0.0 || freq_offset > 0.01 / ts * (1.0 + 1e-12))
      throw std::invalid_argument("frequency offset outside [0, 0.01/Ts]");
    if (std::abs(phase) > std::numbers::pi + 1e-12)
      throw std::invalid_argument("phase outside [-pi, pi]");
  }
};

/// Draws impairments from the slotted return-link model: timing uniform in
/// [-Ts, Ts], phase uniform in [-pi, pi]; the frequency offset is supplied by
/// the caller because it is held constant per user over a frame.
inline ChannelState draw_channel(Rng& rng, double freq_offset, const PulseShape& pulse) {
  const double ts = pulse.symbol_period;
  ChannelState c;
  c.timing_offset = uniform(rng, -ts, ts);
  c.freq_offset = freq_offset;
  c.phase = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return c;
}

inline double draw_freq_offset(Rng& rng, const PulseShape& pulse) {
  return uniform(rng, 0.0, 0.01 / pulse.symbol_period);
}

struct Burst {
  int user_id{0};
  int replica_index{1};
  int slot_index{0};
  std::vector<cplx> symbols;
  ChannelState channel;
  double power{1.0};  // linear, relative to a nominal packet
};

struct Contributor {
  int user_id{0};
  int replica_index{1};
  double power{1.0};
};

struct SlotSignal {
  int slot_index{0};
  int symbols_per_slot{0};
  double sample_rate{0.0};
  std::vector<cplx> samples;
  std::vector<Contributor> contributors;

  double power() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (const cplx& s : samples) acc += std::norm(s);
    return acc / static_cast<double>(samples.size());
  }
};

// Slot layout: sample n sits at t = n/Q - guard (symbol units). Symbol k of a
// burst with zero timing offset peaks at n = Q*(k + guard). Each slot carries
// guard symbols of pulse tail on either side of the L payload symbols.
inline std::size_t slot_length(int symbols, const RootPulse& pulse) {
  return static_cast<std::size_t>(pulse.oversampling()) *
         static_cast<std::size_t>(symbols + pulse.shape().span_symbols);
}

inline int symbol_sample_index(int k, const RootPulse& pulse) {
  return pulse.oversampling() * (k + pulse.guard_symbols());
}

inline std::vector<cplx> generate_symbols(int count, const ModCod& modcod, Rng& rng) {
  if (count < 1) throw std::invalid_argument("symbol count must be >= 1");
  if (modcod.modulation_order != 4)
    throw std::invalid_argument("only QPSK (modulation_order = 4) is supported");
  const double a = std::numbers::sqrt2 / 2.0;
  std::vector<cplx> out(static_cast<std::size_t>(count));
  for (cplx& s : out) {
    const auto bits = rng();
    s = {(bits & 1u) ? a : -a, (bits & 2u) ? a : -a};
  }
  return out;
}

/// Pulse-shaped burst re-synthesized with a fractional timing offset given in
/// symbol periods: y(t + offset) evaluated on the slot sample grid.
inline std::vector<cplx> synthesize(std::span<const cplx> symbols, const RootPulse& pulse,
                                    double offset_symbols) {
  const int q = pulse.oversampling();
  const int reach = q * (pulse.guard_symbols() + 2);
  std::vector<double> table(static_cast<std::size_t>(2 * reach + 1));
  for (int m = -reach; m <= reach; ++m)
    table[static_cast<std::size_t>(m + reach)] = pulse(static_cast<double>(m) / q + offset_symbols);

  const int n_total = static_cast<int>(slot_length(static_cast<int>(symbols.size()), pulse));
  std::vector<cplx> out(static_cast<std::size_t>(n_total));
  for (int k = 0; k < static_cast<int>(symbols.size()); ++k) {
    const int centre = symbol_sample_index(k, pulse);
    const int lo = std::max(0, centre - reach);
    const int hi = std::min(n_total - 1, centre + reach);
    const cplx a = symbols[static_cast<std::size_t>(k)];
    for (int n = lo; n <= hi; ++n) out[static_cast<std::size_t>(n)] += a * table[static_cast<std::size_t>(n - centre + reach)];
  }
  return out;
}

inline std::vector<cplx> shape_burst(std::span<const cplx> symbols, const RootPulse& pulse) {
  if (symbols.empty()) throw std::invalid_argument("shape_burst needs at least one symbol");
  return synthesize(symbols, pulse, 0.0);
}

/// Multiplies by e^{j(phase + 2 pi df n Ts / Q)} in place.
inline void rotate(std::span<cplx> samples, double phase, double freq_offset, const PulseShape& shape) {
  const double step = 2.0 * std::numbers::pi * freq_offset * shape.symbol_period / shape.oversampling;
  for (std::size_t n = 0; n < samples.size(); ++n)
    samples[n] *= std::polar(1.0, phase + step * static_cast<double>(n));
}

inline std::vector<cplx> apply_channel(std::span<const cplx> symbols, const ChannelState& channel,
                                       const RootPulse& pulse) {
  const double ts = pulse.shape().symbol_period;
  if (std::abs(channel.timing_offset) > ts * (1.0 + 1e-12))
    throw std::invalid_argument("timing offset exceeds one symbol period");
  auto out = synthesize(symbols, pulse, channel.timing_offset / ts);
  rotate(out, channel.phase, channel.freq_offset, pulse.shape());
  return out;
}

inline std::vector<cplx> apply_channel(const Burst& burst, const RootPulse& pulse) {
  auto out = apply_channel(burst.symbols, burst.channel, pulse);
  if (burst.power != 1.0) {
    const double amp = std::sqrt(burst.power);
    for (cplx& s : out) s *= amp;
  }
  return out;
}

/// Per-sample complex noise variance giving the requested Es/N0 at the
/// matched filter output for a unit-power burst.
inline double noise_variance(double es_n0_db, const RootPulse& pulse) {
  if (std::isinf(es_n0_db) && es_n0_db > 0) return 0.0;
  return pulse.oversampling() * db_to_linear(-es_n0_db);
}

inline std::vector<cplx> add_awgn(std::vector<cplx> samples, double es_n0_db, const RootPulse& pulse,
                                  Rng& rng) {
  if (std::isnan(es_n0_db) || (std::isinf(es_n0_db) && es_n0_db < 0))
    throw std::invalid_argument("es_n0_db must be finite or +inf");
  const double var = noise_variance(es_n0_db, pulse);
  if (var == 0.0) return samples;
  std::normal_distribution<double> gauss(0.0, std::sqrt(var / 2.0));
  for (cplx& s : samples) s += cplx(gauss(rng), gauss(rng));
  return samples;
}

inline SlotSignal compose_slot(int slot_index, int symbols_per_slot, std::span<const Burst> bursts,
                               double es_n0_db, const RootPulse& pulse, Rng& rng) {
  SlotSignal slot;
  slot.slot_index = slot_index;
  slot.symbols_per_slot = symbols_per_slot;
  slot.sample_rate = pulse.oversampling() / pulse.shape().symbol_period;
  slot.samples.assign(slot_length(symbols_per_slot, pulse), cplx{});
  for (const Burst& b : bursts) {
    if (b.slot_index != slot_index) throw std::invalid_argument("burst slot index does not match slot");
    if (static_cast<int>(b.symbols.size()) != symbols_per_slot)
      throw std::invalid_argument("burst length does not match slot");
    const auto impaired = apply_channel(b, pulse);
    for (std::size_t n = 0; n < impaired.size(); ++n) slot.samples[n] += impaired[n];
    slot.contributors.push_back({b.user_id, b.replica_index, b.power});
  }
  slot.samples = add_awgn(std::move(slot.samples), es_n0_db, pulse, rng);
  return slot;
}

// Output index m is aligned with input index m: out[m] = (1/Q) sum_j h_j x[m + j].
inline std::vector<cplx> matched_filter(std::span<const cplx> samples, const RootPulse& pulse) {
  const auto taps = pulse.taps();
  const int half = pulse.half_length();
  const double inv_q = 1.0 / pulse.oversampling();
  const int n = static_cast<int>(samples.size());
  std::vector<cplx> out(samples.size());
  for (int m = 0; m < n; ++m) {
    cplx acc{};
    const int lo = std::max(-half, -m);
    const int hi = std::min(half, n - 1 - m);
    for (int j = lo; j <= hi; ++j) acc += taps[static_cast<std::size_t>(j + half)] * samples[static_cast<std::size_t>(m + j)];
    out[static_cast<std::size_t>(m)] = acc * inv_q;
  }
  return out;
}

/// Matched filter evaluated only at the symbol instants Q*(k+guard) + offset.
inline std::vector<cplx> matched_filter_symbols(std::span<const cplx> samples, int count, int sample_offset,
                                                const RootPulse& pulse) {
  const auto taps = pulse.taps();
  const int half = pulse.half_length();
  const double inv_q = 1.0 / pulse.oversampling();
  const int n = static_cast<int>(samples.size());
  std::vector<cplx> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const int m = symbol_sample_index(k, pulse) + sample_offset;
    cplx acc{};
    const int lo = std::max(-half, -m);
    const int hi = std::min(half, n - 1 - m);
    for (int j = lo; j <= hi; ++j) acc += taps[static_cast<std::size_t>(j + half)] * samples[static_cast<std::size_t>(m + j)];
    out[static_cast<std::size_t>(k)] = acc * inv_q;
  }
  return out;
}

inline std::vector<cplx> downsample(std::span<const cplx> filtered, int count, int sample_offset,
                                    const RootPulse& pulse) {
  std::vector<cplx> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const int m = symbol_sample_index(k, pulse) + sample_offset;
    if (m >= 0 && m < static_cast<int>(filtered.size())) out[static_cast<std::size_t>(k)] = filtered[static_cast<std::size_t>(m)];
  }
  return out;
}

}  // namespace marsala
