#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "marsala/combiner.hpp"
#include "marsala/common.hpp"
#include "marsala/localization.hpp"
#include "marsala/waveform.hpp"

// One waveform-level MARSALA combining attempt: N_b slots, each holding a
// replica of the packet of interest plus its own interferers and noise.
namespace marsala {

enum class SyncMode {
  estimated,  // correlation-based lag and phase estimation
  injected,   // residual errors drawn from SyncErrorModel, no estimation
  perfect,    // replicas on the sample grid, exact phase correction
};

struct TrialSetup {
  int symbols{536};
  double es_n0_db{7.0};
  // One entry per replica slot; each lists the powers of the interfering
  // packets on that slot. Its size is N_b.
  std::vector<std::vector<double>> interferers{{}, {}};
  SyncMode mode{SyncMode::estimated};
  SyncErrorModel sync{};  // used in injected mode
  ModCod modcod{};
};

inline TrialSetup equal_power_setup(std::span<const int> counts, int symbols, double es_n0_db) {
  TrialSetup s;
  s.symbols = symbols;
  s.es_n0_db = es_n0_db;
  s.interferers.clear();
  for (int c : counts) s.interferers.emplace_back(static_cast<std::size_t>(c), 1.0);
  return s;
}

struct TrialOutcome {
  double snir_db{0.0};
  int reference_replica{0};
  std::vector<double> phase_errors;   // one per non-reference replica, radians
  std::vector<double> timing_errors;  // seconds
  std::vector<int> lags;
  std::vector<double> true_lags;  // continuous, in samples
};

inline double wrap_phase(double x) {
  return std::remainder(x, 2.0 * std::numbers::pi);
}

/// Random content of one trial, drawn up front so several sync modes can be
/// evaluated on the same interference and noise.
struct TrialDraw {
  std::vector<cplx> symbols;
  double freq_offset{0.0};
  std::vector<ChannelState> replica_channels;
  std::vector<std::vector<Burst>> interferers;
  std::vector<std::uint64_t> noise_seeds;
  std::vector<double> injected_timing;  // injected mode: tau_1 then tau_1 + err_i
  std::vector<double> injected_phase;   // injected mode: phi_err_i (index 0 unused)
};

inline TrialDraw draw_trial(const TrialSetup& setup, const PulseShape& shape, Rng& rng) {
  const std::size_t nb = setup.interferers.size();
  if (nb < 1) throw std::invalid_argument("trial needs at least one replica slot");
  TrialDraw d;
  d.symbols = generate_symbols(setup.symbols, setup.modcod, rng);
  d.freq_offset = draw_freq_offset(rng, shape);
  for (std::size_t i = 0; i < nb; ++i) {
    d.replica_channels.push_back(draw_channel(rng, d.freq_offset, shape));
    std::vector<Burst> slot;
    for (double p : setup.interferers[i]) {
      Burst b;
      b.user_id = static_cast<int>(slot.size()) + 1;
      b.slot_index = static_cast<int>(i);
      b.symbols = generate_symbols(setup.symbols, setup.modcod, rng);
      b.channel = draw_channel(rng, draw_freq_offset(rng, shape), shape);
      b.power = p;
      slot.push_back(std::move(b));
    }
    d.interferers.push_back(std::move(slot));
    d.noise_seeds.push_back(rng());
  }
  const double tau1 = setup.sync.draw_reference_residual(rng);
  d.injected_timing.push_back(tau1);
  d.injected_phase.push_back(0.0);
  for (std::size_t i = 1; i < nb; ++i) {
    d.injected_timing.push_back(tau1 + setup.sync.draw_timing_error(rng));
    d.injected_phase.push_back(setup.sync.draw_phase_error(rng));
  }
  return d;
}

/// `trace`, when given, receives the correlation series of each non-reference
/// replica (estimated mode only).
inline TrialOutcome evaluate_trial(const TrialSetup& setup, const TrialDraw& d, const RootPulse& pulse,
                                   std::vector<CorrelationSeries>* trace = nullptr) {
  const auto& shape = pulse.shape();
  const int q = shape.oversampling;
  const double ts = shape.symbol_period;
  const std::size_t nb = setup.interferers.size();

  std::vector<ChannelState> chan = d.replica_channels;
  if (setup.mode == SyncMode::perfect) {
    for (auto& c : chan) c.timing_offset = 0.0;
  } else if (setup.mode == SyncMode::injected) {
    for (std::size_t i = 0; i < nb; ++i) chan[i].timing_offset = d.injected_timing[i];
  }

  std::vector<SlotSignal> slots;
  for (std::size_t i = 0; i < nb; ++i) {
    std::vector<Burst> bursts = d.interferers[i];
    Burst own;
    own.user_id = 0;
    own.replica_index = static_cast<int>(i) + 1;
    own.slot_index = static_cast<int>(i);
    own.symbols = d.symbols;
    own.channel = chan[i];
    bursts.push_back(std::move(own));
    Rng noise(d.noise_seeds[i]);
    slots.push_back(compose_slot(static_cast<int>(i), setup.symbols, bursts, setup.es_n0_db, pulse, noise));
  }

  TrialOutcome out;
  std::size_t ref = 0;
  if (setup.mode == SyncMode::estimated) {
    std::vector<std::pair<int, double>> powers;
    for (std::size_t i = 0; i < nb; ++i) powers.emplace_back(static_cast<int>(i), slots[i].power());
    ref = static_cast<std::size_t>(select_reference(powers));
  }
  out.reference_replica = static_cast<int>(ref);

  std::vector<std::vector<cplx>> aligned;
  const int reach = default_lag_reach(shape);
  for (std::size_t i = 0; i < nb; ++i) {
    if (i == ref) continue;
    // Continuous lag that maps this replica onto the reference, and the
    // phase the aligned replica carries relative to the reference.
    const double true_lag = (chan[ref].timing_offset - chan[i].timing_offset) / ts * q;
    CorrelationPeak peak;
    if (setup.mode == SyncMode::estimated) {
      auto series = cross_correlate_payload(slots[ref], slots[i], -reach, reach, shape);
      peak = detect_peak(series, shape);
      if (trace != nullptr) trace->push_back(std::move(series));
    } else {
      peak.lag_samples = static_cast<int>(std::lround(true_lag));
    }
    const double true_phase = chan[i].phase - chan[ref].phase +
                              2.0 * std::numbers::pi * d.freq_offset * ts * peak.lag_samples / q;
    if (setup.mode == SyncMode::perfect) {
      peak.phase_estimate = wrap_phase(true_phase);
    } else if (setup.mode == SyncMode::injected) {
      peak.phase_estimate = wrap_phase(true_phase + d.injected_phase[i]);
    }
    out.lags.push_back(peak.lag_samples);
    out.true_lags.push_back(true_lag);
    out.phase_errors.push_back(wrap_phase(peak.phase_estimate - true_phase));
    out.timing_errors.push_back((peak.lag_samples - true_lag) * ts / q);
    aligned.push_back(align_and_correct(slots[i].samples, peak));
  }

  SymbolTiming timing;
  timing.symbols = setup.symbols;
  timing.sample_offset = -static_cast<int>(std::lround(chan[ref].timing_offset / ts * q));
  timing.freq_offset = d.freq_offset;
  out.snir_db = combine(slots[ref].samples, aligned, pulse, timing, d.symbols).measured_snir_db;
  return out;
}

inline TrialOutcome run_trial(const TrialSetup& setup, const RootPulse& pulse, Rng& rng) {
  return evaluate_trial(setup, draw_trial(setup, pulse.shape(), rng), pulse);
}

/// Post-matched-filter power of one equal-power interferer, averaged over its
/// random timing: the folded raised cosine energy, 1 - alpha/4.
inline double matched_interference_power(const PulseShape& shape) { return 1.0 - shape.rolloff / 4.0; }

}  // namespace marsala
