#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

#include "marsala/combiner.hpp"
#include "marsala/common.hpp"
#include "marsala/replica_trial.hpp"
#include "marsala/snir_model.hpp"
#include "marsala/waveform.hpp"

// Frame-level CRDSA / MARSALA simulation with successive interference
// cancellation. Packets are equi-powered; interferers on a slot are taken as
// fully overlapping, so the interference seen on a slot is the number of
// undecoded co-channel packets plus the residual fraction of cancelled ones.
namespace marsala {

enum class Fidelity { analytic, waveform };
enum class Scheme { crdsa, marsala };

struct FrameConfig {
  int n_slots{100};
  int n_replicas{2};
  int symbols_per_slot{536};
  double es_n0_db{7.0};
  double residual_cancel_fraction{0.0};  // power left behind after cancelling a packet
  Fidelity fidelity{Fidelity::analytic};
  double packet_error_floor{kPacketErrorFloor};

  void validate() const {
    if (n_replicas < 2) throw std::invalid_argument("n_replicas must be >= 2");
    if (n_slots <= n_replicas) throw std::invalid_argument("n_slots must exceed n_replicas");
    if (symbols_per_slot < 1) throw std::invalid_argument("symbols_per_slot must be >= 1");
    if (std::isnan(es_n0_db) || es_n0_db == -std::numeric_limits<double>::infinity())
      throw std::invalid_argument("es_n0_db must be a number or +inf");
    if (!(residual_cancel_fraction >= 0.0 && residual_cancel_fraction < 1.0))
      throw std::invalid_argument("residual_cancel_fraction must lie in [0,1)");
    if (!(packet_error_floor >= 0.0 && packet_error_floor < 1.0))
      throw std::invalid_argument("packet_error_floor must lie in [0,1)");
  }
};

struct UserState {
  std::vector<int> slots;                // one per replica, distinct
  std::vector<ChannelState> channels;    // per replica
  double freq_offset{0.0};               // constant over the frame
  double lottery{1.0};                   // U[0,1) draw for the residual packet error
  bool decoded{false};
};

struct FrameState {
  int n_slots{0};
  std::vector<UserState> users;
  std::vector<std::vector<int>> slot_users;
  int iterations{0};

  /// Interference power seen by `user` on `slot` (unit packet power).
  double interference(int slot, int user, double residual) const {
    double i = 0.0;
    for (int v : slot_users[static_cast<std::size_t>(slot)]) {
      if (v == user) continue;
      i += users[static_cast<std::size_t>(v)].decoded ? residual : 1.0;
    }
    return i;
  }

  /// Undecoded packets other than `user` on `slot`.
  int active_interferers(int slot, int user) const {
    int n = 0;
    for (int v : slot_users[static_cast<std::size_t>(slot)])
      if (v != user && !users[static_cast<std::size_t>(v)].decoded) ++n;
    return n;
  }

  int decoded_count() const {
    return static_cast<int>(std::count_if(users.begin(), users.end(), [](const UserState& u) { return u.decoded; }));
  }
};

inline FrameState generate_frame(int n_users, const FrameConfig& config, std::uint64_t seed,
                                 const PulseShape& pulse = {}) {
  config.validate();
  if (n_users < 0) throw std::invalid_argument("n_users must be >= 0");
  if (config.n_replicas > config.n_slots) throw std::invalid_argument("more replicas than slots");
  Rng rng(seed);
  FrameState f;
  f.n_slots = config.n_slots;
  f.slot_users.resize(static_cast<std::size_t>(config.n_slots));
  std::uniform_int_distribution<int> pick(0, config.n_slots - 1);
  for (int u = 0; u < n_users; ++u) {
    UserState us;
    while (static_cast<int>(us.slots.size()) < config.n_replicas) {
      const int s = pick(rng);
      if (std::find(us.slots.begin(), us.slots.end(), s) == us.slots.end()) us.slots.push_back(s);
    }
    us.freq_offset = draw_freq_offset(rng, pulse);
    for (int r = 0; r < config.n_replicas; ++r) us.channels.push_back(draw_channel(rng, us.freq_offset, pulse));
    us.lottery = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (int s : us.slots) f.slot_users[static_cast<std::size_t>(s)].push_back(u);
    f.users.push_back(std::move(us));
  }
  return f;
}

/// SNIR of one unit-power packet against `interference` equal-power packets.
inline double slot_snir(double interference, double es_n0_db) {
  if (interference < 0.0) throw std::invalid_argument("interference must be >= 0");
  const double n0 = (std::isinf(es_n0_db) && es_n0_db > 0) ? 0.0 : db_to_linear(-es_n0_db);
  return linear_to_db(1.0 / (interference + n0));
}

/// Runs CRDSA SIC passes until one full pass decodes nothing. Returns the
/// number of packets decoded by this call.
inline int crdsa_decode(FrameState& state, const ModCod& modcod, const FrameConfig& config) {
  const double eps = config.residual_cancel_fraction;
  int total = 0;
  for (;;) {
    int pass = 0;
    for (std::size_t u = 0; u < state.users.size(); ++u) {
      UserState& us = state.users[u];
      if (us.decoded) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int s : us.slots) best = std::max(best, slot_snir(state.interference(s, static_cast<int>(u), eps), config.es_n0_db));
      if (decode_decision(best, modcod, us.lottery, config.packet_error_floor)) {
        us.decoded = true;
        ++pass;
      }
    }
    ++state.iterations;
    total += pass;
    if (pass == 0) break;
  }
  return total;
}

/// Receiver-side parameters for replica combination.
struct MarsalaReceiver {
  bool sync_errors{true};
  int oversampling{4};
  double isi_slope_sum{0.0};
  // Phase-error variance by number of interferers on the replica slots; the
  // last entry covers larger counts. Empty means the worst case everywhere.
  std::vector<double> phase_err_table;
  PulseShape pulse{};  // waveform fidelity only

  static constexpr double kWorstCasePhaseVariance = 0.0125;

  static MarsalaReceiver from_pulse(const PulseShape& p, bool sync_errors) {
    MarsalaReceiver r;
    r.pulse = p;
    r.oversampling = p.oversampling;
    r.isi_slope_sum = marsala::isi_slope_sum(p);
    r.sync_errors = sync_errors;
    return r;
  }

  double phase_err_variance(int interferers) const {
    if (phase_err_table.empty()) return kWorstCasePhaseVariance;
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, interferers)), phase_err_table.size() - 1);
    return phase_err_table[i];
  }
};

/// Interference on each replica slot of `user`, reference (lowest power) first.
inline std::vector<double> replica_interference(const FrameState& state, int user, double residual) {
  std::vector<double> powers;
  for (int s : state.users[static_cast<std::size_t>(user)].slots) powers.push_back(state.interference(s, user, residual));
  std::stable_sort(powers.begin(), powers.end());
  return powers;
}

/// Analytic combined SNIR for `user` from the closed-form model.
inline double combined_snir_analytic(const FrameState& state, int user, const FrameConfig& config,
                                     const MarsalaReceiver& rx) {
  SnirModelInput in;
  in.n_replicas = config.n_replicas;
  in.oversampling = rx.oversampling;
  in.isi_slope_sum = rx.isi_slope_sum;
  in.interference_powers = replica_interference(state, user, config.residual_cancel_fraction);
  in.noise_power = db_to_linear(-config.es_n0_db);
  in.perfect_sync = !rx.sync_errors;
  int worst = 0;
  for (int s : state.users[static_cast<std::size_t>(user)].slots) worst = std::max(worst, state.active_interferers(s, user));
  in.phase_err_variance = rx.phase_err_variance(worst);
  const auto b = equivalent_snir(in);
  return rx.sync_errors ? b.snir_eq_db : b.snir_ref_db;
}

/// Waveform combined SNIR: synthesize the replica slots with their current
/// interference, localize by correlation, combine and measure.
inline double combined_snir_waveform(const FrameState& state, int user, const FrameConfig& config,
                                     const MarsalaReceiver& rx, Rng& rng) {
  const double eps = config.residual_cancel_fraction;
  TrialSetup setup;
  setup.symbols = config.symbols_per_slot;
  setup.es_n0_db = config.es_n0_db;
  setup.mode = rx.sync_errors ? SyncMode::estimated : SyncMode::perfect;
  setup.interferers.clear();
  for (int s : state.users[static_cast<std::size_t>(user)].slots) {
    std::vector<double> powers;
    for (int v : state.slot_users[static_cast<std::size_t>(s)]) {
      if (v == user) continue;
      const double p = state.users[static_cast<std::size_t>(v)].decoded ? eps : 1.0;
      if (p > 0.0) powers.push_back(p);
    }
    setup.interferers.push_back(std::move(powers));
  }
  const RootPulse pulse(rx.pulse);
  return run_trial(setup, pulse, rng).snir_db;
}

/// From a CRDSA fixed point, repeatedly combines the replicas of undecoded
/// packets (lowest reference-slot power first); every success is cancelled
/// and CRDSA is resumed. Returns the number of packets decoded by combining.
inline int marsala_decode(FrameState& state, const ModCod& modcod, const FrameConfig& config,
                          const MarsalaReceiver& rx, Rng& rng) {
  const double eps = config.residual_cancel_fraction;
  int combined = 0;
  for (;;) {
    crdsa_decode(state, modcod, config);
    std::vector<std::pair<double, int>> order;
    for (std::size_t u = 0; u < state.users.size(); ++u) {
      if (state.users[u].decoded) continue;
      order.emplace_back(replica_interference(state, static_cast<int>(u), eps).front(), static_cast<int>(u));
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    bool progress = false;
    for (const auto& [ref_power, u] : order) {
      const double snir = config.fidelity == Fidelity::analytic
                              ? combined_snir_analytic(state, u, config, rx)
                              : combined_snir_waveform(state, u, config, rx, rng);
      UserState& us = state.users[static_cast<std::size_t>(u)];
      if (decode_decision(snir, modcod, us.lottery, config.packet_error_floor)) {
        us.decoded = true;
        ++combined;
        progress = true;
        break;
      }
    }
    if (!progress) break;
  }
  return combined;
}

/// Normalized load in bits per symbol: R log2(M) lambda / N_s.
inline double normalized_load(int n_users, const ModCod& modcod, int n_slots) {
  return modcod.bits_per_symbol() * n_users / n_slots;
}

struct LoadPoint {
  int n_users{0};
  double load_g{0.0};
  double throughput_t{0.0};
  double plr{0.0};
  int frames_run{0};
  std::uint64_t seed{0};
  long long lost{0};
};

inline LoadPoint make_load_point(int n_users, const ModCod& modcod, int n_slots, long long lost, int frames,
                                 std::uint64_t seed) {
  LoadPoint p;
  p.n_users = n_users;
  p.load_g = normalized_load(n_users, modcod, n_slots);
  const double offered = static_cast<double>(n_users) * frames;
  p.plr = offered > 0 ? static_cast<double>(lost) / offered : 0.0;
  p.throughput_t = p.load_g * (1.0 - p.plr);
  p.frames_run = frames;
  p.seed = seed;
  p.lost = lost;
  return p;
}

/// Decodes one frame and returns the number of lost packets.
inline int simulate_frame(int n_users, const ModCod& modcod, const FrameConfig& config, const MarsalaReceiver& rx,
                          Scheme scheme, std::uint64_t frame_seed) {
  FrameState f = generate_frame(n_users, config, frame_seed, rx.pulse);
  if (scheme == Scheme::crdsa) {
    crdsa_decode(f, modcod, config);
  } else {
    Rng wrng(derive_seed(frame_seed, 0x5741u));
    marsala_decode(f, modcod, config, rx, wrng);
  }
  return n_users - f.decoded_count();
}

/// Frames are seeded from (seed, frame index) and summed in index order, so
/// the result does not depend on the number of worker threads.
inline LoadPoint run_load_point(int n_users, const ModCod& modcod, const FrameConfig& config,
                                const MarsalaReceiver& rx, Scheme scheme, int n_frames, std::uint64_t seed,
                                int threads = 1) {
  if (n_frames < 1) throw std::invalid_argument("n_frames must be >= 1");
  if (n_users < 0) throw std::invalid_argument("n_users must be >= 0");
  config.validate();
  modcod.validate();
  std::vector<int> lost(static_cast<std::size_t>(n_frames), 0);
  auto work = [&](int worker, int workers) {
    for (int i = worker; i < n_frames; i += workers)
      lost[static_cast<std::size_t>(i)] =
          simulate_frame(n_users, modcod, config, rx, scheme, derive_seed(seed, static_cast<std::uint64_t>(i)));
  };
  const int workers = std::clamp(threads, 1, n_frames);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  const long long total = std::accumulate(lost.begin(), lost.end(), 0LL);
  return make_load_point(n_users, modcod, config.n_slots, total, n_frames, seed);
}

inline std::uint64_t load_seed(std::uint64_t master, int n_users) {
  return derive_seed(master, 0x10ADu, static_cast<std::uint64_t>(n_users));
}

inline std::vector<LoadPoint> sweep_load(std::span<const int> user_counts, const ModCod& modcod,
                                         const FrameConfig& config, const MarsalaReceiver& rx, Scheme scheme,
                                         int n_frames, std::uint64_t master_seed, int threads = 1) {
  std::vector<LoadPoint> out;
  for (int n : user_counts)
    out.push_back(run_load_point(n, modcod, config, rx, scheme, n_frames, load_seed(master_seed, n), threads));
  return out;
}

}  // namespace marsala
