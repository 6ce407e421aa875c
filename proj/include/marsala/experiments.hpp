#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "marsala/config.hpp"
#include "marsala/mac.hpp"
#include "marsala/replica_trial.hpp"
#include "marsala/snir_model.hpp"

// Experiment drivers behind the command line tool. Each returns its tables;
// writing them out is left to the caller.
namespace marsala {

/// Runs fn(i) for i in [0, n) on `threads` workers. Tasks must write only to
/// their own slot of any shared output.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  const int workers = std::clamp(threads, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;  // extra '#' lines after the config header
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header, const CsvTable& t) {
  for (const auto& h : header) os << "# " << h << "\n";
  for (const auto& n : t.notes) os << "# " << n << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << csv_field(t.columns[i]);
  os << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_field(r[i]);
    os << "\n";
  }
}

inline std::vector<std::string> run_header(const std::string& command, const SimConfig& c) {
  std::vector<std::string> h{"marsala " + command, "master seed = " + std::to_string(c.seed)};
  for (auto& line : describe_config(c)) h.push_back(std::move(line));
  return h;
}

// ---------------------------------------------------------------- analyze

inline CsvTable cmd_analyze(const SimConfig& c) {
  CsvTable t;
  t.columns = {"snir_ref_db", "snir_eq_db", "degradation_db", "nb", "q", "sigma_phi2", "i_config"};
  const double beta = isi_slope_sum(c.pulse());
  const double es = c.es_n0_db.front();
  for (double s2 : c.analyze_sigma2) {
    for (const auto& cfg : c.analyze_interference) {
      SnirModelInput in;
      in.n_replicas = static_cast<int>(cfg.size());
      in.oversampling = c.oversampling;
      in.phase_err_variance = s2;
      in.isi_slope_sum = beta;
      in.interference_powers = cfg;
      in.noise_power = std::isinf(es) ? 0.0 : db_to_linear(-es);
      in.perfect_sync = c.analyze_perfect_sync;
      const auto b = equivalent_snir(in);
      t.rows.push_back({format_real(b.snir_ref_db), format_real(b.snir_eq_db), format_real(b.degradation_db),
                        std::to_string(in.n_replicas), std::to_string(c.oversampling), format_real(s2),
                        detail::format_interference(cfg)});
    }
  }
  t.notes.push_back("es_n0_db used = " + format_real(es));
  return t;
}

// -------------------------------------------------------------------- phy

struct PhaseStats {
  int interferers{0};
  double es_n0_db{0.0};
  int trials{0};
  double mean{0.0};
  double variance{0.0};  // unbiased sample variance
  double max_abs_timing_error{0.0};
  std::vector<double> samples;
};

inline std::uint64_t phy_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t key, int trial) {
  return derive_seed(derive_seed(master, tag, key), static_cast<std::uint64_t>(trial));
}

/// Localization of the second replica in a two-slot frame with `interferers`
/// equal-power packets on each slot; returns the residual phase errors.
inline PhaseStats phase_error_stats(const SimConfig& c, int interferers, double es, int trials) {
  const RootPulse pulse(c.pulse());
  const int counts[2] = {interferers, interferers};
  TrialSetup setup = equal_power_setup(counts, c.symbols_per_slot, es);
  setup.mode = SyncMode::estimated;
  setup.modcod = c.modcod();
  PhaseStats st;
  st.interferers = interferers;
  st.es_n0_db = es;
  st.trials = trials;
  st.samples.assign(static_cast<std::size_t>(trials), 0.0);
  std::vector<double> terr(static_cast<std::size_t>(trials), 0.0);
  parallel_for(trials, c.threads, [&](int i) {
    Rng rng(phy_seed(c.seed, 0x9A5Eu, static_cast<std::uint64_t>(interferers), i));
    const auto out = run_trial(setup, pulse, rng);
    st.samples[static_cast<std::size_t>(i)] = out.phase_errors.front();
    terr[static_cast<std::size_t>(i)] = out.timing_errors.front();
  });
  double sum = 0.0;
  for (double x : st.samples) sum += x;
  st.mean = sum / trials;
  double ss = 0.0;
  for (double x : st.samples) ss += (x - st.mean) * (x - st.mean);
  st.variance = trials > 1 ? ss / (trials - 1) : 0.0;
  for (double e : terr) st.max_abs_timing_error = std::max(st.max_abs_timing_error, std::abs(e));
  return st;
}

/// Phase-error variance by interferer count 0..3 at the given Es/N0.
inline std::vector<double> estimate_phase_table(const SimConfig& c, double es) {
  std::vector<double> table;
  for (int k = 0; k <= 3; ++k) table.push_back(phase_error_stats(c, k, es, c.n_trials).variance);
  return table;
}

struct SnirComparison {
  std::vector<double> interference;  // packets per slot
  double es_n0_db{0.0};
  int trials{0};
  double measured_db{0.0};          // mean over trials, estimated sync
  double measured_perfect_db{0.0};  // same draws, perfect sync
  double analytic_eq_db{0.0};
  double analytic_ref_db{0.0};
};

/// Mean measured combined SNIR against the closed-form model, with the
/// model's interference set to the post-matched-filter power of the packets.
inline SnirComparison compare_snir(const SimConfig& c, const std::vector<double>& interference, double es,
                                   int trials, double sigma2) {
  const auto shape = c.pulse();
  const RootPulse pulse(shape);
  TrialSetup setup;
  setup.symbols = c.symbols_per_slot;
  setup.es_n0_db = es;
  setup.modcod = c.modcod();
  setup.interferers.clear();
  for (double k : interference) setup.interferers.emplace_back(static_cast<std::size_t>(std::lround(k)), 1.0);
  std::vector<double> est(static_cast<std::size_t>(trials)), perf(static_cast<std::size_t>(trials));
  std::uint64_t key = 0;
  for (double k : interference) key = key * 31 + static_cast<std::uint64_t>(std::lround(k)) + 1;
  parallel_for(trials, c.threads, [&](int i) {
    Rng rng(phy_seed(c.seed, 0x5C0Fu, key, i));
    const auto draw = draw_trial(setup, shape, rng);
    TrialSetup s = setup;
    s.mode = SyncMode::estimated;
    est[static_cast<std::size_t>(i)] = evaluate_trial(s, draw, pulse).snir_db;
    s.mode = SyncMode::perfect;
    perf[static_cast<std::size_t>(i)] = evaluate_trial(s, draw, pulse).snir_db;
  });
  SnirComparison r;
  r.interference = interference;
  r.es_n0_db = es;
  r.trials = trials;
  for (int i = 0; i < trials; ++i) {
    r.measured_db += est[static_cast<std::size_t>(i)] / trials;
    r.measured_perfect_db += perf[static_cast<std::size_t>(i)] / trials;
  }
  SnirModelInput in;
  in.n_replicas = static_cast<int>(interference.size());
  in.oversampling = shape.oversampling;
  in.phase_err_variance = sigma2;
  in.isi_slope_sum = isi_slope_sum(shape);
  for (double k : interference) in.interference_powers.push_back(std::lround(k) * matched_interference_power(shape));
  in.noise_power = std::isinf(es) ? 0.0 : db_to_linear(-es);
  const auto b = equivalent_snir(in);
  r.analytic_eq_db = b.snir_eq_db;
  r.analytic_ref_db = b.snir_ref_db;
  return r;
}

struct PhyResult {
  CsvTable summary;
  CsvTable histogram;
  CsvTable snir;
  std::vector<PhaseStats> stats;
};

inline std::vector<double> histogram_pdf(const std::vector<double>& xs, int bins, double range) {
  std::vector<double> pdf(static_cast<std::size_t>(bins), 0.0);
  const double width = 2.0 * range / bins;
  for (double x : xs) {
    const int b = static_cast<int>(std::floor((x + range) / width));
    if (b >= 0 && b < bins) pdf[static_cast<std::size_t>(b)] += 1.0;
  }
  for (double& p : pdf) p /= (static_cast<double>(xs.size()) * width);
  return pdf;
}

inline PhyResult cmd_phy(const SimConfig& c) {
  PhyResult r;
  r.summary.columns = {"interferers", "es_n0_db", "trials", "sigma_phi2", "mean_phi", "max_abs_timing_error"};
  r.histogram.columns = {"interferers", "es_n0_db", "bin_center", "pdf"};
  r.snir.columns = {"i_config", "nb", "es_n0_db", "trials", "measured_snir_db", "measured_perfect_db",
                    "analytic_snir_db", "analytic_ref_db", "measured_degradation_db", "analytic_degradation_db",
                    "difference_db"};
  const double width = 2.0 * c.histogram_range / c.histogram_bins;
  for (double es : c.es_n0_db) {
    for (int k : c.phy_interferer_counts) {
      auto st = phase_error_stats(c, k, es, c.n_trials);
      r.summary.rows.push_back({std::to_string(k), format_real(es), std::to_string(st.trials),
                                format_real(st.variance), format_real(st.mean), format_real(st.max_abs_timing_error)});
      const auto pdf = histogram_pdf(st.samples, c.histogram_bins, c.histogram_range);
      for (int b = 0; b < c.histogram_bins; ++b)
        r.histogram.rows.push_back({std::to_string(k), format_real(es), format_real(-c.histogram_range + (b + 0.5) * width),
                                    format_real(pdf[static_cast<std::size_t>(b)])});
      st.samples.clear();
      r.stats.push_back(std::move(st));
    }
    for (const auto& cfg : c.analyze_interference) {
      int worst = 0;
      for (double k : cfg) worst = std::max(worst, static_cast<int>(std::lround(k)));
      MarsalaReceiver rx;
      rx.phase_err_table = c.phase_err_table;
      const auto cmp = compare_snir(c, cfg, es, c.n_trials, rx.phase_err_variance(worst));
      const double md = cmp.measured_perfect_db - cmp.measured_db;
      const double ad = cmp.analytic_ref_db - cmp.analytic_eq_db;
      r.snir.rows.push_back({detail::format_interference(cfg), std::to_string(cfg.size()), format_real(es),
                             std::to_string(cmp.trials), format_real(cmp.measured_db),
                             format_real(cmp.measured_perfect_db), format_real(cmp.analytic_eq_db),
                             format_real(cmp.analytic_ref_db), format_real(md), format_real(ad),
                             format_real(cmp.measured_db - cmp.analytic_eq_db)});
    }
  }
  return r;
}

// --------------------------------------------------------------- simulate

inline CsvTable cmd_simulate(const SimConfig& c) {
  CsvTable t;
  t.columns = {"scheme", "csi", "nb", "es_n0_db", "load_g", "throughput", "plr", "frames", "seed"};
  const auto shape = c.pulse();
  const auto mc = c.modcod();
  for (int nb : c.n_replicas) {
    for (double es : c.es_n0_db) {
      MarsalaReceiver perfect = MarsalaReceiver::from_pulse(shape, false);
      MarsalaReceiver real = MarsalaReceiver::from_pulse(shape, true);
      real.phase_err_table = c.phase_err_auto ? estimate_phase_table(c, es) : c.phase_err_table;
      if (c.phase_err_auto) t.notes.push_back("es_n0_db " + format_real(es) + " phase_err_table = " +
                                              detail::join(real.phase_err_table));
      FrameConfig fr_real = c.frame(nb, es);
      FrameConfig fr_perf = fr_real;
      fr_perf.residual_cancel_fraction = 0.0;
      for (Scheme scheme : {Scheme::crdsa, Scheme::marsala}) {
        for (bool is_real : {false, true}) {
          const auto& rx = is_real ? real : perfect;
          const auto& fr = is_real ? fr_real : fr_perf;
          for (int n : c.users) {
            const auto seed = load_seed(c.seed, n);
            const auto p = run_load_point(n, mc, fr, rx, scheme, c.n_frames, seed, c.threads);
            t.rows.push_back({scheme == Scheme::crdsa ? "crdsa" : "marsala", is_real ? "real" : "perfect",
                              std::to_string(nb), format_real(es), format_real(p.load_g),
                              format_real(p.throughput_t), format_real(p.plr), std::to_string(p.frames_run),
                              std::to_string(p.seed)});
          }
        }
      }
    }
  }
  return t;
}

// ---------------------------------------------------------- localize-demo

inline CsvTable cmd_localize_demo(const SimConfig& c) {
  const auto shape = c.pulse();
  const RootPulse pulse(shape);
  TrialSetup setup;
  setup.symbols = c.symbols_per_slot;
  setup.es_n0_db = c.es_n0_db.front();
  setup.modcod = c.modcod();
  setup.mode = SyncMode::estimated;
  setup.interferers.clear();
  for (double k : c.analyze_interference.front())
    setup.interferers.emplace_back(static_cast<std::size_t>(std::lround(k)), 1.0);
  Rng rng(derive_seed(c.seed, 0xDE30u));
  const auto draw = draw_trial(setup, shape, rng);
  std::vector<CorrelationSeries> trace;
  const auto out = evaluate_trial(setup, draw, pulse, &trace);

  CsvTable t;
  t.columns = {"replica", "lag", "corr_re", "corr_im", "corr_abs", "is_peak"};
  t.notes.push_back("slots = " + detail::format_interference(c.analyze_interference.front()) +
                    " interferers, es_n0_db = " + format_real(setup.es_n0_db));
  t.notes.push_back("reference replica = " + std::to_string(out.reference_replica));
  int replica = 0;
  for (std::size_t i = 0; i < trace.size(); ++i, ++replica) {
    if (replica == out.reference_replica) ++replica;
    t.notes.push_back("replica " + std::to_string(replica) + ": true lag = " + format_real(out.true_lags[i]) +
                      " samples, detected lag = " + std::to_string(out.lags[i]) +
                      ", timing error = " + format_real(out.timing_errors[i]) +
                      " Ts, phase error = " + format_real(out.phase_errors[i]) + " rad");
    for (std::size_t j = 0; j < trace[i].lags.size(); ++j) {
      const auto v = trace[i].values[j];
      t.rows.push_back({std::to_string(replica), std::to_string(trace[i].lags[j]), format_real(v.real()),
                        format_real(v.imag()), format_real(std::abs(v)),
                        trace[i].lags[j] == out.lags[i] ? "1" : "0"});
    }
  }
  t.notes.push_back("combined snir = " + format_real(out.snir_db) + " dB");
  return t;
}

}  // namespace marsala
