#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "marsala/mac.hpp"
#include "marsala/pulse.hpp"
#include "marsala/waveform.hpp"

// Flat `key = value` experiment configuration. Lists are comma separated;
// `#` starts a comment.
namespace marsala {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct SimConfig {
  // pulse and waveform
  double rolloff{0.2};
  int oversampling{4};
  int span_symbols{40};
  int symbols_per_slot{536};
  // frame
  int n_slots{100};
  std::vector<int> n_replicas{2};
  std::vector<double> es_n0_db{7.0};
  std::vector<int> users{30, 60, 90, 120, 150, 180, 210, 240, 270, 300};
  // modcod
  int modulation_order{4};
  double code_rate{1.0 / 3.0};
  double decode_threshold_db{0.0};
  double packet_error_floor{kPacketErrorFloor};
  // receiver
  double residual_cancel_fraction{0.01};
  bool phase_err_auto{false};
  std::vector<double> phase_err_table;  // empty: worst case 0.0125
  Fidelity fidelity{Fidelity::analytic};
  // analyze
  std::vector<std::vector<double>> analyze_interference{{1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 3}};
  std::vector<double> analyze_sigma2{0.0, 0.0125};
  bool analyze_perfect_sync{false};
  // phy
  std::vector<int> phy_interferer_counts{0, 1, 2, 3};
  int histogram_bins{40};
  double histogram_range{0.5};
  // run control
  int n_frames{1000};
  int n_trials{1000};
  std::uint64_t seed{1};
  std::string output{"out.csv"};
  int threads{1};

  PulseShape pulse() const {
    PulseShape p;
    p.rolloff = rolloff;
    p.span_symbols = span_symbols;
    p.oversampling = oversampling;
    return p;
  }

  ModCod modcod() const {
    ModCod m;
    m.modulation_order = modulation_order;
    m.code_rate = code_rate;
    m.decode_threshold_db = decode_threshold_db;
    return m;
  }

  FrameConfig frame(int nb, double es) const {
    FrameConfig f;
    f.n_slots = n_slots;
    f.n_replicas = nb;
    f.symbols_per_slot = symbols_per_slot;
    f.es_n0_db = es;
    f.residual_cancel_fraction = residual_cancel_fraction;
    f.fidelity = fidelity;
    f.packet_error_floor = packet_error_floor;
    return f;
  }

  void validate() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last)
    throw ConfigError(key, "expected a number, got '" + text + "'");
  return v;
}

inline double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last)
    throw ConfigError(key, "expected a real number, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

inline std::vector<double> parse_real_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) out.push_back(parse_real(key, item));
  return out;
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<int>(key, item));
  return out;
}

inline std::string to_text(double v) { return format_real(v); }
inline std::string to_text(int v) { return std::to_string(v); }
inline std::string to_text(const std::string& v) { return v; }

template <class T>
std::string join(const std::vector<T>& v, std::string_view sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += to_text(v[i]);
  }
  return out;
}

inline std::string format_interference(const std::vector<double>& slots) { return join(slots, "+"); }

}  // namespace detail

inline void SimConfig::validate() const {
  auto need = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  need(rolloff > 0.0 && rolloff < 1.0, "rolloff", "must lie in (0,1)");
  need(oversampling >= 2, "oversampling", "must be >= 2");
  need(span_symbols >= 4 && span_symbols % 2 == 0, "span_symbols", "must be even and >= 4");
  need(symbols_per_slot >= 1, "symbols_per_slot", "must be >= 1");
  need(!n_replicas.empty(), "n_replicas", "must list at least one value");
  for (int nb : n_replicas) {
    need(nb >= 2, "n_replicas", "must be >= 2");
    need(nb < n_slots, "n_replicas", "must be smaller than n_slots");
  }
  need(!es_n0_db.empty(), "es_n0_db", "must list at least one value");
  for (double e : es_n0_db) need(!std::isnan(e) && e > -std::numeric_limits<double>::infinity(), "es_n0_db", "must be a number or inf");
  for (int u : users) need(u >= 0, "users", "must be >= 0");
  need(modulation_order == 4, "modulation_order", "only QPSK (4) is supported");
  need(code_rate > 0.0 && code_rate <= 1.0, "code_rate", "must lie in (0,1]");
  need(std::isfinite(decode_threshold_db), "decode_threshold_db", "must be finite");
  need(packet_error_floor >= 0.0 && packet_error_floor < 1.0, "packet_error_floor", "must lie in [0,1)");
  need(residual_cancel_fraction >= 0.0 && residual_cancel_fraction < 1.0, "residual_cancel_fraction",
       "must lie in [0,1)");
  for (double v : phase_err_table) need(v >= 0.0 && std::isfinite(v), "phase_err_table", "entries must be >= 0");
  for (const auto& c : analyze_interference) {
    need(c.size() >= 2, "analyze_interference", "each configuration needs >= 2 slots");
    for (double i : c) need(i >= 0.0, "analyze_interference", "interference must be >= 0");
  }
  for (double s : analyze_sigma2) need(s >= 0.0 && std::isfinite(s), "analyze_sigma2", "must be >= 0");
  for (int c : phy_interferer_counts) need(c >= 0, "phy_interferer_counts", "must be >= 0");
  need(histogram_bins >= 1, "histogram_bins", "must be >= 1");
  need(histogram_range > 0.0, "histogram_range", "must be > 0");
  need(n_frames >= 1, "n_frames", "must be >= 1");
  need(n_trials >= 1, "n_trials", "must be >= 1");
  need(threads >= 1, "threads", "must be >= 1");
  need(!output.empty(), "output", "must not be empty");
}

/// Applies one key/value pair. Throws ConfigError naming the key.
inline void apply_config_value(SimConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::map<std::string, std::function<void(const std::string&)>> setters{
      {"rolloff", [&](const std::string& v) { c.rolloff = parse_real(key, v); }},
      {"oversampling", [&](const std::string& v) { c.oversampling = parse_number<int>(key, v); }},
      {"span_symbols", [&](const std::string& v) { c.span_symbols = parse_number<int>(key, v); }},
      {"symbols_per_slot", [&](const std::string& v) { c.symbols_per_slot = parse_number<int>(key, v); }},
      {"n_slots", [&](const std::string& v) { c.n_slots = parse_number<int>(key, v); }},
      {"n_replicas", [&](const std::string& v) { c.n_replicas = parse_int_list(key, v); }},
      {"es_n0_db", [&](const std::string& v) { c.es_n0_db = parse_real_list(key, v); }},
      {"users", [&](const std::string& v) { c.users = parse_int_list(key, v); }},
      {"modulation_order", [&](const std::string& v) { c.modulation_order = parse_number<int>(key, v); }},
      {"code_rate", [&](const std::string& v) { c.code_rate = parse_real(key, v); }},
      {"decode_threshold_db", [&](const std::string& v) { c.decode_threshold_db = parse_real(key, v); }},
      {"packet_error_floor", [&](const std::string& v) { c.packet_error_floor = parse_real(key, v); }},
      {"residual_cancel_fraction", [&](const std::string& v) { c.residual_cancel_fraction = parse_real(key, v); }},
      {"phase_err_table",
       [&](const std::string& v) {
         c.phase_err_auto = (v == "auto");
         c.phase_err_table = c.phase_err_auto ? std::vector<double>{} : parse_real_list(key, v);
       }},
      {"fidelity",
       [&](const std::string& v) {
         if (v == "analytic") c.fidelity = Fidelity::analytic;
         else if (v == "waveform") c.fidelity = Fidelity::waveform;
         else throw ConfigError(key, "expected analytic or waveform, got '" + v + "'");
       }},
      {"analyze_interference",
       [&](const std::string& v) {
         c.analyze_interference.clear();
         for (const auto& item : split(v, ',')) c.analyze_interference.push_back(parse_real_list(key, [&] {
             std::string s = item;
             std::replace(s.begin(), s.end(), '+', ',');
             return s;
           }()));
       }},
      {"analyze_sigma2", [&](const std::string& v) { c.analyze_sigma2 = parse_real_list(key, v); }},
      {"analyze_perfect_sync", [&](const std::string& v) { c.analyze_perfect_sync = parse_bool(key, v); }},
      {"phy_interferer_counts", [&](const std::string& v) { c.phy_interferer_counts = parse_int_list(key, v); }},
      {"histogram_bins", [&](const std::string& v) { c.histogram_bins = parse_number<int>(key, v); }},
      {"histogram_range", [&](const std::string& v) { c.histogram_range = parse_real(key, v); }},
      {"n_frames", [&](const std::string& v) { c.n_frames = parse_number<int>(key, v); }},
      {"n_trials", [&](const std::string& v) { c.n_trials = parse_number<int>(key, v); }},
      {"seed", [&](const std::string& v) { c.seed = parse_number<std::uint64_t>(key, v); }},
      {"output", [&](const std::string& v) { c.output = v; }},
      {"threads", [&](const std::string& v) { c.threads = parse_number<int>(key, v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError(key, "unknown key");
  it->second(value);
}

inline SimConfig parse_config_text(std::string_view text) {
  SimConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(body, "line " + std::to_string(lineno) + " is not of the form key = value");
    apply_config_value(c, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
  }
  c.validate();
  return c;
}

inline SimConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

/// The resolved configuration as `key = value` lines; parsing them back
/// yields the same configuration.
inline std::vector<std::string> describe_config(const SimConfig& c) {
  using detail::join;
  const auto real = [](double v) { return format_real(v); };
  std::vector<std::string> interf;
  for (const auto& cfg : c.analyze_interference) interf.push_back(detail::format_interference(cfg));
  return {
      "rolloff = " + real(c.rolloff),
      "oversampling = " + std::to_string(c.oversampling),
      "span_symbols = " + std::to_string(c.span_symbols),
      "symbols_per_slot = " + std::to_string(c.symbols_per_slot),
      "n_slots = " + std::to_string(c.n_slots),
      "n_replicas = " + join(c.n_replicas),
      "es_n0_db = " + join(c.es_n0_db),
      "users = " + join(c.users),
      "modulation_order = " + std::to_string(c.modulation_order),
      "code_rate = " + real(c.code_rate),
      "decode_threshold_db = " + real(c.decode_threshold_db),
      "packet_error_floor = " + real(c.packet_error_floor),
      "residual_cancel_fraction = " + real(c.residual_cancel_fraction),
      "phase_err_table = " + (c.phase_err_auto ? std::string("auto") : join(c.phase_err_table)),
      std::string("fidelity = ") + (c.fidelity == Fidelity::analytic ? "analytic" : "waveform"),
      "analyze_interference = " + join(interf),
      "analyze_sigma2 = " + join(c.analyze_sigma2),
      std::string("analyze_perfect_sync = ") + (c.analyze_perfect_sync ? "true" : "false"),
      "phy_interferer_counts = " + join(c.phy_interferer_counts),
      "histogram_bins = " + std::to_string(c.histogram_bins),
      "histogram_range = " + real(c.histogram_range),
      "n_frames = " + std::to_string(c.n_frames),
      "n_trials = " + std::to_string(c.n_trials),
      "seed = " + std::to_string(c.seed),
      "output = " + c.output,
  };
}

}  // namespace marsala
