#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "marsala/config.hpp"
#include "marsala/experiments.hpp"

namespace {

std::string sibling_path(const std::string& out, const std::string& suffix) {
  std::filesystem::path p(out);
  const auto ext = p.extension().string();
  p.replace_extension();
  return p.string() + suffix + (ext.empty() ? ".csv" : ext);
}

void write_file(const std::string& path, const std::vector<std::string>& header, const marsala::CsvTable& t) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open output file '" + path + "'");
  marsala::write_csv(f, header, t);
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
  std::cerr << "wrote " << path << " (" << t.rows.size() << " rows)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replica localization and combining for slotted random access"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out, "output CSV path (overrides the config)");
  app.add_option("--threads", threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);

  auto* analyze = app.add_subcommand("analyze", "closed-form SNIR degradation table");
  auto* phy = app.add_subcommand("phy", "waveform Monte Carlo of phase errors and combined SNIR");
  auto* simulate = app.add_subcommand("simulate", "throughput and PLR versus load");
  auto* demo = app.add_subcommand("localize-demo", "one annotated localization trace");
  for (auto* sub : {analyze, phy, simulate, demo}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    marsala::SimConfig cfg = config_path.empty() ? marsala::parse_config_text("") : marsala::parse_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out) cfg.output = *out;
    if (threads) cfg.threads = *threads;
    cfg.validate();

    if (analyze->parsed()) {
      write_file(cfg.output, marsala::run_header("analyze", cfg), marsala::cmd_analyze(cfg));
    } else if (phy->parsed()) {
      const auto r = marsala::cmd_phy(cfg);
      const auto header = marsala::run_header("phy", cfg);
      write_file(cfg.output, header, r.summary);
      write_file(sibling_path(cfg.output, "_hist"), header, r.histogram);
      write_file(sibling_path(cfg.output, "_snir"), header, r.snir);
    } else if (simulate->parsed()) {
      write_file(cfg.output, marsala::run_header("simulate", cfg), marsala::cmd_simulate(cfg));
    } else if (demo->parsed()) {
      write_file(cfg.output, marsala::run_header("localize-demo", cfg), marsala::cmd_localize_demo(cfg));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
