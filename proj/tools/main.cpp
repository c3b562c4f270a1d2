#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>

#include "mcslab/harness.hpp"

namespace {

unsigned parts_from_only(const std::string& only) {
  using namespace mcslab;
  if (only.empty()) return kOfflineAll;
  if (only == "psi") return kOfflinePsi | kOfflineCodes;
  if (only == "exit") return kOfflineExit | kOfflineCodes;
  if (only == "snrbler") return kOfflineSnrBler | kOfflineCodes;
  if (only == "vdb") return kOfflineVdb | kOfflineCodes;
  throw mcslab::ConfigError("--only must be one of psi|exit|snrbler|vdb");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCS selection laboratory for uplink MU-MIMO-OFDM"};
  app.require_subcommand(1);

  std::string config_path, only, pipeline = "lmmse_mi", detector = "ep";
  std::string out_dir = ".", in_dir, out_file = "summary.json";

  auto* offline = app.add_subcommand("offline", "Build offline artifacts");
  offline->add_option("--config", config_path, "Simulation config (JSON)")
      ->required();
  offline->add_option("--only", only, "Restrict to psi|exit|snrbler|vdb");

  auto* simulate = app.add_subcommand("simulate", "Run a throughput simulation");
  simulate->add_option("--config", config_path, "Simulation config (JSON)")
      ->required();
  simulate->add_option("--pipeline", pipeline, "zf_sinr|lmmse_mi|vss_mi")
      ->required();
  simulate->add_option("--detector", detector, "lmmse|ep")->required();
  simulate->add_option("--out", out_dir, "Output directory");

  auto* report = app.add_subcommand("report", "Merge run summaries");
  report->add_option("--in", in_dir, "Directory of run outputs")->required();
  report->add_option("--out", out_file, "Merged summary path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (offline->parsed()) {
      const auto config = mcslab::SimConfig::from_file(config_path);
      mcslab::run_offline(config, parts_from_only(only));
      std::printf("artifacts written to %s\n",
                  config.resolved_artifact_dir().string().c_str());
    } else if (simulate->parsed()) {
      const auto config = mcslab::SimConfig::from_file(config_path);
      const auto p = mcslab::pipeline_from_string(pipeline);
      const auto d = mcslab::detector_from_string(detector);
      const auto artifacts = mcslab::load_artifacts(config);
      const auto rep = mcslab::run_throughput(config, p, d, artifacts);
      std::filesystem::create_directories(out_dir);
      const std::string stem = "run_" + pipeline + "_" + detector;
      const auto csv = std::filesystem::path(out_dir) / (stem + ".csv");
      const auto json = std::filesystem::path(out_dir) / (stem + ".json");
      mcslab::emit_report(rep, csv, json);
      for (const auto& s : rep.per_snr)
        std::printf("%s/%s @ %+.1f dB: mean tau_sys = %.3f Mbps, bler = %.4f\n",
                    pipeline.c_str(), detector.c_str(), s.snr_db,
                    s.tau_sys_mean, s.realized_bler);
    } else if (report->parsed()) {
      mcslab::merge_reports(in_dir, out_file);
      std::printf("merged summary written to %s\n", out_file.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
