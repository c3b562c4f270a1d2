#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcslab/channel.hpp"
#include "mcslab/detector.hpp"
#include "mcslab/mcs.hpp"

namespace mcslab {

// 5G-numerology slot duration at 30 kHz subcarrier spacing.
inline constexpr double kTslotSeconds = 0.5e-3;

struct VdbParams {
  int k_ivf = 0;  // 0 selects 4*sqrt(D_VDB)
  int d_sub = 2;
  int p_ivf = 40;
  int top_k = 20;
  int n_channels = 800;  // per SNR grid point, per modulation
};

struct PsiParams {
  double snr_min_db = -20.0;
  double snr_max_db = 30.0;
  double step_db = 0.5;
  int n_symbols = 100000;
};

struct CurveParams {
  int n_blocks = 500;
  double step_db = 0.25;
};

struct SeedSet {
  std::uint64_t psi = 101;
  std::uint64_t ldpc = 202;
  std::uint64_t curves = 303;
  std::uint64_t vdb = 404;
  std::uint64_t eval = 505;
};

struct SimConfig {
  ChannelConfig channel;
  EpConfig detector;
  TbDims tb;
  McsTable mcs_table;
  std::vector<double> snr_list_db;  // per-stream transmit SNR Es/N0
  int n_slots = 20;
  int mcs_update_period = 20;
  double ref_bler = 0.01;
  int n_eval_channels = 50;
  VdbParams vdb;
  PsiParams psi;
  CurveParams curves;
  SeedSet seeds;
  std::string artifact_dir = "artifacts";

  void validate() const;
  // Resolves artifact_dir against MCSLAB_CACHE_DIR when relative.
  std::filesystem::path resolved_artifact_dir() const;

  static SimConfig from_json_text(const std::string& text);
  static SimConfig from_file(const std::filesystem::path& path);
  std::string to_json_text() const;
};

}  // namespace mcslab
