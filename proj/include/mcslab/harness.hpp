#pragma once

#include <map>
#include <string>
#include <vector>

#include "mcslab/config.hpp"
#include "mcslab/exit_curve.hpp"
#include "mcslab/ldpc.hpp"
#include "mcslab/mcs.hpp"
#include "mcslab/vdb.hpp"

namespace mcslab {

enum class Pipeline { zf_sinr, lmmse_mi, vss_mi };
enum class DetectorKind { lmmse, ep };

std::string to_string(Pipeline p);
std::string to_string(DetectorKind d);
Pipeline pipeline_from_string(const std::string& s);
DetectorKind detector_from_string(const std::string& s);

struct ArtifactSet {
  std::map<int, PsiTable> psi;           // by modulation order
  std::map<int, ExitCurve> exit_curves;  // by MCS index
  std::map<int, SnrBlerCurve> snr_curves;
  std::map<int, LdpcCode> codes;  // by MCS index
  std::map<int, IvfPqIndex> vdb;  // by modulation order
};

enum OfflineParts : unsigned {
  kOfflinePsi = 1u << 0,
  kOfflineCodes = 1u << 1,
  kOfflineExit = 1u << 2,
  kOfflineSnrBler = 1u << 3,
  kOfflineVdb = 1u << 4,
  kOfflineAll = 0x1F,
};

// Builds and persists offline artifacts under the resolved artifact dir.
// Parts not selected are neither built nor written (codes are always built;
// curves and VDBs depend on them).
ArtifactSet run_offline(const SimConfig& config, unsigned parts = kOfflineAll);

// Loads previously persisted artifacts.
ArtifactSet load_artifacts(const SimConfig& config, unsigned parts = kOfflineAll);

struct DecisionRow {
  double snr_db = 0.0;
  int channel = 0;
  int frame = 0;
  int slot_begin = 0;
  int slot_end = 0;  // exclusive
  int user = 0;
  int mcs_index = -1;  // -1 = NONE
  int q = 0;
  double rate = 0.0;
  double predicted_mi = -1.0;  // -1 for the SINR-based pipeline
  double predicted_bler = 1.0;
  int tb_sent = 0;
  int tb_errors = 0;
  std::int64_t bits_ok = 0;
};

struct SnrSummary {
  double snr_db = 0.0;
  std::vector<double> tau_sys_mbps;           // one sample per channel
  std::vector<double> tau_user_mbps;          // channel-major, user-minor
  std::map<int, std::int64_t> mcs_pmf;        // selected index -> count
  std::int64_t tb_sent = 0;
  std::int64_t tb_errors = 0;
  double tau_sys_mean = 0.0;
  double realized_bler = 0.0;
};

struct SimReport {
  Pipeline pipeline = Pipeline::lmmse_mi;
  DetectorKind detector = DetectorKind::ep;
  int n_slots = 0;
  int n_ue = 0;
  std::vector<SnrSummary> per_snr;
  std::vector<DecisionRow> rows;
};

SimReport run_throughput(const SimConfig& config, Pipeline pipeline,
                         DetectorKind detector, const ArtifactSet& artifacts);

// CSV of per-(frame, user) decisions plus a JSON summary with CDF samples,
// the MCS PMF and mean throughputs. Output is byte-stable for fixed inputs.
void emit_report(const SimReport& report, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path);

// Merges run summaries (written by emit_report) found under a directory.
void merge_reports(const std::filesystem::path& in_dir,
                   const std::filesystem::path& out_json);

// Code length of one TB for entry e under the configured dimensions.
int tb_code_length(const SimConfig& config, const McsEntry& e);

}  // namespace mcslab
