#pragma once

#include <map>
#include <optional>
#include <vector>

#include "mcslab/channel.hpp"
#include "mcslab/exit_curve.hpp"
#include "mcslab/vdb.hpp"

namespace mcslab {

struct McsEntry {
  int index = 0;
  int q = 4;          // modulation order
  double rate = 0.5;  // code rate in (0,1)
};

// Ordered table grouped as a 4QAM block, then 16QAM, then 64QAM, with
// spectral efficiency rate*log2(q) strictly increasing across indices.
struct McsTable {
  std::vector<McsEntry> entries;

  void validate() const;
  const McsEntry& at(int index) const;
  // indices of one modulation block, ascending
  std::vector<int> block_of(int q) const;
  static McsTable from_json_array(const std::string& json_text);
};

struct McsDecision {
  std::optional<int> selected;                    // NONE when empty
  std::map<int, std::optional<int>> candidate_per_q;
  std::map<int, double> predicted_mi_per_q;
  double predicted_bler = 1.0;  // at the chosen index
};

// Eq.-style analytical prediction: mean over subcarriers of
// psi_q(lmmse_sinr). Defined as the mean of the extracted feature vector.
double predicted_mi_lmmse(const ChannelRealization& h, double rho, int q,
                          const PsiTable& psi, int user);

// Capacity-domain average of per-subcarrier ZF SINRs for one user:
// phi^-1(mean phi(gamma)), phi(x) = log2(1+x).
double effective_sinr_zf(const ChannelRealization& h, double rho, int user);

// Per modulation block, the highest index whose EXIT-predicted BLER meets
// ref_bler; the final index is the maximum over the per-Q candidates.
McsDecision select_mcs_mi(const std::map<int, double>& predicted_mi_per_q,
                          const std::map<int, ExitCurve>& exit_curves,
                          const McsTable& table, double ref_bler);

McsDecision select_mcs_zf(const ChannelRealization& h, double rho, int user,
                          const std::map<int, SnrBlerCurve>& snr_curves,
                          const McsTable& table, double ref_bler);

McsDecision select_mcs_vss(const ChannelRealization& h, double rho, int user,
                           const std::map<int, IvfPqIndex>& vdb_per_q,
                           const std::map<int, PsiTable>& psi_per_q,
                           const std::map<int, ExitCurve>& exit_curves,
                           const McsTable& table, double ref_bler, int top_k,
                           int p_ivf);

}  // namespace mcslab
