#include "mcslab/mcs.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "mcslab/detector.hpp"
#include "mcslab/mathutil.hpp"

namespace mcslab {

void McsTable::validate() const {
  if (entries.empty()) throw ConfigError("mcs table: empty");
  double last_se = 0.0;
  int last_q = 4;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.index != static_cast<int>(i))
      throw ConfigError("mcs table: indices must be 0..n-1 in order");
    if (e.q != 4 && e.q != 16 && e.q != 64)
      throw ConfigError("mcs table: modulation order must be 4, 16 or 64");
    if (!(e.rate > 0.0) || !(e.rate < 1.0))
      throw ConfigError("mcs table: rate must be in (0,1)");
    if (e.q < last_q)
      throw ConfigError("mcs table: blocks must be grouped 4QAM, 16QAM, 64QAM");
    const double se = e.rate * std::log2(static_cast<double>(e.q));
    if (se <= last_se)
      throw ConfigError("mcs table: spectral efficiency must increase");
    last_se = se;
    last_q = e.q;
  }
}

const McsEntry& McsTable::at(int index) const {
  if (index < 0 || index >= static_cast<int>(entries.size()))
    throw ContractError("mcs table: index out of range");
  return entries[index];
}

std::vector<int> McsTable::block_of(int q) const {
  std::vector<int> out;
  for (const auto& e : entries)
    if (e.q == q) out.push_back(e.index);
  return out;
}

McsTable McsTable::from_json_array(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  McsTable t;
  for (const auto& e : j)
    t.entries.push_back({e.at("index").get<int>(), e.at("q").get<int>(),
                         e.at("rate").get<double>()});
  t.validate();
  return t;
}

double predicted_mi_lmmse(const ChannelRealization& h, double rho, int q,
                          const PsiTable& psi, int user) {
  const FeatureVector f = extract_feature(h, rho, q, psi, user);
  return f.values.mean();
}

double effective_sinr_zf(const ChannelRealization& h, double rho, int user) {
  const int l_sub = h.config.n_subcarriers;
  if (user < 0 || user >= h.config.n_ue)
    throw ContractError("effective_sinr_zf: user out of range");
  double acc = 0.0;
  for (int l = 0; l < l_sub; ++l) {
    const Eigen::ArrayXd gamma = zf_sinr(h.h[l], rho);
    acc += std::log2(1.0 + gamma(user));
  }
  acc /= static_cast<double>(l_sub);
  return std::exp2(acc) - 1.0;
}

namespace {

// highest index in one modulation block meeting the reference BLER
std::optional<int> best_in_block(const std::vector<int>& block,
                                 const std::map<int, ExitCurve>& curves,
                                 double mi, double ref_bler) {
  std::optional<int> best;
  for (const int idx : block) {
    const auto it = curves.find(idx);
    if (it == curves.end())
      throw ConfigError("select_mcs: missing EXIT curve for index " +
                        std::to_string(idx));
    if (predict_bler(it->second, mi) <= ref_bler) best = idx;
  }
  return best;
}

}  // namespace

McsDecision select_mcs_mi(const std::map<int, double>& predicted_mi_per_q,
                          const std::map<int, ExitCurve>& exit_curves,
                          const McsTable& table, double ref_bler) {
  McsDecision d;
  d.predicted_mi_per_q = predicted_mi_per_q;
  for (const auto& [q, mi] : predicted_mi_per_q) {
    const auto block = table.block_of(q);
    if (block.empty()) continue;
    d.candidate_per_q[q] = best_in_block(block, exit_curves, mi, ref_bler);
    if (d.candidate_per_q[q] &&
        (!d.selected || *d.candidate_per_q[q] > *d.selected))
      d.selected = d.candidate_per_q[q];
  }
  if (d.selected) {
    const int q = table.at(*d.selected).q;
    d.predicted_bler =
        predict_bler(exit_curves.at(*d.selected), predicted_mi_per_q.at(q));
  }
  return d;
}

McsDecision select_mcs_zf(const ChannelRealization& h, double rho, int user,
                          const std::map<int, SnrBlerCurve>& snr_curves,
                          const McsTable& table, double ref_bler) {
  const double gamma_eff = effective_sinr_zf(h, rho, user);
  const double snr_db = linear_to_db(std::max(gamma_eff, 1e-30));
  McsDecision d;
  for (const auto& e : table.entries) {
    const auto it = snr_curves.find(e.index);
    if (it == snr_curves.end())
      throw ConfigError("select_mcs_zf: missing SNR-BLER curve for index " +
                        std::to_string(e.index));
    const double bler = predict_bler(it->second, snr_db);
    if (bler <= ref_bler) {
      auto& cand = d.candidate_per_q[e.q];
      if (!cand || e.index > *cand) cand = e.index;
      if (!d.selected || e.index > *d.selected) {
        d.selected = e.index;
        d.predicted_bler = bler;
      }
    } else if (!d.candidate_per_q.count(e.q)) {
      d.candidate_per_q[e.q] = std::nullopt;
    }
  }
  return d;
}

McsDecision select_mcs_vss(const ChannelRealization& h, double rho, int user,
                           const std::map<int, IvfPqIndex>& vdb_per_q,
                           const std::map<int, PsiTable>& psi_per_q,
                           const std::map<int, ExitCurve>& exit_curves,
                           const McsTable& table, double ref_bler, int top_k,
                           int p_ivf) {
  std::map<int, double> predicted;
  for (const auto& [q, vdb] : vdb_per_q) {
    if (vdb.size() == 0) throw StateError("select_mcs_vss: empty VDB");
    const FeatureVector f = extract_feature(h, rho, q, psi_per_q.at(q), user);
    const int k = std::min(top_k, vdb.size());
    predicted[q] =
        predict_mi_topk(vdb, f, k, std::min(p_ivf, vdb.k_ivf));
  }
  return select_mcs_mi(predicted, exit_curves, table, ref_bler);
}

}  // namespace mcslab
