#include "mcslab/exit_curve.hpp"

#include <algorithm>
#include <cmath>

#include "mcslab/mathutil.hpp"
#include "mcslab/parallel.hpp"

namespace mcslab {

std::vector<double> scalar_awgn_llrs(const std::vector<std::uint8_t>& cw,
                                     const Constellation& c, double snr_db,
                                     Rng& rng) {
  if (cw.size() % c.s != 0)
    throw ContractError("scalar_awgn_llrs: codeword not divisible by S");
  const double n0 = c.es / db_to_linear(snr_db);
  const double sigma = std::sqrt(n0);
  std::vector<double> llr(cw.size());
  Eigen::ArrayXd log_w(c.q);
  for (std::size_t i = 0; i < cw.size(); i += c.s) {
    std::uint32_t label = 0;
    for (int b = 0; b < c.s; ++b) label = (label << 1) | (cw[i + b] & 1u);
    const std::complex<double> y =
        c.points(c.point_of_label[label]) + sigma * rng.cgaussian();
    log_w = -(c.points - y).abs2() / n0;
    log_w -= log_w.maxCoeff();
    llrs_from_log_weights(log_w, c, llr.data() + i);
  }
  return llr;
}

std::vector<McsSweepPoint> awgn_mcs_sweep(const Constellation& c,
                                          const LdpcCode& code,
                                          const std::vector<double>& sweep_snr_db,
                                          int n_blocks, std::uint64_t seed) {
  if (n_blocks < 1) throw ConfigError("awgn_mcs_sweep: n_blocks must be >= 1");
  std::vector<McsSweepPoint> out(sweep_snr_db.size());
  parallel_for(static_cast<int>(sweep_snr_db.size()), [&](int pi) {
    const double snr_db = sweep_snr_db[pi];
    std::vector<std::uint8_t> info(code.k);
    MiAccumulator mi_acc;
    int errors = 0;
    for (int b = 0; b < n_blocks; ++b) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(pi),
                          static_cast<std::uint64_t>(b)));
      for (auto& bit : info) bit = rng.bit() ? 1 : 0;
      const auto cw = encode(code, info);
      const auto llr = scalar_awgn_llrs(cw, c, snr_db, rng);
      for (int i = 0; i < code.n; ++i) mi_acc.add(llr[i], cw[i] & 1);
      const auto dec = decode(code, llr, code.max_bp_iters);
      if (!std::equal(info.begin(), info.end(), dec.info.begin())) ++errors;
    }
    McsSweepPoint pt;
    pt.snr_db = snr_db;
    pt.mean_input_mi = mi_acc.value();
    pt.bler = static_cast<double>(errors) / n_blocks;
    out[pi] = pt;
  });
  return out;
}

std::vector<double> default_mcs_sweep(const PsiTable& psi, double rate,
                                      double step_db) {
  // transition region: input MI within [rate - 0.1, rate + 0.35], clipped
  const double lo_mi = std::clamp(rate - 0.10, 0.02, 0.97);
  const double hi_mi = std::clamp(rate + 0.35, lo_mi + 0.01, 0.995);
  const double lo = psi_inverse(psi, lo_mi);
  const double hi = psi_inverse(psi, hi_mi);
  std::vector<double> sweep;
  sweep.push_back(psi_inverse(psi, 0.02) - 4.0);  // BLER ~ 1 anchor
  for (double s = lo; s <= hi + 1e-9; s += step_db) sweep.push_back(s);
  sweep.push_back(psi_inverse(psi, 0.999) + 4.0);  // BLER ~ 0 anchor
  std::sort(sweep.begin(), sweep.end());
  sweep.erase(std::unique(sweep.begin(), sweep.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-9; }),
              sweep.end());
  return sweep;
}

namespace {

template <typename Curve>
void fill_curve(Curve& curve, std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  // merge duplicate abscissae before the monotone fit
  std::vector<std::pair<double, double>> merged;
  for (const auto& p : pts) {
    if (!merged.empty() && std::abs(p.first - merged.back().first) < 1e-12) {
      merged.back().second = 0.5 * (merged.back().second + p.second);
    } else {
      merged.push_back(p);
    }
  }
  std::vector<double> bler(merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) bler[i] = merged[i].second;
  bler = isotonic_non_increasing(bler);
  curve.points.resize(merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i)
    curve.points[i] = {merged[i].first, std::clamp(bler[i], 0.0, 1.0)};
}

template <typename Curve>
double interp_curve(const Curve& curve, double x) {
  if (curve.points.empty()) throw StateError("predict_bler: empty curve");
  if (x <= curve.points.front().first) return curve.points.front().second;
  if (x >= curve.points.back().first) return curve.points.back().second;
  auto it = std::upper_bound(
      curve.points.begin(), curve.points.end(), x,
      [](double v, const std::pair<double, double>& p) { return v < p.first; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double t = (x - a.first) / (b.first - a.first);
  return a.second + t * (b.second - a.second);
}

}  // namespace

ExitCurve exit_curve_from_sweep(int mcs_index,
                                const std::vector<McsSweepPoint>& pts) {
  ExitCurve curve;
  curve.mcs_index = mcs_index;
  std::vector<std::pair<double, double>> raw;
  raw.reserve(pts.size());
  for (const auto& p : pts) raw.emplace_back(p.mean_input_mi, p.bler);
  fill_curve(curve, std::move(raw));
  return curve;
}

SnrBlerCurve snr_bler_curve_from_sweep(int mcs_index,
                                       const std::vector<McsSweepPoint>& pts) {
  SnrBlerCurve curve;
  curve.mcs_index = mcs_index;
  std::vector<std::pair<double, double>> raw;
  raw.reserve(pts.size());
  for (const auto& p : pts) raw.emplace_back(p.snr_db, p.bler);
  fill_curve(curve, std::move(raw));
  return curve;
}

ExitCurve build_exit_curve(int mcs_index, const Constellation& c,
                           const PsiTable& psi, const LdpcCode& code,
                           const std::vector<double>& sweep_snr_db,
                           int n_blocks, std::uint64_t seed) {
  if (n_blocks < 200)
    throw ConfigError("build_exit_curve: n_blocks must be >= 200");
  (void)psi;
  return exit_curve_from_sweep(
      mcs_index, awgn_mcs_sweep(c, code, sweep_snr_db, n_blocks, seed));
}

SnrBlerCurve build_snr_bler_curve(int mcs_index, const Constellation& c,
                                  const LdpcCode& code,
                                  const std::vector<double>& sweep_snr_db,
                                  int n_blocks, std::uint64_t seed) {
  if (n_blocks < 200)
    throw ConfigError("build_snr_bler_curve: n_blocks must be >= 200");
  return snr_bler_curve_from_sweep(
      mcs_index, awgn_mcs_sweep(c, code, sweep_snr_db, n_blocks, seed));
}

double predict_bler(const ExitCurve& curve, double mi) {
  return interp_curve(curve, mi);
}

double predict_bler(const SnrBlerCurve& curve, double snr_db) {
  return interp_curve(curve, snr_db);
}

}  // namespace mcslab
