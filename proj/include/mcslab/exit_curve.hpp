#pragma once

#include <cstdint>
#include <vector>

#include "mcslab/ldpc.hpp"
#include "mcslab/modem.hpp"

namespace mcslab {

// Monotone map from decoder-input MI to post-decoding BLER for one MCS,
// built over scalar AWGN with the true demodulator LLR statistics.
struct ExitCurve {
  int mcs_index = -1;
  std::vector<std::pair<double, double>> points;  // (input_mi asc, bler non-inc)
};

// AWGN SNR(dB) to post-decoding BLER for one MCS.
struct SnrBlerCurve {
  int mcs_index = -1;
  std::vector<std::pair<double, double>> points;  // (snr_db asc, bler non-inc)
};

// One swept AWGN operating point of an (constellation, code) pair.
struct McsSweepPoint {
  double snr_db = 0.0;
  double mean_input_mi = 0.0;  // measured via the TB MI estimator
  double bler = 0.0;
};

// Shared Monte-Carlo engine behind both curve builders: encode random TBs,
// modulate, add scalar AWGN, compute exact LLRs, measure input MI, decode.
std::vector<McsSweepPoint> awgn_mcs_sweep(const Constellation& c,
                                          const LdpcCode& code,
                                          const std::vector<double>& sweep_snr_db,
                                          int n_blocks, std::uint64_t seed);

// SNR sweep covering the BLER transition of a rate-r code plus anchor points
// at both extremes, derived through the psi table.
std::vector<double> default_mcs_sweep(const PsiTable& psi, double rate,
                                      double step_db);

ExitCurve build_exit_curve(int mcs_index, const Constellation& c,
                           const PsiTable& psi, const LdpcCode& code,
                           const std::vector<double>& sweep_snr_db,
                           int n_blocks, std::uint64_t seed);

SnrBlerCurve build_snr_bler_curve(int mcs_index, const Constellation& c,
                                  const LdpcCode& code,
                                  const std::vector<double>& sweep_snr_db,
                                  int n_blocks, std::uint64_t seed);

ExitCurve exit_curve_from_sweep(int mcs_index,
                                const std::vector<McsSweepPoint>& pts);
SnrBlerCurve snr_bler_curve_from_sweep(int mcs_index,
                                       const std::vector<McsSweepPoint>& pts);

double predict_bler(const ExitCurve& curve, double mi);
double predict_bler(const SnrBlerCurve& curve, double snr_db);

// Scalar AWGN link for one codeword: modulate with c, add noise at snr_db,
// return exact demodulator LLRs. Usable as a BlockChannel.
std::vector<double> scalar_awgn_llrs(const std::vector<std::uint8_t>& cw,
                                     const Constellation& c, double snr_db,
                                     Rng& rng);

}  // namespace mcslab
