#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "mcslab/errors.hpp"
#include "mcslab/rng.hpp"

namespace mcslab {

// LLR clamp, natural-log units. Bounds exp() in downstream consumers while
// keeping the per-bit MI error below 1e-15.
inline constexpr double kLlrMax = 40.0;

// Square QAM with reflected-Gray labeling per I/Q axis. The first S/2 bits
// of a label select the I level, the rest the Q level.
struct Constellation {
  int q = 4;       // order
  int s = 2;       // bits per symbol
  double es = 1.0;  // average energy, mean |point|^2 == es exactly
  Eigen::ArrayXcd points;             // indexed by point id
  Eigen::ArrayXd point_sq;            // |point|^2
  std::vector<std::uint32_t> labels;  // Gray label per point id
  std::vector<int> point_of_label;

  static Constellation make(int q, double es = 1.0);

  // bit s_pos of the label of point id; s_pos 0 is the first bit of the
  // S-bit word a symbol consumes from the stream
  int bit_of(int point_id, int s_pos) const {
    return static_cast<int>((labels[point_id] >> (s - 1 - s_pos)) & 1u);
  }
};

// Unnormalized symbol likelihoods q(chi), one weight per constellation point.
struct SymbolPosterior {
  Eigen::ArrayXd weights;
};

// Tabulated SNR(dB) -> per-bit MI conversion for Q-QAM over scalar AWGN.
struct PsiTable {
  int q = 0;
  std::vector<double> snr_grid_db;
  std::vector<double> mi;
};

std::vector<std::complex<double>> modulate(std::span<const std::uint8_t> bits,
                                           const Constellation& c);

// Bit-wise LLRs ln(sum_{bit=1} q / sum_{bit=0} q), clamped to +-kLlrMax.
// Computed with max-star over log-weights; invariant under positive
// rescaling of the weights.
Eigen::ArrayXd posterior_llrs(const SymbolPosterior& p, const Constellation& c);

// Same computation from log-domain weights (detector hot path).
void llrs_from_log_weights(const Eigen::ArrayXd& log_w, const Constellation& c,
                           double* out);

// TB-level MI estimate: 1 - mean log2(1 + exp(-(2c-1) lambda)), clamped to [0,1].
double measure_tb_mi(std::span<const double> llrs,
                     std::span<const std::uint8_t> true_bits);

// Streaming form used by the simulators.
struct MiAccumulator {
  double eta_sum = 0.0;
  std::int64_t n_bits = 0;
  void add(double llr, int bit);
  double value() const;
};

PsiTable build_psi_table(int q, const std::vector<double>& snr_grid_db,
                         int n_symbols, std::uint64_t seed);

double psi_eval(const PsiTable& t, double snr_db);
// Smallest abscissa achieving the MI; clamps to the grid ends.
double psi_inverse(const PsiTable& t, double mi);

}  // namespace mcslab
