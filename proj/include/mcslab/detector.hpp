#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <span>
#include <vector>

#include "mcslab/channel.hpp"
#include "mcslab/errors.hpp"
#include "mcslab/modem.hpp"

namespace mcslab {

struct EpConfig {
  int t_iters = 8;
  double damping = 0.5;          // alpha in (0,1]
  double variance_floor = 1e-9;  // final clamp on message variances

  void validate() const;
};

// Post-LMMSE SINR per stream: 1/[(rho H^H H + I)^-1]_mm - 1.
// rho is the per-stream transmit SNR Es/N0 entering the Gram matrix.
Eigen::ArrayXd lmmse_sinr(const Eigen::MatrixXcd& h_l, double rho);

// Post-ZF SINR per stream: rho / [(H^H H)^-1]_mm. Requires N >= M, full rank.
Eigen::ArrayXd zf_sinr(const Eigen::MatrixXcd& h_l, double rho);

// Unbiased LMMSE detector output: per-stream estimate x_hat and effective
// noise variance v (x_hat_m = x_m + e_m, e_m ~ CN(0, v_m)). Equals EP
// module A at the first iteration.
void lmmse_detect(const Eigen::VectorXcd& y, const Eigen::MatrixXcd& h_l,
                  double n0, double es, Eigen::VectorXcd& x_hat,
                  Eigen::ArrayXd& v);

// EP multi-user detector, modules A and B with damped B->A messages.
// Reusable across calls; per-user constellations allow mixed modulation.
class EpDetector {
 public:
  explicit EpDetector(EpConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  // log_weights[m] receives the module-A posterior exponents of the final
  // iteration, shifted so the maximum is 0 and clamped at -kEpExpClamp.
  void detect(const Eigen::VectorXcd& y, const Eigen::MatrixXcd& h_l,
              double n0, double es,
              std::span<const Constellation* const> users,
              std::vector<Eigen::ArrayXd>& log_weights);

  const EpConfig& config() const { return cfg_; }

 private:
  EpConfig cfg_;
  Eigen::MatrixXcd a_, psih_;
  Eigen::VectorXcd r_, x_ba_, x_ab_, g_;
  Eigen::ArrayXd v_ba_, v_ab_, xi_;
  Eigen::LLT<Eigen::MatrixXcd> llt_;
};

// Weight exponents below max - kEpExpClamp are clamped; past +-kLlrMax the
// LLRs saturate anyway.
inline constexpr double kEpExpClamp = 80.0;

std::vector<SymbolPosterior> ep_detect(const Eigen::VectorXcd& y,
                                       const Eigen::MatrixXcd& h_l, double n0,
                                       const Constellation& c,
                                       const EpConfig& cfg);

struct TbDims {
  int r_symbols = 14;
};

// One MU-MIMO TB transmission: modulate, pass through the channel with
// AWGN, detect per resource element, compute bit LLRs. users[m] == nullptr
// marks a silent user (excluded from the transmit vector). bits[m] holds
// R*L*S_m coded bits in codeword order p = (r*L + l)*S + s.
struct TbSimResult {
  Eigen::ArrayXd mi;                      // per user; 0 for silent users
  std::vector<std::vector<double>> llrs;  // per user, codeword order
};

TbSimResult simulate_tb(const ChannelRealization& h, const NoiseModel& noise,
                        std::span<const Constellation* const> users,
                        const EpConfig& cfg, TbDims dims,
                        const std::vector<std::vector<std::uint8_t>>& bits,
                        Rng& rng);

// Per-user TB-level MI of Eq.-style LLRs after EP detection, all users on
// the same constellation.
Eigen::ArrayXd measured_post_mud_mi(
    const ChannelRealization& h, const NoiseModel& noise,
    const Constellation& c, const EpConfig& cfg, TbDims dims,
    const std::vector<std::vector<std::uint8_t>>& true_bits, Rng& rng);

}  // namespace mcslab
