#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mcslab/errors.hpp"
#include "mcslab/rng.hpp"

namespace mcslab {

// Tapped-delay-line Rayleigh channel: i.i.d. complex Gaussian taps with a
// normalized exponential power-delay profile, transformed to the frequency
// domain. Per-entry average power is 1, so the average received SNR per
// antenna equals M*Es/N0.
struct ChannelConfig {
  int n_rx = 8;          // N
  int n_ue = 4;          // M
  int n_subcarriers = 24;  // L
  int n_taps = 4;
  int fft_size = 32;
  double pdp_decay = 1.3;  // taps; larger = flatter profile
  std::uint64_t seed = 1;

  void validate() const;
};

struct ChannelRealization {
  std::vector<Eigen::MatrixXcd> h;  // L matrices, each N x M
  ChannelConfig config;
  std::uint64_t seed = 0;
};

struct NoiseModel {
  double n0 = 1.0;   // noise power spectral density (linear)
  double es = 1.0;   // per-symbol energy (linear)
  double rho = 1.0;  // average received SNR, rho = M*es/n0

  // rho is derived, never passed: the invariant rho == m*es/n0 holds exactly.
  static NoiseModel from_es_n0(double es, double n0, int n_ue);
  void validate(int n_ue) const;
};

ChannelRealization generate_channel(const ChannelConfig& config);

// y = H x + z with z_i ~ CN(0, N0)
Eigen::VectorXcd apply_channel(const Eigen::MatrixXcd& h_l,
                               const Eigen::VectorXcd& x,
                               const NoiseModel& noise, Rng& rng);

}  // namespace mcslab
