#include "mcslab/channel.hpp"

#include <cmath>
#include <complex>

namespace mcslab {

void ChannelConfig::validate() const {
  if (n_rx < 1 || n_ue < 1 || n_subcarriers < 1 || n_taps < 1)
    throw ConfigError("channel: dimensions must be >= 1");
  if (fft_size < n_subcarriers)
    throw ConfigError("channel: fft_size must be >= n_subcarriers");
  if (!(pdp_decay > 0.0)) throw ConfigError("channel: pdp_decay must be > 0");
}

NoiseModel NoiseModel::from_es_n0(double es, double n0, int n_ue) {
  NoiseModel nm;
  nm.es = es;
  nm.n0 = n0;
  nm.rho = static_cast<double>(n_ue) * es / n0;
  nm.validate(n_ue);
  return nm;
}

void NoiseModel::validate(int n_ue) const {
  if (!(n0 > 0.0) || !(es > 0.0) || !(rho > 0.0))
    throw ConfigError("noise: n0, es, rho must be > 0");
  if (rho != static_cast<double>(n_ue) * es / n0)
    throw ConfigError("noise: rho != M*es/n0");
}

ChannelRealization generate_channel(const ChannelConfig& config) {
  config.validate();
  const int N = config.n_rx, M = config.n_ue, L = config.n_subcarriers;
  const int T = config.n_taps;

  // normalized exponential PDP: total tap power 1
  std::vector<double> amp(T);
  double total = 0.0;
  for (int t = 0; t < T; ++t) {
    const double p = std::exp(-static_cast<double>(t) / config.pdp_decay);
    amp[t] = p;
    total += p;
  }
  for (int t = 0; t < T; ++t) amp[t] = std::sqrt(amp[t] / total);

  // twiddles e^{-j 2 pi l t / fft_size} for the kept bins
  Eigen::MatrixXcd w(L, T);
  const double step = -2.0 * M_PI / static_cast<double>(config.fft_size);
  for (int l = 0; l < L; ++l)
    for (int t = 0; t < T; ++t)
      w(l, t) = std::polar(1.0, step * static_cast<double>(l) * t);

  ChannelRealization out;
  out.config = config;
  out.seed = config.seed;
  out.h.assign(L, Eigen::MatrixXcd(N, M));

  Rng rng(config.seed);
  Eigen::VectorXcd taps(T);
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      for (int t = 0; t < T; ++t) taps(t) = amp[t] * rng.cgaussian();
      const Eigen::VectorXcd freq = w * taps;
      for (int l = 0; l < L; ++l) out.h[l](n, m) = freq(l);
    }
  }
  return out;
}

Eigen::VectorXcd apply_channel(const Eigen::MatrixXcd& h_l,
                               const Eigen::VectorXcd& x,
                               const NoiseModel& noise, Rng& rng) {
  if (h_l.cols() != x.size())
    throw ContractError("apply_channel: dimension mismatch");
  Eigen::VectorXcd y = h_l * x;
  const double sigma = std::sqrt(noise.n0);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += sigma * rng.cgaussian();
  return y;
}

}  // namespace mcslab
