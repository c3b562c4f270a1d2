#include "mcslab/detector.hpp"

#include <cmath>

namespace mcslab {

void EpConfig::validate() const {
  if (t_iters < 1) throw ConfigError("ep: t_iters must be >= 1");
  if (!(damping > 0.0) || damping > 1.0)
    throw ConfigError("ep: damping must be in (0,1]");
  if (!(variance_floor > 0.0))
    throw ConfigError("ep: variance_floor must be > 0");
}

namespace {

void check_finite(const Eigen::MatrixXcd& h) {
  if (!h.allFinite()) throw ContractError("detector: non-finite channel matrix");
}

}  // namespace

Eigen::ArrayXd lmmse_sinr(const Eigen::MatrixXcd& h_l, double rho) {
  check_finite(h_l);
  if (!(rho > 0.0)) throw ContractError("lmmse_sinr: rho must be > 0");
  const Eigen::Index m = h_l.cols();
  Eigen::MatrixXcd gram = rho * (h_l.adjoint() * h_l);
  gram.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXcd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw NumericError("lmmse_sinr: factorization failed");
  const Eigen::MatrixXcd inv =
      llt.solve(Eigen::MatrixXcd::Identity(m, m));
  Eigen::ArrayXd out(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = inv(i, i).real();
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericError("lmmse_sinr: ill-conditioned system");
    out(i) = std::max(1.0 / d - 1.0, 0.0);
  }
  return out;
}

Eigen::ArrayXd zf_sinr(const Eigen::MatrixXcd& h_l, double rho) {
  check_finite(h_l);
  if (h_l.rows() < h_l.cols())
    throw ContractError("zf_sinr: requires N >= M");
  if (!(rho > 0.0)) throw ContractError("zf_sinr: rho must be > 0");
  const Eigen::Index m = h_l.cols();
  const Eigen::MatrixXcd gram = h_l.adjoint() * h_l;
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().real().minCoeff() <=
          1e-13 * ldlt.vectorD().real().maxCoeff())
    throw NumericError("zf_sinr: rank-deficient channel");
  const Eigen::MatrixXcd inv = ldlt.solve(Eigen::MatrixXcd::Identity(m, m));
  Eigen::ArrayXd out(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = inv(i, i).real();
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericError("zf_sinr: rank-deficient channel");
    out(i) = rho / d;
  }
  return out;
}

void lmmse_detect(const Eigen::VectorXcd& y, const Eigen::MatrixXcd& h_l,
                  double n0, double es, Eigen::VectorXcd& x_hat,
                  Eigen::ArrayXd& v) {
  const Eigen::Index n = h_l.rows(), m = h_l.cols();
  if (y.size() != n) throw ContractError("lmmse_detect: dimension mismatch");
  Eigen::MatrixXcd a = es * (h_l * h_l.adjoint());
  a.diagonal().array() += n0;
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericError("lmmse_detect: factorization failed");
  const Eigen::MatrixXcd psih = llt.solve(h_l);
  const Eigen::VectorXcd s = llt.solve(y);
  x_hat.resize(m);
  v.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double hph = h_l.col(i).dot(psih.col(i)).real();
    const double xi = 1.0 / hph;
    x_hat(i) = xi * h_l.col(i).dot(s);
    v(i) = xi - es;
  }
}

void EpDetector::detect(const Eigen::VectorXcd& y, const Eigen::MatrixXcd& h_l,
                        double n0, double es,
                        std::span<const Constellation* const> users,
                        std::vector<Eigen::ArrayXd>& log_weights) {
  const Eigen::Index n = h_l.rows(), m = h_l.cols();
  if (y.size() != n || static_cast<Eigen::Index>(users.size()) != m)
    throw ContractError("ep_detect: dimension mismatch");
  if (!y.allFinite()) throw ContractError("ep_detect: non-finite input");
  check_finite(h_l);
  if (!(n0 > 0.0) || !(es > 0.0))
    throw ContractError("ep_detect: n0, es must be > 0");

  x_ba_.setZero(m);
  v_ba_.setConstant(m, es);
  x_ab_.resize(m);
  v_ab_.resize(m);
  xi_.resize(m);
  a_.resize(n, n);
  psih_.resize(n, m);
  r_.resize(n);
  g_.resize(m);
  log_weights.resize(m);

  const double floor = cfg_.variance_floor;
  const double alpha = cfg_.damping;

  for (int t = 0; t < cfg_.t_iters; ++t) {
    // module A: Psi = (N0 I + H V H^H)^-1 via Cholesky, never formed
    a_.noalias() = h_l * v_ba_.matrix().asDiagonal() * h_l.adjoint();
    a_.diagonal().array() += n0;
    llt_.compute(a_);
    if (llt_.info() != Eigen::Success)
      throw NumericError("ep_detect: inner solve failed");
    psih_ = h_l;
    llt_.solveInPlace(psih_);
    r_.noalias() = y - h_l * x_ba_;
    llt_.solveInPlace(r_);
    g_.noalias() = h_l.adjoint() * r_;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double hph = h_l.col(i).dot(psih_.col(i)).real();
      xi_(i) = 1.0 / hph;
      x_ab_(i) = x_ba_(i) + xi_(i) * g_(i);
      v_ab_(i) = std::max(xi_(i) - v_ba_(i), floor);
    }

    // module-A posterior exponents -|chi - x|^2 / v, shifted to max 0
    for (Eigen::Index i = 0; i < m; ++i) {
      const Constellation& c = *users[i];
      Eigen::ArrayXd& lw = log_weights[i];
      lw = -(c.points - x_ab_(i)).abs2() / v_ab_(i);
      lw -= lw.maxCoeff();
      lw = lw.max(-kEpExpClamp);
    }
    if (t + 1 == cfg_.t_iters) break;  // output is the final module-A message

    // module B: discrete-prior moment matching, extrinsic division, damping
    for (Eigen::Index i = 0; i < m; ++i) {
      const Constellation& c = *users[i];
      const Eigen::ArrayXd w = log_weights[i].exp();
      const double s0 = w.sum();
      const std::complex<double> xb = (c.points * w).sum() / s0;
      double vb = (c.point_sq * w).sum() / s0 - std::norm(xb);
      vb = std::max(vb, 1e-30 * es);
      const double inv_ext = 1.0 / vb - 1.0 / v_ab_(i);
      if (!(inv_ext > 0.0) || !std::isfinite(inv_ext)) continue;  // skip update
      const double v_ext = 1.0 / inv_ext;
      const std::complex<double> x_ext =
          v_ext * (xb / vb - x_ab_(i) / v_ab_(i));
      x_ba_(i) = alpha * x_ext + (1.0 - alpha) * x_ba_(i);
      v_ba_(i) = std::max(alpha * v_ext + (1.0 - alpha) * v_ba_(i), floor);
    }
  }
}

std::vector<SymbolPosterior> ep_detect(const Eigen::VectorXcd& y,
                                       const Eigen::MatrixXcd& h_l, double n0,
                                       const Constellation& c,
                                       const EpConfig& cfg) {
  EpDetector det(cfg);
  std::vector<const Constellation*> users(h_l.cols(), &c);
  std::vector<Eigen::ArrayXd> lw;
  det.detect(y, h_l, n0, c.es, users, lw);
  std::vector<SymbolPosterior> out(lw.size());
  for (std::size_t i = 0; i < lw.size(); ++i) out[i].weights = lw[i].exp();
  return out;
}

TbSimResult simulate_tb(const ChannelRealization& h, const NoiseModel& noise,
                        std::span<const Constellation* const> users,
                        const EpConfig& cfg, TbDims dims,
                        const std::vector<std::vector<std::uint8_t>>& bits,
                        Rng& rng) {
  const int n_rx = h.config.n_rx;
  const int m_all = h.config.n_ue;
  const int l_sub = h.config.n_subcarriers;
  const int r_sym = dims.r_symbols;
  if (static_cast<int>(users.size()) != m_all ||
      static_cast<int>(bits.size()) != m_all)
    throw ContractError("simulate_tb: user count mismatch");

  std::vector<int> active;
  for (int m = 0; m < m_all; ++m) {
    if (users[m] == nullptr) continue;
    const std::size_t need = static_cast<std::size_t>(r_sym) * l_sub *
                             static_cast<std::size_t>(users[m]->s);
    if (bits[m].size() != need)
      throw ContractError("simulate_tb: bit count != R*L*S");
    active.push_back(m);
  }

  TbSimResult out;
  out.mi = Eigen::ArrayXd::Zero(m_all);
  out.llrs.resize(m_all);
  if (active.empty()) return out;

  const int m_act = static_cast<int>(active.size());
  std::vector<const Constellation*> act_users(m_act);
  for (int i = 0; i < m_act; ++i) act_users[i] = users[active[i]];
  for (int i = 0; i < m_act; ++i)
    out.llrs[active[i]].resize(bits[active[i]].size());

  EpDetector det(cfg);
  Eigen::MatrixXcd h_act(n_rx, m_act);
  Eigen::VectorXcd x(m_act), y(n_rx);
  std::vector<Eigen::ArrayXd> lw;
  std::vector<MiAccumulator> acc(m_act);
  const double sigma = std::sqrt(noise.n0);

  for (int l = 0; l < l_sub; ++l) {
    for (int i = 0; i < m_act; ++i) h_act.col(i) = h.h[l].col(active[i]);
    for (int r = 0; r < r_sym; ++r) {
      for (int i = 0; i < m_act; ++i) {
        const Constellation& c = *act_users[i];
        const std::size_t base =
            (static_cast<std::size_t>(r) * l_sub + l) * c.s;
        std::uint32_t label = 0;
        for (int b = 0; b < c.s; ++b)
          label = (label << 1) | (bits[active[i]][base + b] & 1u);
        x(i) = c.points(c.point_of_label[label]);
      }
      y.noalias() = h_act * x;
      for (int j = 0; j < n_rx; ++j) y(j) += sigma * rng.cgaussian();

      det.detect(y, h_act, noise.n0, noise.es, act_users, lw);
      for (int i = 0; i < m_act; ++i) {
        const Constellation& c = *act_users[i];
        const std::size_t base =
            (static_cast<std::size_t>(r) * l_sub + l) * c.s;
        double* dst = out.llrs[active[i]].data() + base;
        llrs_from_log_weights(lw[i], c, dst);
        for (int b = 0; b < c.s; ++b)
          acc[i].add(dst[b], bits[active[i]][base + b] & 1);
      }
    }
  }
  for (int i = 0; i < m_act; ++i) out.mi(active[i]) = acc[i].value();
  return out;
}

Eigen::ArrayXd measured_post_mud_mi(
    const ChannelRealization& h, const NoiseModel& noise,
    const Constellation& c, const EpConfig& cfg, TbDims dims,
    const std::vector<std::vector<std::uint8_t>>& true_bits, Rng& rng) {
  std::vector<const Constellation*> users(h.config.n_ue, &c);
  return simulate_tb(h, noise, users, cfg, dims, true_bits, rng).mi;
}

}  // namespace mcslab
