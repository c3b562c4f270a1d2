#include <doctest.h>

#include <cmath>

#include "mcslab/detector.hpp"
#include "mcslab/mathutil.hpp"
#include "test_util.hpp"

using namespace mcslab;

TEST_CASE("lmmse_sinr: scalar and orthonormal cases") {
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = std::polar(1.0, 0.7);
  const double rho = 3.7;
  CHECK(lmmse_sinr(h, rho)(0) == doctest::Approx(rho).epsilon(1e-12));

  // orthonormal columns: H^H H = I
  Rng rng(2);
  const Eigen::MatrixXcd a = testutil::random_channel_matrix(8, 4, rng);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(a);
  const Eigen::MatrixXcd q =
      qr.householderQ() * Eigen::MatrixXcd::Identity(8, 4);
  const auto gamma = lmmse_sinr(q, rho);
  for (int m = 0; m < 4; ++m)
    CHECK(gamma(m) == doctest::Approx(rho).epsilon(1e-9));
}

TEST_CASE("lmmse_sinr equals the direct-filter oracle") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto h = testutil::random_channel_matrix(8, 4, rng);
    const double rho = db_to_linear(-5.0 + 25.0 * rng.uniform());
    const auto got = lmmse_sinr(h, rho);
    const auto want = testutil::lmmse_sinr_filter_oracle(h, rho);
    for (int m = 0; m < 4; ++m)
      CHECK(std::abs(got(m) - want(m)) <= 1e-8 * std::abs(want(m)));
  }
}

TEST_CASE("zf_sinr: orthogonal case, scaling, oracle, dominance") {
  Rng rng(17);
  const double rho = db_to_linear(10.0);

  Eigen::MatrixXcd diag = Eigen::MatrixXcd::Zero(4, 4);
  for (int i = 0; i < 4; ++i) diag(i, i) = 1.0;
  const auto g0 = zf_sinr(diag, rho);
  for (int m = 0; m < 4; ++m) CHECK(g0(m) == doctest::Approx(rho));

  // scaling a column by c scales its SINR by |c|^2 in the diagonal case
  diag(2, 2) = std::complex<double>(0.0, 2.0);
  const auto g1 = zf_sinr(diag, rho);
  CHECK(g1(2) == doctest::Approx(4.0 * rho));
  CHECK(g1(0) == doctest::Approx(rho));

  for (int trial = 0; trial < 100; ++trial) {
    const auto h = testutil::random_channel_matrix(8, 4, rng);
    const double r = db_to_linear(-5.0 + 25.0 * rng.uniform());
    const auto zf = zf_sinr(h, r);
    const auto oracle = testutil::zf_sinr_pinv_oracle(h, r);
    const auto lmmse = lmmse_sinr(h, r);
    for (int m = 0; m < 4; ++m) {
      CHECK(std::abs(zf(m) - oracle(m)) <= 1e-8 * oracle(m));
      CHECK(zf(m) <= lmmse(m) + 1e-9);
    }
  }

  Eigen::MatrixXcd wide(2, 4);
  CHECK_THROWS_AS(zf_sinr(wide, rho), ContractError);
  Eigen::MatrixXcd rank_def = Eigen::MatrixXcd::Zero(4, 3);
  rank_def.col(0).setOnes();
  rank_def.col(1) = rank_def.col(0);
  rank_def.col(2).setRandom();
  CHECK_THROWS_AS(zf_sinr(rank_def, rho), NumericError);
}

TEST_CASE("ep_detect with T=1 reproduces the standalone LMMSE detector") {
  Rng rng(23);
  const auto c = Constellation::make(16);
  EpConfig cfg;
  cfg.t_iters = 1;
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = testutil::random_channel_matrix(8, 4, rng);
    const double n0 = 0.05 + rng.uniform();
    Eigen::VectorXcd x(4);
    for (int m = 0; m < 4; ++m) x(m) = c.points(rng.uniform_int(16));
    Eigen::VectorXcd y = h * x;
    for (int i = 0; i < 8; ++i) y(i) += std::sqrt(n0) * rng.cgaussian();

    Eigen::VectorXcd x_hat;
    Eigen::ArrayXd v;
    lmmse_detect(y, h, n0, c.es, x_hat, v);

    const auto post = ep_detect(y, h, n0, c, cfg);
    for (int m = 0; m < 4; ++m) {
      // reconstruct mean/variance parameters from the posterior weights
      Eigen::ArrayXd expected =
          (-(c.points - x_hat(m)).abs2() / v(m));
      expected -= expected.maxCoeff();
      expected = expected.max(-kEpExpClamp).exp();
      for (int i = 0; i < 16; ++i)
        CHECK(post[m].weights(i) ==
              doctest::Approx(expected(i)).epsilon(1e-9));
    }
  }
}

TEST_CASE("ep_detect decides the transmitted point in the noiseless scalar case") {
  const auto c = Constellation::make(64);
  EpConfig cfg;
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = 1.0;
  for (int id : {0, 17, 63}) {
    Eigen::VectorXcd y(1);
    y(0) = c.points(id);
    const auto post = ep_detect(y, h, 1e-12, c, cfg);
    int best = 0;
    post[0].weights.maxCoeff(&best);
    CHECK(best == id);
    for (int i = 0; i < 64; ++i) {
      CHECK(post[0].weights(i) > 0.0);
      CHECK(std::isfinite(post[0].weights(i)));
    }
  }
}

namespace {

// independent single-iteration EP reference, explicit inverses throughout
struct EpRef {
  Eigen::VectorXcd x_ba;
  Eigen::ArrayXd v_ba;
  std::vector<Eigen::ArrayXd> q;  // module-A exponents, shifted

  void iterate(const Eigen::VectorXcd& y, const Eigen::MatrixXcd& h, double n0,
               const Constellation& c, double alpha, double floor) {
    const int m = static_cast<int>(h.cols());
    Eigen::MatrixXcd a =
        h * v_ba.matrix().asDiagonal() * h.adjoint();
    a.diagonal().array() += n0;
    const Eigen::MatrixXcd psi = a.inverse();
    Eigen::VectorXcd x_ab(m);
    Eigen::ArrayXd v_ab(m);
    q.resize(m);
    for (int i = 0; i < m; ++i) {
      const double hph = (h.col(i).adjoint() * psi * h.col(i))(0).real();
      const double xi = 1.0 / hph;
      x_ab(i) =
          x_ba(i) + xi * (h.col(i).adjoint() * psi * (y - h * x_ba))(0);
      v_ab(i) = std::max(xi - v_ba(i), floor);
      q[i] = -(c.points - x_ab(i)).abs2() / v_ab(i);
      q[i] -= q[i].maxCoeff();
      q[i] = q[i].max(-kEpExpClamp);
    }
    for (int i = 0; i < m; ++i) {
      const Eigen::ArrayXd w = q[i].exp();
      const double s0 = w.sum();
      const std::complex<double> xb = (c.points * w).sum() / s0;
      double vb = (c.point_sq * w).sum() / s0 - std::norm(xb);
      vb = std::max(vb, 1e-30);
      const double inv_ext = 1.0 / vb - 1.0 / v_ab(i);
      if (!(inv_ext > 0.0) || !std::isfinite(inv_ext)) continue;
      const double v_ext = 1.0 / inv_ext;
      const std::complex<double> x_ext =
          v_ext * (xb / vb - x_ab(i) / v_ab(i));
      x_ba(i) = alpha * x_ext + (1.0 - alpha) * x_ba(i);
      v_ba(i) = std::max(alpha * v_ext + (1.0 - alpha) * v_ba(i), floor);
    }
  }
};

}  // namespace

TEST_CASE("two EP iterations match an independent reference; damping limits") {
  Rng rng(37);
  const auto c = Constellation::make(16);
  const auto h = testutil::random_channel_matrix(8, 4, rng);
  const double n0 = 0.1;
  Eigen::VectorXcd x(4);
  for (int m = 0; m < 4; ++m) x(m) = c.points(rng.uniform_int(16));
  Eigen::VectorXcd y = h * x;
  for (int i = 0; i < 8; ++i) y(i) += std::sqrt(n0) * rng.cgaussian();

  for (double alpha : {1.0, 0.5}) {
    EpConfig cfg;
    cfg.t_iters = 2;
    cfg.damping = alpha;
    const auto got = ep_detect(y, h, n0, c, cfg);

    EpRef ref;
    ref.x_ba = Eigen::VectorXcd::Zero(4);
    ref.v_ba = Eigen::ArrayXd::Constant(4, c.es);
    ref.iterate(y, h, n0, c, alpha, cfg.variance_floor);
    ref.iterate(y, h, n0, c, alpha, cfg.variance_floor);
    for (int m = 0; m < 4; ++m)
      for (int i = 0; i < 16; ++i)
        CHECK(got[m].weights(i) ==
              doctest::Approx(std::exp(ref.q[m](i))).epsilon(1e-9));
  }

  // vanishing damping freezes the messages: T=2 collapses onto T=1
  EpConfig frozen;
  frozen.t_iters = 2;
  frozen.damping = 1e-12;
  EpConfig single;
  single.t_iters = 1;
  const auto a2 = ep_detect(y, h, n0, c, frozen);
  const auto a1 = ep_detect(y, h, n0, c, single);
  for (int m = 0; m < 4; ++m)
    CHECK((a2[m].weights - a1[m].weights).abs().maxCoeff() < 1e-9);

  EpConfig bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = EpConfig{};
  bad.damping = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("EP symbol errors over fading do not exceed LMMSE") {
  Rng rng(41);
  const auto c = Constellation::make(4);
  const double rho = db_to_linear(15.0);
  const double n0 = 1.0 / rho;
  EpConfig ep_cfg;  // T = 8, alpha = 0.5
  EpConfig lmmse_cfg;
  lmmse_cfg.t_iters = 1;
  int err_ep = 0, err_lmmse = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const auto h = testutil::random_channel_matrix(8, 4, rng);
    Eigen::VectorXcd x(4);
    std::vector<int> ids(4);
    for (int m = 0; m < 4; ++m) {
      ids[m] = rng.uniform_int(4);
      x(m) = c.points(ids[m]);
    }
    Eigen::VectorXcd y = h * x;
    for (int i = 0; i < 8; ++i) y(i) += std::sqrt(n0) * rng.cgaussian();
    const auto pe = ep_detect(y, h, n0, c, ep_cfg);
    const auto pl = ep_detect(y, h, n0, c, lmmse_cfg);
    for (int m = 0; m < 4; ++m) {
      int be = 0, bl = 0;
      pe[m].weights.maxCoeff(&be);
      pl[m].weights.maxCoeff(&bl);
      err_ep += be != ids[m];
      err_lmmse += bl != ids[m];
    }
  }
  CHECK(err_ep <= err_lmmse);
}

TEST_CASE("measured_post_mud_mi: noiseless, low SNR, determinism") {
  ChannelConfig ccfg;
  ccfg.n_rx = 8;
  ccfg.n_ue = 4;
  ccfg.n_subcarriers = 8;
  ccfg.n_taps = 2;
  ccfg.fft_size = 8;
  ccfg.seed = 71;
  const auto h = generate_channel(ccfg);
  EpConfig cfg;
  TbDims dims{4};

  auto random_bits = [&](int s, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<std::uint8_t>> bits(
        4, std::vector<std::uint8_t>(4 * 8 * s));
    for (auto& u : bits)
      for (auto& b : u) b = rng.bit();
    return bits;
  };

  {
    const auto c = Constellation::make(16);
    const auto bits = random_bits(4, 5);
    const auto noise = NoiseModel::from_es_n0(1.0, 1e-9, 4);
    Rng rng(6);
    const auto mi = measured_post_mud_mi(h, noise, c, cfg, dims, bits, rng);
    for (int m = 0; m < 4; ++m) CHECK(mi(m) >= 0.999);
  }
  {
    const auto c = Constellation::make(64);
    const auto bits = random_bits(6, 7);
    const auto noise = NoiseModel::from_es_n0(1.0, db_to_linear(10.0), 4);
    Rng r1(8), r2(8);
    const auto mi1 = measured_post_mud_mi(h, noise, c, cfg, dims, bits, r1);
    const auto mi2 = measured_post_mud_mi(h, noise, c, cfg, dims, bits, r2);
    CHECK((mi1 - mi2).abs().maxCoeff() == 0.0);
    for (int m = 0; m < 4; ++m) CHECK(mi1(m) < 0.3);
  }
}
