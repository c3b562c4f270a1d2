#include <doctest.h>

#include "mcslab/detector.hpp"
#include "mcslab/mathutil.hpp"
#include "mcslab/mcs.hpp"
#include "test_util.hpp"

using namespace mcslab;

namespace {

McsTable desk9() {
  McsTable t;
  t.entries = {{0, 4, 0.25},   {1, 4, 0.375},  {2, 4, 0.5625},
               {3, 16, 0.3125}, {4, 16, 0.5},   {5, 16, 0.6875},
               {6, 64, 0.5},    {7, 64, 0.625}, {8, 64, 0.75}};
  t.validate();
  return t;
}

// step curve: BLER 0 at and above the threshold MI, else 1
ExitCurve step_curve(int idx, double threshold) {
  ExitCurve c;
  c.mcs_index = idx;
  c.points = {{0.0, 1.0}, {threshold - 1e-6, 1.0}, {threshold, 0.0}, {1.0, 0.0}};
  return c;
}

}  // namespace

TEST_CASE("mcs table validation") {
  CHECK_NOTHROW(desk9());

  McsTable bad;
  bad.entries = {{0, 4, 0.5}, {1, 16, 0.2}};  // SE drops: 1.0 -> 0.8
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  McsTable wrong_group;
  wrong_group.entries = {{0, 16, 0.3}, {1, 4, 0.7}};
  CHECK_THROWS_AS(wrong_group.validate(), ConfigError);

  const auto t = McsTable::from_json_array(
      R"([{"index":0,"q":4,"rate":0.25},{"index":1,"q":16,"rate":0.5}])");
  CHECK(t.entries.size() == 2);
  CHECK(t.block_of(16) == std::vector<int>{1});
}

TEST_CASE("predicted_mi_lmmse equals the feature mean and a recomputation") {
  std::vector<double> grid;
  for (double s = -20.0; s <= 30.0 + 1e-9; s += 1.0) grid.push_back(s);
  const auto psi = build_psi_table(16, grid, 20000, 3);

  ChannelConfig cfg;
  cfg.n_rx = 8;
  cfg.n_ue = 4;
  cfg.n_subcarriers = 12;
  cfg.n_taps = 3;
  cfg.fft_size = 16;
  cfg.seed = 9;
  const auto h = generate_channel(cfg);
  const double rho = db_to_linear(6.0);

  const double got = predicted_mi_lmmse(h, rho, 16, psi, 2);
  const auto f = extract_feature(h, rho, 16, psi, 2);
  CHECK(got == f.values.mean());

  // frequency-flat channel: prediction equals the single-subcarrier value
  cfg.n_taps = 1;
  const auto flat = generate_channel(cfg);
  const auto ff = extract_feature(flat, rho, 16, psi, 0);
  CHECK(predicted_mi_lmmse(flat, rho, 16, psi, 0) ==
        doctest::Approx(ff.values(0)).epsilon(1e-12));

  // independent recomputation
  double acc = 0.0;
  for (int l = 0; l < 12; ++l) {
    const Eigen::MatrixXcd g =
        (rho * (h.h[l].adjoint() * h.h[l]) + Eigen::MatrixXcd::Identity(4, 4))
            .inverse();
    acc += psi_eval(psi, linear_to_db(1.0 / g(2, 2).real() - 1.0));
  }
  CHECK(got == doctest::Approx(acc / 12.0).epsilon(1e-12));
}

TEST_CASE("effective_sinr_zf: averaging identity, hand value, Jensen bound") {
  // L = 2 scalar subcarriers with ZF SINRs 1 and 3 at rho = 1
  ChannelRealization h;
  h.config.n_rx = 1;
  h.config.n_ue = 1;
  h.config.n_subcarriers = 2;
  h.h.resize(2, Eigen::MatrixXcd(1, 1));
  h.h[0](0, 0) = 1.0;
  h.h[1](0, 0) = std::sqrt(3.0);
  CHECK(effective_sinr_zf(h, 1.0, 0) ==
        doctest::Approx(1.8284271247461903).epsilon(1e-12));

  // uniform SINR returns itself
  h.h[1](0, 0) = 1.0;
  CHECK(effective_sinr_zf(h, 2.5, 0) == doctest::Approx(2.5).epsilon(1e-12));

  // concavity: effective SINR never exceeds the arithmetic mean
  Rng rng(12);
  ChannelRealization r;
  r.config.n_rx = 8;
  r.config.n_ue = 4;
  r.config.n_subcarriers = 6;
  r.h.resize(6);
  for (auto& m : r.h) m = testutil::random_channel_matrix(8, 4, rng);
  const double rho = db_to_linear(8.0);
  for (int u = 0; u < 4; ++u) {
    double mean = 0.0;
    for (int l = 0; l < 6; ++l) mean += zf_sinr(r.h[l], rho)(u);
    mean /= 6.0;
    CHECK(effective_sinr_zf(r, rho, u) <= mean + 1e-9);
  }
}

TEST_CASE("select_mcs_mi: anchors, hand-built curves, Eq.-style contract") {
  const auto table = desk9();
  std::map<int, ExitCurve> curves;
  const double thresholds[9] = {0.30, 0.42, 0.58, 0.47, 0.60,
                                0.72, 0.62, 0.76, 0.90};
  for (int i = 0; i < 9; ++i) curves[i] = step_curve(i, thresholds[i]);

  std::map<int, double> perfect{{4, 1.0}, {16, 1.0}, {64, 1.0}};
  const auto top = select_mcs_mi(perfect, curves, table, 0.01);
  REQUIRE(top.selected.has_value());
  CHECK(*top.selected == 8);
  CHECK(top.predicted_bler == 0.0);

  std::map<int, double> dead{{4, 0.0}, {16, 0.0}, {64, 0.0}};
  const auto none = select_mcs_mi(dead, curves, table, 0.01);
  CHECK(!none.selected.has_value());
  for (const auto& [q, cand] : none.candidate_per_q) CHECK(!cand.has_value());

  // two-entry table with step curves at 0.5: MI 0.6 selects the higher index
  McsTable two;
  two.entries = {{0, 4, 0.25}, {1, 4, 0.5}};
  std::map<int, ExitCurve> tiny;
  tiny[0] = step_curve(0, 0.3);
  tiny[1] = step_curve(1, 0.5);
  const auto pick =
      select_mcs_mi({{4, 0.6}}, tiny, two, 0.01);
  REQUIRE(pick.selected.has_value());
  CHECK(*pick.selected == 1);

  // contract: the final index equals the max over per-Q candidates,
  // and raising every predicted MI never lowers the selection
  Rng rng(5);
  std::optional<int> last;
  for (int trial = 0; trial < 200; ++trial) {
    std::map<int, double> mi{{4, rng.uniform()}, {16, rng.uniform()},
                             {64, rng.uniform()}};
    const auto d = select_mcs_mi(mi, curves, table, 0.01);
    std::optional<int> max_cand;
    bool all_none = true;
    for (const auto& [q, cand] : d.candidate_per_q) {
      if (cand) {
        all_none = false;
        if (!max_cand || *cand > *max_cand) max_cand = cand;
      }
    }
    CHECK(d.selected == max_cand);
    CHECK(all_none == !d.selected.has_value());

    std::map<int, double> raised;
    for (const auto& [q, v] : mi) raised[q] = std::min(1.0, v + 0.2);
    const auto d2 = select_mcs_mi(raised, curves, table, 0.01);
    if (d.selected) {
      REQUIRE(d2.selected.has_value());
      CHECK(*d2.selected >= *d.selected);
    }
  }

  std::map<int, ExitCurve> missing = curves;
  missing.erase(5);
  CHECK_THROWS_AS(select_mcs_mi(perfect, missing, table, 0.01), ConfigError);
}

TEST_CASE("select_mcs_zf: extreme effective SINRs and determinism") {
  const auto table = desk9();
  std::map<int, SnrBlerCurve> curves;
  for (int i = 0; i < 9; ++i) {
    SnrBlerCurve c;
    c.mcs_index = i;
    const double thr = -2.0 + 2.5 * i;  // waterfall position per index
    c.points = {{thr - 0.5, 1.0}, {thr, 0.0}, {40.0, 0.0}};
    curves[i] = c;
  }

  ChannelRealization h;
  h.config.n_rx = 4;
  h.config.n_ue = 2;
  h.config.n_subcarriers = 2;
  h.h.assign(2, Eigen::MatrixXcd::Identity(4, 2));

  const auto top = select_mcs_zf(h, db_to_linear(40.0), 0, curves, table, 0.01);
  REQUIRE(top.selected.has_value());
  CHECK(*top.selected == 8);

  const auto none = select_mcs_zf(h, db_to_linear(-20.0), 0, curves, table, 0.01);
  CHECK(!none.selected.has_value());

  const auto a = select_mcs_zf(h, db_to_linear(9.0), 0, curves, table, 0.01);
  const auto b = select_mcs_zf(h, db_to_linear(9.0), 0, curves, table, 0.01);
  CHECK(a.selected == b.selected);
}

TEST_CASE("select_mcs_vss: degenerate exact-hit store matches the MI path") {
  std::vector<double> grid;
  for (double s = -20.0; s <= 30.0 + 1e-9; s += 1.0) grid.push_back(s);
  std::map<int, PsiTable> psi;
  psi[4] = build_psi_table(4, grid, 20000, 3);
  psi[16] = build_psi_table(16, grid, 20000, 3);
  psi[64] = build_psi_table(64, grid, 20000, 3);

  const auto table = desk9();
  std::map<int, ExitCurve> curves;
  const double thresholds[9] = {0.30, 0.42, 0.58, 0.47, 0.60,
                                0.72, 0.62, 0.76, 0.90};
  for (int i = 0; i < 9; ++i) curves[i] = step_curve(i, thresholds[i]);

  ChannelConfig cfg;
  cfg.n_rx = 8;
  cfg.n_ue = 4;
  cfg.n_subcarriers = 12;
  cfg.n_taps = 2;
  cfg.fft_size = 16;
  cfg.seed = 31;
  const auto h = generate_channel(cfg);
  const double rho = db_to_linear(14.0);

  // single-entry VDBs whose key equals this user's query, value 1.0
  std::map<int, IvfPqIndex> vdbs;
  for (int q : {4, 16, 64}) {
    std::vector<VdbEntry> one;
    one.push_back({extract_feature(h, rho, q, psi[q], 0), 1.0});
    vdbs[q] = build_ivfpq(one, 1, 2, 5);
  }
  const auto got =
      select_mcs_vss(h, rho, 0, vdbs, psi, curves, table, 0.01, 20, 40);
  const auto want = select_mcs_mi({{4, 1.0}, {16, 1.0}, {64, 1.0}}, curves,
                                  table, 0.01);
  CHECK(got.selected == want.selected);

  IvfPqIndex empty;
  std::map<int, IvfPqIndex> bad;
  bad[4] = std::move(empty);
  CHECK_THROWS_AS(
      select_mcs_vss(h, rho, 0, bad, psi, curves, table, 0.01, 20, 40),
      StateError);
}
