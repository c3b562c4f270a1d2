#include <doctest.h>

#include "mcslab/exit_curve.hpp"
#include "mcslab/mathutil.hpp"
#include "test_util.hpp"

using namespace mcslab;

namespace {

std::vector<double> psi_grid() {
  std::vector<double> g;
  for (double s = -20.0; s <= 30.0 + 1e-9; s += 1.0) g.push_back(s);
  return g;
}

struct Fixture {
  Constellation c4 = Constellation::make(4);
  PsiTable psi4 = build_psi_table(4, psi_grid(), 20000, 77);
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("exit curve: ends, monotonicity, prediction contract") {
  const auto& f = fixture();
  const auto code = build_code(672, 0.5, 5);
  const int n_blocks = 300;
  const auto sweep = default_mcs_sweep(f.psi4, 0.5, 0.75);
  const auto curve =
      build_exit_curve(0, f.c4, f.psi4, code, sweep, n_blocks, 999);

  REQUIRE(curve.points.size() >= 4);
  CHECK(curve.points.back().second <= 1.0 / n_blocks);   // MI ~ 1 end
  CHECK(curve.points.front().second >= 0.99);            // MI ~ 0 end
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].first > curve.points[i - 1].first);
    CHECK(curve.points[i].second <= curve.points[i - 1].second);
    CHECK(curve.points[i].second >= 0.0);
    CHECK(curve.points[i].second <= 1.0);
  }

  // stored point, clamping, interpolation bounds
  const auto [mi0, bler0] = curve.points[2];
  CHECK(predict_bler(curve, mi0) == doctest::Approx(bler0));
  CHECK(predict_bler(curve, 1.5) == curve.points.back().second);
  CHECK(predict_bler(curve, -0.5) == curve.points.front().second);
  const double mid =
      0.5 * (curve.points[2].first + curve.points[3].first);
  const double pb = predict_bler(curve, mid);
  CHECK(pb <= curve.points[2].second);
  CHECK(pb >= curve.points[3].second);

  ExitCurve empty;
  CHECK_THROWS_AS(predict_bler(empty, 0.5), StateError);
  CHECK_THROWS_AS(build_exit_curve(0, f.c4, f.psi4, code, sweep, 10, 1),
                  ConfigError);
}

TEST_CASE("lower code rate crosses BLER 0.5 at lower input MI") {
  const auto& f = fixture();
  const auto code_lo = build_code(672, 0.25, 5);
  const auto code_hi = build_code(672, 0.5, 5);
  const auto curve_lo = build_exit_curve(
      0, f.c4, f.psi4, code_lo, default_mcs_sweep(f.psi4, 0.25, 0.75), 250, 31);
  const auto curve_hi = build_exit_curve(
      1, f.c4, f.psi4, code_hi, default_mcs_sweep(f.psi4, 0.5, 0.75), 250, 32);

  auto mi_at_half = [](const ExitCurve& c) {
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      if (c.points[i].second <= 0.5) {
        // linear crossing between i-1 and i
        const auto [x0, y0] = c.points[i - 1];
        const auto [x1, y1] = c.points[i];
        if (y0 == y1) return x1;
        return x0 + (y0 - 0.5) / (y0 - y1) * (x1 - x0);
      }
    }
    return c.points.back().first;
  };
  CHECK(mi_at_half(curve_lo) < mi_at_half(curve_hi));
}

TEST_CASE("snr-bler curve agrees with the exit curve composed with psi") {
  const auto& f = fixture();
  const auto code = build_code(672, 0.5, 5);
  const auto sweep = default_mcs_sweep(f.psi4, 0.5, 0.75);
  const auto pts = awgn_mcs_sweep(f.c4, code, sweep, 300, 999);
  const auto exit = exit_curve_from_sweep(0, pts);
  const auto snr = snr_bler_curve_from_sweep(0, pts);

  CHECK(snr.points.back().second <= 1.0 / 300.0);
  CHECK(snr.points.front().second >= 0.99);

  for (const auto& [snr_db, bler] : snr.points) {
    const double via_exit = predict_bler(exit, psi_eval(f.psi4, snr_db));
    CHECK(std::abs(via_exit - bler) <= 0.1);
  }
}

TEST_CASE("curves are deterministic in the seed") {
  const auto& f = fixture();
  const auto code = build_code(672, 0.5, 5);
  std::vector<double> sweep{-2.0, 0.0, 2.0, 6.0};
  const auto a = build_exit_curve(3, f.c4, f.psi4, code, sweep, 200, 404);
  const auto b = build_exit_curve(3, f.c4, f.psi4, code, sweep, 200, 404);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].first == b.points[i].first);
    CHECK(a.points[i].second == b.points[i].second);
  }
}
