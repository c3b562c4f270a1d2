#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "mcslab/ldpc.hpp"
#include "mcslab/mathutil.hpp"
#include "mcslab/modem.hpp"
#include "test_util.hpp"

using namespace mcslab;

namespace {

// GF(2) row rank, independent of the library's elimination
int gf2_rank(const LdpcCode& code) {
  const int m = code.n_checks();
  std::vector<std::set<int>> rows(m);
  for (int c = 0; c < m; ++c)
    for (int e = code.chk_ptr[c]; e < code.chk_ptr[c + 1]; ++e)
      rows[c].insert(code.chk_var[e]);
  int rank = 0;
  std::vector<bool> used(m, false);
  for (int col = 0; col < code.n && rank < m; ++col) {
    int pivot = -1;
    for (int r = 0; r < m; ++r) {
      if (!used[r] && rows[r].count(col)) {
        pivot = r;
        break;
      }
    }
    if (pivot < 0) continue;
    used[pivot] = true;
    ++rank;
    for (int r = 0; r < m; ++r) {
      if (r == pivot || !rows[r].count(col)) continue;
      std::set<int> sym;
      std::set_symmetric_difference(rows[r].begin(), rows[r].end(),
                                    rows[pivot].begin(), rows[pivot].end(),
                                    std::inserter(sym, sym.begin()));
      rows[r] = std::move(sym);
    }
  }
  return rank;
}

std::vector<double> bpsk_llrs(const std::vector<std::uint8_t>& cw,
                              double snr_db, Rng& rng) {
  // bit 1 -> +1; llr = ln p1/p0 = 2y/sigma^2
  const double sigma2 = 1.0 / db_to_linear(snr_db);
  std::vector<double> llr(cw.size());
  for (std::size_t i = 0; i < cw.size(); ++i) {
    const double x = cw[i] ? 1.0 : -1.0;
    const double y = x + std::sqrt(sigma2 / 2.0) *
                             rng.gaussian();  // real AWGN, Es = 1, N0 = sigma2
    llr[i] = std::clamp(4.0 * y / sigma2, -kLlrMax, kLlrMax);
  }
  return llr;
}

bool has_length4_cycle(const LdpcCode& code) {
  const int m = code.n_checks();
  std::set<std::pair<int, int>> seen;
  for (int v = 0; v < code.n; ++v) {
    std::vector<int> checks;
    for (int i = code.var_ptr[v]; i < code.var_ptr[v + 1]; ++i) {
      // recover the check of this edge
      const int e = code.var_edge[i];
      int lo = 0, hi = m;
      while (lo + 1 < hi) {
        const int mid = (lo + hi) / 2;
        if (code.chk_ptr[mid] <= e)
          lo = mid;
        else
          hi = mid;
      }
      checks.push_back(lo);
    }
    for (std::size_t a = 0; a < checks.size(); ++a)
      for (std::size_t b = a + 1; b < checks.size(); ++b) {
        const auto key = std::minmax(checks[a], checks[b]);
        if (!seen.insert({key.first, key.second}).second) return true;
      }
  }
  return false;
}

}  // namespace

TEST_CASE("build_code: rank, systematic encoding, code membership") {
  const auto code = build_code(96, 0.5, 7);
  CHECK(code.k == 48);
  CHECK(code.n_checks() == 48);
  CHECK(gf2_rank(code) == 48);
  CHECK(!has_length4_cycle(code));

  // zero maps to zero
  const auto zero = encode(code, std::vector<std::uint8_t>(48, 0));
  for (auto b : zero) CHECK(b == 0);
  CHECK(syndrome_ok(code, zero));

  // random codewords satisfy the parity check, and their sum does too
  Rng rng(5);
  std::vector<std::uint8_t> u1(48), u2(48);
  for (int i = 0; i < 48; ++i) {
    u1[i] = rng.bit();
    u2[i] = rng.bit();
  }
  const auto c1 = encode(code, u1);
  const auto c2 = encode(code, u2);
  CHECK(syndrome_ok(code, c1));
  CHECK(syndrome_ok(code, c2));
  std::vector<std::uint8_t> sum(96);
  for (int i = 0; i < 96; ++i) sum[i] = c1[i] ^ c2[i];
  CHECK(syndrome_ok(code, sum));

  // info bits sit in the leading positions
  for (int i = 0; i < 48; ++i) CHECK(c1[i] == u1[i]);

  CHECK_THROWS_AS(build_code(96, 0.437, 1), ConfigError);
  CHECK_THROWS_AS(encode(code, std::vector<std::uint8_t>(47, 0)), ContractError);
}

TEST_CASE("larger code is four-cycle free") {
  const auto code = build_code(672, 0.5, 11);
  CHECK(gf2_rank(code) == 336);
  CHECK(!has_length4_cycle(code));
}

TEST_CASE("decode: noiseless round trip and zero-information input") {
  const auto code = build_code(256, 0.5, 3);
  Rng rng(9);
  std::vector<std::uint8_t> info(code.k);
  for (auto& b : info) b = rng.bit();
  const auto cw = encode(code, info);
  std::vector<double> llr(code.n);
  for (int i = 0; i < code.n; ++i) llr[i] = cw[i] ? kLlrMax : -kLlrMax;
  const auto dec = decode(code, llr, 2);
  CHECK(dec.converged);
  CHECK(dec.info == info);

  const std::vector<double> zeros(code.n, 0.0);
  CHECK(!decode(code, zeros, 20).converged);
}

TEST_CASE("BLER is monotone non-increasing over a BPSK AWGN sweep") {
  const auto code = build_code(2688, 0.5, 21);
  std::vector<double> bler;
  for (double snr_db : {-1.0, 0.0, 1.0, 2.0, 3.0, 4.0}) {
    const auto scenario = [snr_db](const std::vector<std::uint8_t>& cw,
                                   Rng& rng) {
      return bpsk_llrs(cw, snr_db, rng);
    };
    bler.push_back(tb_bler(code, scenario, 150, 1234));
  }
  for (std::size_t i = 1; i < bler.size(); ++i) CHECK(bler[i] <= bler[i - 1]);
  CHECK(bler.front() > 0.9);
  CHECK(bler.back() < 0.1);
}

TEST_CASE("tb_bler anchors: noiseless zero, pure noise one, reproducible") {
  const auto code = build_code(256, 0.5, 3);
  const auto perfect = [](const std::vector<std::uint8_t>& cw, Rng&) {
    std::vector<double> llr(cw.size());
    for (std::size_t i = 0; i < cw.size(); ++i)
      llr[i] = cw[i] ? kLlrMax : -kLlrMax;
    return llr;
  };
  CHECK(tb_bler(code, perfect, 50, 1) == 0.0);

  const auto pure_noise = [](const std::vector<std::uint8_t>& cw, Rng& rng) {
    std::vector<double> llr(cw.size());
    for (auto& v : llr) v = 10.0 * rng.gaussian();
    return llr;
  };
  CHECK(tb_bler(code, pure_noise, 50, 1) >= 0.95);

  const auto mid = [](const std::vector<std::uint8_t>& cw, Rng& rng) {
    return bpsk_llrs(cw, 1.0, rng);
  };
  CHECK(tb_bler(code, mid, 60, 5) == tb_bler(code, mid, 60, 5));
}

TEST_CASE("BLER estimates from disjoint seeds agree at the binomial level") {
  const auto code = build_code(672, 0.5, 21);
  const auto mid = [](const std::vector<std::uint8_t>& cw, Rng& rng) {
    return bpsk_llrs(cw, 1.6, rng);
  };
  const int n = 200;
  const double p1 = tb_bler(code, mid, n, 1111);
  const double p2 = tb_bler(code, mid, n, 2222);
  const double pool = 0.5 * (p1 + p2);
  CHECK(testutil::binomial_consistent(static_cast<int>(p2 * n + 0.5), n,
                                      std::clamp(pool, 1e-6, 1.0 - 1e-6)));
}

TEST_CASE("save and load round trip") {
  const auto code = build_code(256, 0.75, 13);
  const auto path =
      std::filesystem::temp_directory_path() / "mcslab_test_code.txt";
  save_code(code, path);
  const auto loaded = load_code(path);
  CHECK(loaded.n == code.n);
  CHECK(loaded.k == code.k);
  CHECK(loaded.chk_ptr == code.chk_ptr);
  CHECK(loaded.chk_var == code.chk_var);
  CHECK(loaded.gen_cols == code.gen_cols);

  Rng rng(3);
  std::vector<std::uint8_t> info(code.k);
  for (auto& b : info) b = rng.bit();
  CHECK(encode(loaded, info) == encode(code, info));
  std::filesystem::remove(path);
}
