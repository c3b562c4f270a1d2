#include "mcslab/ldpc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mcslab/modem.hpp"

#include "mcslab/mathutil.hpp"

namespace mcslab {

namespace {

constexpr int kColumnWeight = 3;
constexpr int kBuildRetries = 8;
constexpr double kMsgClamp = 30.0;

struct BitMatrix {
  int rows = 0, cols = 0, words = 0;
  std::vector<std::uint64_t> data;  // row-major bitsets

  BitMatrix(int r, int c)
      : rows(r), cols(c), words((c + 63) / 64), data(static_cast<std::size_t>(r) * words, 0) {}
  std::uint64_t* row(int r) { return data.data() + static_cast<std::size_t>(r) * words; }
  const std::uint64_t* row(int r) const {
    return data.data() + static_cast<std::size_t>(r) * words;
  }
  void set(int r, int c) { row(r)[c >> 6] ^= 1ull << (c & 63); }
  bool get(int r, int c) const { return (row(r)[c >> 6] >> (c & 63)) & 1ull; }
  void xor_rows(int dst, int src) {
    auto* d = row(dst);
    const auto* s = row(src);
    for (int w = 0; w < words; ++w) d[w] ^= s[w];
  }
};

// Gallager-style placement: per variable, kColumnWeight distinct checks,
// lowest-degree first, rejecting checks that would close a length-4 cycle
// (two variables sharing two checks) while any alternative exists.
struct Placement {
  std::vector<std::vector<int>> vars_of_check;
  std::vector<std::vector<int>> checks_of_var;
};

Placement place_edges(int n, int m, Rng& rng) {
  Placement p;
  p.vars_of_check.assign(m, {});
  p.checks_of_var.assign(n, {});
  std::vector<int> degree(m, 0);
  std::vector<int> mark(n, -1);  // vars adjacent to the chosen checks of v

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);

  for (int v = 0; v < n; ++v) {
    for (int slot = 0; slot < kColumnWeight; ++slot) {
      // mark neighborhood of already-chosen checks
      for (int c : p.checks_of_var[v])
        for (int u : p.vars_of_check[c]) mark[u] = v;

      int best = -1, best_deg = 1 << 30;
      int n_best = 0;
      bool best_clean = false;
      for (int c = 0; c < m; ++c) {
        if (std::find(p.checks_of_var[v].begin(), p.checks_of_var[v].end(), c) !=
            p.checks_of_var[v].end())
          continue;
        bool clean = true;
        for (int u : p.vars_of_check[c]) {
          if (mark[u] == v) {
            clean = false;
            break;
          }
        }
        // prefer clean placements, then low degree; reservoir-pick ties
        const bool better =
            (clean && !best_clean) ||
            (clean == best_clean && degree[c] < best_deg);
        if (better) {
          best = c;
          best_deg = degree[c];
          best_clean = clean;
          n_best = 1;
        } else if (clean == best_clean && degree[c] == best_deg) {
          ++n_best;
          if (rng.uniform_int(n_best) == 0) best = c;
        }
      }
      p.checks_of_var[v].push_back(best);
      p.vars_of_check[best].push_back(v);
      ++degree[best];
    }
  }
  return p;
}

}  // namespace

LdpcCode build_code(int n, double rate, std::uint64_t seed) {
  const double kf = n * rate;
  const int k = static_cast<int>(std::lround(kf));
  if (n < 2 || std::abs(kf - k) > 1e-9 || k < 1)
    throw ConfigError("build_code: n*rate must be a positive integer");
  const int m = n - k;
  if (m < 1) throw ConfigError("build_code: n*(1-rate) must be >= 1");
  if (m < kColumnWeight)
    throw ConfigError("build_code: too few checks for column weight 3");

  for (int attempt = 0; attempt < kBuildRetries; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt), n, k));
    Placement p = place_edges(n, m, rng);

    // eliminate over GF(2) to find m pivot columns, searching from the right
    // so the permutation keeps info bits in the leading positions
    BitMatrix h(m, n);
    for (int c = 0; c < m; ++c)
      for (int v : p.vars_of_check[c]) h.set(c, v);

    std::vector<int> pivot_col(m, -1);
    std::vector<bool> is_pivot(n, false);
    int rank = 0;
    for (int col = n - 1; col >= 0 && rank < m; --col) {
      int pr = -1;
      for (int r = rank; r < m; ++r) {
        if (h.get(r, col)) {
          pr = r;
          break;
        }
      }
      if (pr < 0) continue;
      if (pr != rank)
        for (int w = 0; w < h.words; ++w)
          std::swap(h.row(pr)[w], h.row(rank)[w]);
      for (int r = 0; r < m; ++r)
        if (r != rank && h.get(r, col)) h.xor_rows(r, rank);
      pivot_col[rank] = col;
      is_pivot[col] = true;
      ++rank;
    }
    if (rank < m) continue;  // row-rank deficient, retry with a new seed

    // column permutation: non-pivot columns first (info), pivots last (parity)
    std::vector<int> new_pos(n, -1);
    int ip = 0;
    for (int col = 0; col < n; ++col)
      if (!is_pivot[col]) new_pos[col] = ip++;
    for (int col = 0; col < n; ++col)
      if (is_pivot[col]) new_pos[col] = ip++;

    LdpcCode code;
    code.n = n;
    code.k = k;
    code.rate = rate;
    code.parity_words = (m + 63) / 64;

    // permuted sparse parity
    std::vector<std::vector<int>> rows(m);
    for (int c = 0; c < m; ++c) {
      for (int v : p.vars_of_check[c]) rows[c].push_back(new_pos[v]);
      std::sort(rows[c].begin(), rows[c].end());
    }
    code.chk_ptr.resize(m + 1, 0);
    for (int c = 0; c < m; ++c)
      code.chk_ptr[c + 1] = code.chk_ptr[c] + static_cast<int>(rows[c].size());
    code.chk_var.resize(code.chk_ptr[m]);
    for (int c = 0; c < m; ++c)
      std::copy(rows[c].begin(), rows[c].end(),
                code.chk_var.begin() + code.chk_ptr[c]);

    code.var_ptr.assign(n + 1, 0);
    for (int v : code.chk_var) ++code.var_ptr[v + 1];
    for (int v = 0; v < n; ++v) code.var_ptr[v + 1] += code.var_ptr[v];
    code.var_edge.resize(code.chk_var.size());
    {
      std::vector<int> fill(code.var_ptr.begin(), code.var_ptr.end() - 1);
      for (int e = 0; e < code.n_edges(); ++e)
        code.var_edge[fill[code.chk_var[e]]++] = e;
    }

    // B = last m columns; invert via Gauss-Jordan on [B | I]
    BitMatrix b(m, m), binv(m, m);
    for (int c = 0; c < m; ++c)
      for (int v : rows[c])
        if (v >= k) b.set(c, v - k);
    for (int r = 0; r < m; ++r) binv.set(r, r);
    bool ok = true;
    for (int col = 0; col < m && ok; ++col) {
      int pr = -1;
      for (int r = col; r < m; ++r) {
        if (b.get(r, col)) {
          pr = r;
          break;
        }
      }
      if (pr < 0) {
        ok = false;
        break;
      }
      if (pr != col) {
        for (int w = 0; w < b.words; ++w) std::swap(b.row(pr)[w], b.row(col)[w]);
        for (int w = 0; w < binv.words; ++w)
          std::swap(binv.row(pr)[w], binv.row(col)[w]);
      }
      for (int r = 0; r < m; ++r) {
        if (r != col && b.get(r, col)) {
          b.xor_rows(r, col);
          binv.xor_rows(r, col);
        }
      }
    }
    if (!ok) continue;

    // generator parity columns: P e_j = Binv * (A e_j), A sparse
    code.gen_cols.assign(static_cast<std::size_t>(k) * code.parity_words, 0);
    // binv columns as bitsets for fast XOR
    std::vector<std::uint64_t> binv_cols(
        static_cast<std::size_t>(m) * code.parity_words, 0);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c)
        if (binv.get(r, c))
          binv_cols[static_cast<std::size_t>(c) * code.parity_words +
                    (r >> 6)] |= 1ull << (r & 63);
    for (int c = 0; c < m; ++c) {
      for (int v : rows[c]) {
        if (v >= k) continue;
        // A has a 1 at (c, v): P column v accumulates Binv column c
        auto* dst = code.gen_cols.data() +
                    static_cast<std::size_t>(v) * code.parity_words;
        const auto* src =
            binv_cols.data() + static_cast<std::size_t>(c) * code.parity_words;
        for (int w = 0; w < code.parity_words; ++w) dst[w] ^= src[w];
      }
    }
    return code;
  }
  throw ConfigError("build_code: failed to reach full rank after retries");
}

std::vector<std::uint8_t> encode(const LdpcCode& code,
                                 const std::vector<std::uint8_t>& info) {
  if (static_cast<int>(info.size()) != code.k)
    throw ContractError("encode: info length != k");
  std::vector<std::uint8_t> cw(code.n, 0);
  std::vector<std::uint64_t> parity(code.parity_words, 0);
  for (int j = 0; j < code.k; ++j) {
    cw[j] = info[j] & 1;
    if (cw[j]) {
      const auto* col =
          code.gen_cols.data() + static_cast<std::size_t>(j) * code.parity_words;
      for (int w = 0; w < code.parity_words; ++w) parity[w] ^= col[w];
    }
  }
  const int m = code.n_checks();
  for (int r = 0; r < m; ++r)
    cw[code.k + r] = static_cast<std::uint8_t>((parity[r >> 6] >> (r & 63)) & 1);
  return cw;
}

bool syndrome_ok(const LdpcCode& code, const std::vector<std::uint8_t>& cw) {
  const int m = code.n_checks();
  for (int c = 0; c < m; ++c) {
    int acc = 0;
    for (int e = code.chk_ptr[c]; e < code.chk_ptr[c + 1]; ++e)
      acc ^= cw[code.chk_var[e]] & 1;
    if (acc) return false;
  }
  return true;
}

DecodeResult decode(const LdpcCode& code, std::span<const double> llrs,
                    int max_iters) {
  if (static_cast<int>(llrs.size()) != code.n)
    throw ContractError("decode: llr length != n");
  const int n = code.n, m = code.n_checks(), ne = code.n_edges();

  // classic sign convention internally: L = ln p0/p1 = -lambda
  std::vector<double> ch(n);
  for (int v = 0; v < n; ++v) ch[v] = std::clamp(-llrs[v], -kLlrMax, kLlrMax);

  std::vector<double> v2c(ne), c2v(ne, 0.0);
  for (int v = 0; v < n; ++v)
    for (int i = code.var_ptr[v]; i < code.var_ptr[v + 1]; ++i)
      v2c[code.var_edge[i]] = ch[v];

  std::vector<std::uint8_t> hard(n, 0);
  std::vector<double> t(64);
  DecodeResult res;
  for (int it = 0; it < max_iters; ++it) {
    // check update, tanh rule with prefix/suffix products
    for (int c = 0; c < m; ++c) {
      const int lo = code.chk_ptr[c], hi = code.chk_ptr[c + 1];
      const int deg = hi - lo;
      if (static_cast<int>(t.size()) < deg) t.resize(deg);
      for (int i = 0; i < deg; ++i)
        t[i] = std::tanh(0.5 * std::clamp(v2c[lo + i], -kMsgClamp, kMsgClamp));
      double prefix = 1.0;
      for (int i = 0; i < deg; ++i) {
        c2v[lo + i] = prefix;
        prefix *= t[i];
      }
      double suffix = 1.0;
      for (int i = deg - 1; i >= 0; --i) {
        const double prod = c2v[lo + i] * suffix;
        suffix *= t[i];
        const double clipped = std::clamp(prod, -0.9999999999999, 0.9999999999999);
        c2v[lo + i] = std::clamp(2.0 * std::atanh(clipped), -kMsgClamp, kMsgClamp);
      }
    }
    // variable update and hard decision
    bool any_signal = false;
    for (int v = 0; v < n; ++v) {
      double total = ch[v];
      for (int i = code.var_ptr[v]; i < code.var_ptr[v + 1]; ++i)
        total += c2v[code.var_edge[i]];
      for (int i = code.var_ptr[v]; i < code.var_ptr[v + 1]; ++i) {
        const int e = code.var_edge[i];
        v2c[e] = std::clamp(total - c2v[e], -kMsgClamp - kLlrMax,
                            kMsgClamp + kLlrMax);
      }
      hard[v] = total < 0.0 ? 1 : 0;  // total is in the p0-positive convention
      if (total != 0.0) any_signal = true;
    }
    // a zero-belief decision carries no information, never "converged"
    if (any_signal && syndrome_ok(code, hard)) {
      res.converged = true;
      break;
    }
  }
  res.info.assign(hard.begin(), hard.begin() + code.k);
  return res;
}

double tb_bler(const LdpcCode& code, const BlockChannel& scenario,
               int n_blocks, std::uint64_t seed) {
  if (n_blocks < 1) throw ContractError("tb_bler: n_blocks must be >= 1");
  int errors = 0;
  std::vector<std::uint8_t> info(code.k);
  for (int b = 0; b < n_blocks; ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    for (auto& bit : info) bit = rng.bit() ? 1 : 0;
    const auto cw = encode(code, info);
    const auto llr = scenario(cw, rng);
    const auto dec = decode(code, llr, code.max_bp_iters);
    if (!std::equal(info.begin(), info.end(), dec.info.begin())) ++errors;
  }
  return static_cast<double>(errors) / n_blocks;
}

void save_code(const LdpcCode& code, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw StateError("save_code: cannot open " + path.string());
  out << code.n << ' ' << code.k << '\n';
  const int m = code.n_checks();
  for (int c = 0; c < m; ++c)
    for (int e = code.chk_ptr[c]; e < code.chk_ptr[c + 1]; ++e)
      out << c << ' ' << code.chk_var[e] << '\n';
  if (!out) throw StateError("save_code: write failed");
}

LdpcCode load_code(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StateError("load_code: cannot open " + path.string());
  int n = 0, k = 0;
  if (!(in >> n >> k) || n <= 0 || k <= 0 || k >= n)
    throw StateError("load_code: bad header");
  const int m = n - k;
  std::vector<std::vector<int>> rows(m);
  int r = 0, c = 0;
  while (in >> r >> c) {
    if (r < 0 || r >= m || c < 0 || c >= n)
      throw StateError("load_code: entry out of range");
    rows[r].push_back(c);
  }

  LdpcCode code;
  code.n = n;
  code.k = k;
  code.rate = static_cast<double>(k) / n;
  code.parity_words = (m + 63) / 64;
  code.chk_ptr.resize(m + 1, 0);
  for (int i = 0; i < m; ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    code.chk_ptr[i + 1] = code.chk_ptr[i] + static_cast<int>(rows[i].size());
  }
  code.chk_var.resize(code.chk_ptr[m]);
  for (int i = 0; i < m; ++i)
    std::copy(rows[i].begin(), rows[i].end(),
              code.chk_var.begin() + code.chk_ptr[i]);
  code.var_ptr.assign(n + 1, 0);
  for (int v : code.chk_var) ++code.var_ptr[v + 1];
  for (int v = 0; v < n; ++v) code.var_ptr[v + 1] += code.var_ptr[v];
  code.var_edge.resize(code.chk_var.size());
  {
    std::vector<int> fill(code.var_ptr.begin(), code.var_ptr.end() - 1);
    for (int e = 0; e < code.n_edges(); ++e)
      code.var_edge[fill[code.chk_var[e]]++] = e;
  }

  // stored parity is already in systematic arrangement: re-derive the
  // generator by inverting the trailing m x m block
  BitMatrix b(m, m), binv(m, m);
  for (int i = 0; i < m; ++i)
    for (int v : rows[i])
      if (v >= k) b.set(i, v - k);
  for (int i = 0; i < m; ++i) binv.set(i, i);
  for (int col = 0; col < m; ++col) {
    int pr = -1;
    for (int row = col; row < m; ++row) {
      if (b.get(row, col)) {
        pr = row;
        break;
      }
    }
    if (pr < 0) throw StateError("load_code: trailing block not invertible");
    if (pr != col) {
      for (int w = 0; w < b.words; ++w) std::swap(b.row(pr)[w], b.row(col)[w]);
      for (int w = 0; w < binv.words; ++w)
        std::swap(binv.row(pr)[w], binv.row(col)[w]);
    }
    for (int row = 0; row < m; ++row) {
      if (row != col && b.get(row, col)) {
        b.xor_rows(row, col);
        binv.xor_rows(row, col);
      }
    }
  }
  code.gen_cols.assign(static_cast<std::size_t>(k) * code.parity_words, 0);
  std::vector<std::uint64_t> binv_cols(
      static_cast<std::size_t>(m) * code.parity_words, 0);
  for (int row = 0; row < m; ++row)
    for (int col = 0; col < m; ++col)
      if (binv.get(row, col))
        binv_cols[static_cast<std::size_t>(col) * code.parity_words +
                  (row >> 6)] |= 1ull << (row & 63);
  for (int i = 0; i < m; ++i) {
    for (int v : rows[i]) {
      if (v >= k) continue;
      auto* dst =
          code.gen_cols.data() + static_cast<std::size_t>(v) * code.parity_words;
      const auto* src =
          binv_cols.data() + static_cast<std::size_t>(i) * code.parity_words;
      for (int w = 0; w < code.parity_words; ++w) dst[w] ^= src[w];
    }
  }
  return code;
}

}  // namespace mcslab
