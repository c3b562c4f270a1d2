#include "mcslab/modem.hpp"

#include <cmath>

#include "mcslab/mathutil.hpp"
#include "mcslab/parallel.hpp"

namespace mcslab {

namespace {

std::uint32_t gray_encode(std::uint32_t i) { return i ^ (i >> 1); }

}  // namespace

Constellation Constellation::make(int q, double es) {
  if (q != 4 && q != 16 && q != 64)
    throw ConfigError("constellation: order must be 4, 16 or 64");
  if (!(es > 0.0)) throw ConfigError("constellation: es must be > 0");

  Constellation c;
  c.q = q;
  c.s = static_cast<int>(std::lround(std::log2(q)));
  c.es = es;
  const int side = 1 << (c.s / 2);
  const int half_bits = c.s / 2;

  // levels -(side-1), ..., -1, 1, ..., side-1 indexed by axis position;
  // axis position p carries Gray label gray(p)
  double raw_energy = 0.0;
  for (int p = 0; p < side; ++p) {
    const double lv = static_cast<double>(2 * p - (side - 1));
    raw_energy += lv * lv;
  }
  raw_energy = 2.0 * raw_energy / side;  // E[I^2 + Q^2] over uniform points
  const double scale = std::sqrt(es / raw_energy);

  c.points.resize(q);
  c.point_sq.resize(q);
  c.labels.resize(q);
  c.point_of_label.assign(q, -1);
  int id = 0;
  for (int pi = 0; pi < side; ++pi) {
    for (int pq = 0; pq < side; ++pq) {
      const double re = scale * static_cast<double>(2 * pi - (side - 1));
      const double im = scale * static_cast<double>(2 * pq - (side - 1));
      c.points(id) = std::complex<double>(re, im);
      c.point_sq(id) = re * re + im * im;
      const std::uint32_t label =
          (gray_encode(pi) << half_bits) | gray_encode(pq);
      c.labels[id] = label;
      c.point_of_label[label] = id;
      ++id;
    }
  }
  return c;
}

std::vector<std::complex<double>> modulate(std::span<const std::uint8_t> bits,
                                           const Constellation& c) {
  if (bits.size() % c.s != 0)
    throw ContractError("modulate: bit count not divisible by bits-per-symbol");
  std::vector<std::complex<double>> out;
  out.reserve(bits.size() / c.s);
  for (std::size_t i = 0; i < bits.size(); i += c.s) {
    std::uint32_t label = 0;
    for (int b = 0; b < c.s; ++b) label = (label << 1) | (bits[i + b] & 1u);
    out.push_back(c.points(c.point_of_label[label]));
  }
  return out;
}

void llrs_from_log_weights(const Eigen::ArrayXd& log_w, const Constellation& c,
                           double* out) {
  for (int s_pos = 0; s_pos < c.s; ++s_pos) {
    double max1 = -std::numeric_limits<double>::infinity();
    double max0 = max1;
    for (int id = 0; id < c.q; ++id) {
      const double v = log_w(id);
      if (c.bit_of(id, s_pos)) {
        if (v > max1) max1 = v;
      } else {
        if (v > max0) max0 = v;
      }
    }
    double sum1 = 0.0, sum0 = 0.0;
    for (int id = 0; id < c.q; ++id) {
      const double v = log_w(id);
      if (c.bit_of(id, s_pos))
        sum1 += std::exp(v - max1);
      else
        sum0 += std::exp(v - max0);
    }
    double llr;
    if (!std::isfinite(max1))
      llr = -kLlrMax;
    else if (!std::isfinite(max0))
      llr = kLlrMax;
    else
      llr = (max1 + std::log(sum1)) - (max0 + std::log(sum0));
    out[s_pos] = std::clamp(llr, -kLlrMax, kLlrMax);
  }
}

Eigen::ArrayXd posterior_llrs(const SymbolPosterior& p, const Constellation& c) {
  if (p.weights.size() != c.q)
    throw ContractError("posterior_llrs: weight count != constellation order");
  bool any_positive = false;
  for (int i = 0; i < c.q; ++i) {
    const double w = p.weights(i);
    if (!(w >= 0.0) || !std::isfinite(w))
      throw NumericError("posterior_llrs: weights must be finite and >= 0");
    if (w > 0.0) any_positive = true;
  }
  if (!any_positive)
    throw NumericError("posterior_llrs: degenerate posterior, all weights zero");

  Eigen::ArrayXd log_w(c.q);
  for (int i = 0; i < c.q; ++i)
    log_w(i) = p.weights(i) > 0.0 ? std::log(p.weights(i))
                                  : -std::numeric_limits<double>::infinity();
  Eigen::ArrayXd out(c.s);
  llrs_from_log_weights(log_w, c, out.data());
  return out;
}

void MiAccumulator::add(double llr, int bit) {
  const double x = (bit ? -llr : llr);  // -(2c-1)*lambda
  eta_sum += log1pexp(x) * 1.4426950408889634074;  // / ln 2
  ++n_bits;
}

double MiAccumulator::value() const {
  if (n_bits == 0) throw ContractError("MiAccumulator: no bits");
  const double mi = 1.0 - eta_sum / static_cast<double>(n_bits);
  return std::clamp(mi, 0.0, 1.0);
}

double measure_tb_mi(std::span<const double> llrs,
                     std::span<const std::uint8_t> true_bits) {
  if (llrs.size() != true_bits.size() || llrs.empty())
    throw ContractError("measure_tb_mi: length mismatch");
  MiAccumulator acc;
  for (std::size_t i = 0; i < llrs.size(); ++i)
    acc.add(llrs[i], true_bits[i] & 1);
  return acc.value();
}

PsiTable build_psi_table(int q, const std::vector<double>& snr_grid_db,
                         int n_symbols, std::uint64_t seed) {
  if (n_symbols < 10000)
    throw ConfigError("build_psi_table: n_symbols must be >= 1e4");
  for (std::size_t i = 1; i < snr_grid_db.size(); ++i)
    if (!(snr_grid_db[i] > snr_grid_db[i - 1]))
      throw ConfigError("build_psi_table: grid must be ascending");

  const Constellation c = Constellation::make(q);
  PsiTable table;
  table.q = q;
  table.snr_grid_db = snr_grid_db;
  table.mi.resize(snr_grid_db.size());

  parallel_for(static_cast<int>(snr_grid_db.size()), [&](int gi) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(gi), q));
    const double snr = db_to_linear(snr_grid_db[gi]);
    const double n0 = c.es / snr;
    Eigen::ArrayXd log_w(c.q);
    std::vector<double> llr(c.s);
    MiAccumulator acc;
    for (int it = 0; it < n_symbols; ++it) {
      const int id = rng.uniform_int(c.q);
      const std::complex<double> y =
          c.points(id) + std::sqrt(n0) * rng.cgaussian();
      // exact scalar-AWGN posterior exponents -|y - chi|^2 / N0
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < c.q; ++j) {
        const double d = -std::norm(y - c.points(j)) / n0;
        log_w(j) = d;
        if (d > best) best = d;
      }
      log_w -= best;
      llrs_from_log_weights(log_w, c, llr.data());
      for (int s_pos = 0; s_pos < c.s; ++s_pos)
        acc.add(llr[s_pos], c.bit_of(id, s_pos));
    }
    table.mi[gi] = acc.value();
  });
  table.mi = isotonic_non_decreasing(table.mi);
  for (double& v : table.mi) v = std::clamp(v, 0.0, 1.0);
  return table;
}

double psi_eval(const PsiTable& t, double snr_db) {
  if (t.snr_grid_db.empty()) throw StateError("psi_eval: empty table");
  return interp_clamped(t.snr_grid_db, t.mi, snr_db);
}

double psi_inverse(const PsiTable& t, double mi) {
  if (t.snr_grid_db.empty()) throw StateError("psi_inverse: empty table");
  if (mi <= t.mi.front()) return t.snr_grid_db.front();
  if (mi >= t.mi.back()) {
    // smallest abscissa achieving the final value
    std::size_t i = t.mi.size() - 1;
    while (i > 0 && t.mi[i - 1] >= mi) --i;
    return t.snr_grid_db[i];
  }
  for (std::size_t i = 1; i < t.mi.size(); ++i) {
    if (t.mi[i] >= mi) {
      if (t.mi[i] == t.mi[i - 1]) return t.snr_grid_db[i - 1];
      const double f = (mi - t.mi[i - 1]) / (t.mi[i] - t.mi[i - 1]);
      return t.snr_grid_db[i - 1] +
             f * (t.snr_grid_db[i] - t.snr_grid_db[i - 1]);
    }
  }
  return t.snr_grid_db.back();
}

}  // namespace mcslab
