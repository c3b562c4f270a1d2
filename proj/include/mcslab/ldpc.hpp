#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <filesystem>
#include <functional>
#include <vector>

#include "mcslab/errors.hpp"
#include "mcslab/rng.hpp"

namespace mcslab {

// Regular Gallager-style LDPC code, column weight 3, systematic encoding
// (info bits in the leading positions). The parity-check matrix is stored
// in column-permuted form so its last n-k columns are invertible over GF(2).
struct LdpcCode {
  int n = 0;  // codeword length
  int k = 0;  // information length
  double rate = 0.0;
  int max_bp_iters = 50;

  // sparse parity matrix, edges grouped per check row and per variable column
  std::vector<int> chk_ptr;    // size (n-k)+1
  std::vector<int> chk_var;    // variable id per edge, check-major order
  std::vector<int> var_ptr;    // size n+1
  std::vector<int> var_edge;   // edge ids (check-major indices) per variable

  // dense parity generator: column j holds the parity bits of info bit j,
  // packed 64 per word
  int parity_words = 0;
  std::vector<std::uint64_t> gen_cols;  // k columns * parity_words

  int n_checks() const { return n - k; }
  int n_edges() const { return static_cast<int>(chk_var.size()); }
};

LdpcCode build_code(int n, double rate, std::uint64_t seed);

std::vector<std::uint8_t> encode(const LdpcCode& code,
                                 const std::vector<std::uint8_t>& info);

struct DecodeResult {
  std::vector<std::uint8_t> info;
  bool converged = false;
};

// Sum-product flooding BP. llrs follow the detector convention
// (positive = bit 1); early stop on a zero syndrome.
DecodeResult decode(const LdpcCode& code, std::span<const double> llrs,
                    int max_iters);

bool syndrome_ok(const LdpcCode& code, const std::vector<std::uint8_t>& cw);

// Fraction of blocks with any post-decoding info-bit error. The scenario
// maps a transmitted codeword to detector LLRs (channel + demodulation).
using BlockChannel =
    std::function<std::vector<double>(const std::vector<std::uint8_t>& cw,
                                      Rng& rng)>;
double tb_bler(const LdpcCode& code, const BlockChannel& scenario,
               int n_blocks, std::uint64_t seed);

// Text cache format: header line "n k", then one "row col" pair per line.
void save_code(const LdpcCode& code, const std::filesystem::path& path);
LdpcCode load_code(const std::filesystem::path& path);

}  // namespace mcslab
