#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <vector>

#include "mcslab/channel.hpp"
#include "mcslab/errors.hpp"
#include "mcslab/modem.hpp"

namespace mcslab {

// Per-subcarrier LMMSE-predicted MI for one user; entries in [0,1].
struct FeatureVector {
  Eigen::VectorXd values;
};

struct VdbEntry {
  FeatureVector key;
  double value = 0.0;  // measured TB-level MI in [0,1]
};

// upsilon[l] = psi_q(gamma_lmmse[l]) for l = 1..L of user m.
FeatureVector extract_feature(const ChannelRealization& h, double rho, int q,
                              const PsiTable& psi, int user);
// All users at once (shared per-subcarrier solves).
Eigen::MatrixXd extract_features_all(const ChannelRealization& h, double rho,
                                     const PsiTable& psi);  // M x L

struct SearchHit {
  int id = -1;
  double distance = 0.0;  // squared Euclidean (exact or ADC estimate)
  double value = 0.0;
};

// Exhaustive exact search. Keys and values are stored as 32-bit floats,
// matching the on-disk artifact layout.
struct FlatIndex {
  Eigen::MatrixXf keys;  // d_key x n
  std::vector<float> values;

  int size() const { return static_cast<int>(values.size()); }
  int d_key() const { return static_cast<int>(keys.rows()); }
};

FlatIndex build_flat(const std::vector<VdbEntry>& entries);
std::vector<SearchHit> flat_search(const FlatIndex& index,
                                   const FeatureVector& query, int k);

// Inverted-file coarse quantizer plus product quantization of the keys.
struct IvfPqIndex {
  int d_key = 0;
  int k_ivf = 0;
  int d_sub = 0;
  int n_sub = 0;
  Eigen::MatrixXf centroids;                // d_key x k_ivf
  std::vector<Eigen::MatrixXf> codebooks;   // n_sub of (d_sub x 256)
  std::vector<std::vector<std::int32_t>> inverted_lists;
  std::vector<std::uint8_t> codes;          // n * n_sub, entry-major
  std::vector<float> values;

  // raw keys are kept in memory for the exact-distance test hook; they are
  // not part of the serialized artifact
  Eigen::MatrixXf raw_keys;
  bool has_raw_keys = false;

  std::shared_ptr<std::mutex> write_lock = std::make_shared<std::mutex>();

  int size() const { return static_cast<int>(values.size()); }
};

// Accepts the build parameters without building (config validation).
void validate_ivfpq_params(int d_vdb, int d_key, int k_ivf, int d_sub,
                           int p_ivf);

IvfPqIndex build_ivfpq(const std::vector<VdbEntry>& entries, int k_ivf,
                       int d_sub, std::uint64_t seed);

// Appends one entry to its nearest inverted list (exclusive).
void add_entry(IvfPqIndex& index, const VdbEntry& entry);

// Scans the p_ivf nearest-centroid lists with asymmetric-distance lookup
// tables; exact_distance_hook scores candidates against the raw keys instead
// (test hook for the degenerate-equivalence property).
std::vector<SearchHit> ann_search(const IvfPqIndex& index,
                                  const FeatureVector& query, int k, int p_ivf,
                                  bool exact_distance_hook = false);

double predict_mi_topk(const IvfPqIndex& index, const FeatureVector& query,
                       int k, int p_ivf);
double predict_mi_topk(const FlatIndex& index, const FeatureVector& query,
                       int k);

// Search-operation count model: k_ivf + p_ivf * d_vdb / k_ivf.
double search_op_count(double k_ivf, double p_ivf, double d_vdb);

// Little-endian binary artifact; layout documented in docs/vdb_format.md.
void save_index(const IvfPqIndex& index, const std::filesystem::path& path);
IvfPqIndex load_index(const std::filesystem::path& path);

// Lloyd iterations with k-means++ seeding; empty clusters are reseeded from
// the farthest point. Returns centroids (d x k) and fills assignments.
Eigen::MatrixXf kmeans(const Eigen::MatrixXf& points, int k, int iters,
                       Rng& rng, std::vector<int>* assignments = nullptr);

}  // namespace mcslab
