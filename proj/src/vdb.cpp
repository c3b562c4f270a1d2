#include "mcslab/vdb.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mcslab/detector.hpp"
#include "mcslab/mathutil.hpp"

namespace mcslab {

FeatureVector extract_feature(const ChannelRealization& h, double rho, int q,
                              const PsiTable& psi, int user) {
  if (user < 0 || user >= h.config.n_ue)
    throw ContractError("extract_feature: user out of range");
  if (psi.q != q) throw ContractError("extract_feature: psi table order mismatch");
  const Eigen::MatrixXd all = extract_features_all(h, rho, psi);
  FeatureVector f;
  f.values = all.row(user).transpose();
  return f;
}

Eigen::MatrixXd extract_features_all(const ChannelRealization& h, double rho,
                                     const PsiTable& psi) {
  const int l_sub = h.config.n_subcarriers;
  const int m = h.config.n_ue;
  Eigen::MatrixXd out(m, l_sub);
  for (int l = 0; l < l_sub; ++l) {
    const Eigen::ArrayXd gamma = lmmse_sinr(h.h[l], rho);
    for (int u = 0; u < m; ++u)
      out(u, l) = psi_eval(psi, linear_to_db(std::max(gamma(u), 1e-30)));
  }
  return out;
}

namespace {

void top_k_insert(std::vector<SearchHit>& heap, int k, const SearchHit& hit) {
  // ordered ascending by (distance, id); heap holds at most k
  auto worse = [](const SearchHit& a, const SearchHit& b) {
    return a.distance < b.distance ||
           (a.distance == b.distance && a.id < b.id);
  };
  auto pos = std::lower_bound(heap.begin(), heap.end(), hit, worse);
  if (static_cast<int>(heap.size()) < k) {
    heap.insert(pos, hit);
  } else if (pos != heap.end()) {
    heap.insert(pos, hit);
    heap.pop_back();
  }
}

Eigen::VectorXf to_f32(const FeatureVector& q) {
  return q.values.cast<float>();
}

}  // namespace

FlatIndex build_flat(const std::vector<VdbEntry>& entries) {
  if (entries.empty()) throw ConfigError("build_flat: no entries");
  const int d = static_cast<int>(entries[0].key.values.size());
  FlatIndex idx;
  idx.keys.resize(d, static_cast<int>(entries.size()));
  idx.values.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].key.values.size() != d)
      throw ContractError("build_flat: inconsistent key dimension");
    idx.keys.col(static_cast<int>(i)) = entries[i].key.values.cast<float>();
    idx.values[i] = static_cast<float>(entries[i].value);
  }
  return idx;
}

std::vector<SearchHit> flat_search(const FlatIndex& index,
                                   const FeatureVector& query, int k) {
  if (index.size() == 0) throw StateError("flat_search: empty index");
  if (query.values.size() != index.d_key())
    throw ContractError("flat_search: query dimension mismatch");
  if (k < 1) throw ContractError("flat_search: k must be >= 1");
  k = std::min(k, index.size());
  const Eigen::VectorXf q = to_f32(query);
  std::vector<SearchHit> heap;
  heap.reserve(k + 1);
  for (int i = 0; i < index.size(); ++i) {
    const double d =
        static_cast<double>((index.keys.col(i) - q).squaredNorm());
    top_k_insert(heap, k, {i, d, index.values[i]});
  }
  return heap;
}

Eigen::MatrixXf kmeans(const Eigen::MatrixXf& points, int k, int iters,
                       Rng& rng, std::vector<int>* assignments) {
  const int n = static_cast<int>(points.cols());
  const int d = static_cast<int>(points.rows());
  if (n < 1 || k < 1) throw ConfigError("kmeans: need points and k >= 1");

  Eigen::MatrixXf centroids(d, k);
  // k-means++ seeding
  Eigen::VectorXf d2(n);
  centroids.col(0) = points.col(rng.uniform_int(n));
  d2 = (points.colwise() - centroids.col(0)).colwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = static_cast<double>(d2.sum());
    int pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(n);
    }
    centroids.col(c) = points.col(pick);
    d2 = d2.cwiseMin(
        (points.colwise() - centroids.col(c)).colwise().squaredNorm().transpose());
  }

  std::vector<int> assign(n, 0);
  Eigen::VectorXf pt_sq = points.colwise().squaredNorm();
  Eigen::MatrixXf dots;
  Eigen::VectorXf cen_sq;
  Eigen::VectorXf min_d(n);
  for (int it = 0; it < iters; ++it) {
    cen_sq = centroids.colwise().squaredNorm();
    dots.noalias() = centroids.transpose() * points;  // k x n
    for (int i = 0; i < n; ++i) {
      int best = 0;
      float best_d = cen_sq(0) - 2.0f * dots(0, i);
      for (int c = 1; c < k; ++c) {
        const float dist = cen_sq(c) - 2.0f * dots(c, i);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      assign[i] = best;
      min_d(i) = best_d + pt_sq(i);
    }
    Eigen::MatrixXf sums = Eigen::MatrixXf::Zero(d, k);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.col(assign[i]) += points.col(i);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.col(c) = sums.col(c) / static_cast<float>(counts[c]);
      } else {
        // reseed an empty cluster from the farthest point
        int far = 0;
        min_d.maxCoeff(&far);
        centroids.col(c) = points.col(far);
        min_d(far) = 0.0f;
      }
    }
  }
  // final assignment against the last centroid update
  cen_sq = centroids.colwise().squaredNorm();
  dots.noalias() = centroids.transpose() * points;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    float best_d = cen_sq(0) - 2.0f * dots(0, i);
    for (int c = 1; c < k; ++c) {
      const float dist = cen_sq(c) - 2.0f * dots(c, i);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    assign[i] = best;
  }
  if (assignments) *assignments = std::move(assign);
  return centroids;
}

void validate_ivfpq_params(int d_vdb, int d_key, int k_ivf, int d_sub,
                           int p_ivf) {
  if (d_vdb < 1) throw ConfigError("ivfpq: empty database");
  if (k_ivf < 1 || k_ivf > d_vdb)
    throw ConfigError("ivfpq: need 1 <= k_ivf <= D_VDB");
  if (d_sub < 1 || d_key % d_sub != 0)
    throw ConfigError("ivfpq: D_key must be divisible by d_sub");
  if (p_ivf < 1 || p_ivf > k_ivf)
    throw ConfigError("ivfpq: need 1 <= p_ivf <= k_ivf");
}

IvfPqIndex build_ivfpq(const std::vector<VdbEntry>& entries, int k_ivf,
                       int d_sub, std::uint64_t seed) {
  if (entries.empty()) throw ConfigError("build_ivfpq: no entries");
  const int d = static_cast<int>(entries[0].key.values.size());
  validate_ivfpq_params(static_cast<int>(entries.size()), d, k_ivf, d_sub, 1);

  const int n = static_cast<int>(entries.size());
  Eigen::MatrixXf pts(d, n);
  IvfPqIndex idx;
  idx.values.resize(n);
  for (int i = 0; i < n; ++i) {
    if (entries[i].key.values.size() != d)
      throw ContractError("build_ivfpq: inconsistent key dimension");
    pts.col(i) = entries[i].key.values.cast<float>();
    idx.values[i] = static_cast<float>(entries[i].value);
  }

  idx.d_key = d;
  idx.k_ivf = k_ivf;
  idx.d_sub = d_sub;
  idx.n_sub = d / d_sub;

  constexpr int kKmeansIters = 25;
  std::vector<int> assign;
  Rng rng(derive_seed(seed, 0xC0A));
  idx.centroids = kmeans(pts, k_ivf, kKmeansIters, rng, &assign);
  idx.inverted_lists.assign(k_ivf, {});
  for (int i = 0; i < n; ++i) idx.inverted_lists[assign[i]].push_back(i);

  // per-subspace codebooks trained on the raw subvectors
  idx.codebooks.resize(idx.n_sub);
  idx.codes.assign(static_cast<std::size_t>(n) * idx.n_sub, 0);
  for (int s = 0; s < idx.n_sub; ++s) {
    const Eigen::MatrixXf sub = pts.middleRows(s * d_sub, d_sub);
    const int book = std::min(256, n);
    Rng srng(derive_seed(seed, 0xB00C, static_cast<std::uint64_t>(s)));
    std::vector<int> sub_assign;
    Eigen::MatrixXf centroids = kmeans(sub, book, kKmeansIters, srng, &sub_assign);
    if (book < 256) {
      // pad so codebooks always hold 256 entries
      Eigen::MatrixXf padded(d_sub, 256);
      padded.setZero();
      padded.leftCols(book) = centroids;
      for (int c = book; c < 256; ++c) padded.col(c) = centroids.col(book - 1);
      centroids = padded;
    }
    idx.codebooks[s] = centroids;
    for (int i = 0; i < n; ++i)
      idx.codes[static_cast<std::size_t>(i) * idx.n_sub + s] =
          static_cast<std::uint8_t>(sub_assign[i]);
  }

  idx.raw_keys = pts;
  idx.has_raw_keys = true;
  return idx;
}

void add_entry(IvfPqIndex& index, const VdbEntry& entry) {
  if (index.k_ivf == 0) throw StateError("add_entry: index not built");
  if (entry.key.values.size() != index.d_key)
    throw ContractError("add_entry: key dimension mismatch");
  std::lock_guard<std::mutex> lock(*index.write_lock);
  const Eigen::VectorXf key = entry.key.values.cast<float>();
  int best = 0;
  float best_d = (index.centroids.col(0) - key).squaredNorm();
  for (int c = 1; c < index.k_ivf; ++c) {
    const float d = (index.centroids.col(c) - key).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  const int id = index.size();
  index.inverted_lists[best].push_back(id);
  index.values.push_back(static_cast<float>(entry.value));
  for (int s = 0; s < index.n_sub; ++s) {
    const Eigen::VectorXf sub = key.segment(s * index.d_sub, index.d_sub);
    int bc = 0;
    float bd = (index.codebooks[s].col(0) - sub).squaredNorm();
    for (int c = 1; c < 256; ++c) {
      const float d = (index.codebooks[s].col(c) - sub).squaredNorm();
      if (d < bd) {
        bd = d;
        bc = c;
      }
    }
    index.codes.push_back(static_cast<std::uint8_t>(bc));
  }
  if (index.has_raw_keys) {
    index.raw_keys.conservativeResize(Eigen::NoChange, id + 1);
    index.raw_keys.col(id) = key;
  }
}

std::vector<SearchHit> ann_search(const IvfPqIndex& index,
                                  const FeatureVector& query, int k, int p_ivf,
                                  bool exact_distance_hook) {
  if (index.size() == 0) throw StateError("ann_search: empty index");
  if (query.values.size() != index.d_key)
    throw ContractError("ann_search: query dimension mismatch");
  if (p_ivf < 1 || p_ivf > index.k_ivf)
    throw ContractError("ann_search: need 1 <= p_ivf <= k_ivf");
  if (k < 1) throw ContractError("ann_search: k must be >= 1");
  if (exact_distance_hook && !index.has_raw_keys)
    throw StateError("ann_search: raw keys unavailable for exact hook");

  const Eigen::VectorXf q = to_f32(query);

  // nearest centroids
  std::vector<std::pair<float, int>> cd(index.k_ivf);
  for (int c = 0; c < index.k_ivf; ++c)
    cd[c] = {(index.centroids.col(c) - q).squaredNorm(), c};
  std::partial_sort(cd.begin(), cd.begin() + p_ivf, cd.end());

  // asymmetric-distance lookup tables
  Eigen::MatrixXf tables(256, index.n_sub);
  if (!exact_distance_hook) {
    for (int s = 0; s < index.n_sub; ++s) {
      const Eigen::VectorXf sub = q.segment(s * index.d_sub, index.d_sub);
      tables.col(s) =
          (index.codebooks[s].colwise() - sub).colwise().squaredNorm();
    }
  }

  std::vector<SearchHit> heap;
  heap.reserve(k + 1);
  for (int p = 0; p < p_ivf; ++p) {
    for (const std::int32_t id : index.inverted_lists[cd[p].second]) {
      double dist;
      if (exact_distance_hook) {
        dist = static_cast<double>((index.raw_keys.col(id) - q).squaredNorm());
      } else {
        const std::uint8_t* code =
            index.codes.data() + static_cast<std::size_t>(id) * index.n_sub;
        float acc = 0.0f;
        for (int s = 0; s < index.n_sub; ++s) acc += tables(code[s], s);
        dist = static_cast<double>(acc);
      }
      top_k_insert(heap, k, {id, dist, index.values[id]});
    }
  }
  return heap;
}

double predict_mi_topk(const IvfPqIndex& index, const FeatureVector& query,
                       int k, int p_ivf) {
  const auto hits = ann_search(index, query, k, p_ivf);
  if (hits.empty()) throw StateError("predict_mi_topk: nothing retrieved");
  double sum = 0.0;
  for (const auto& h : hits) sum += h.value;
  return sum / static_cast<double>(hits.size());
}

double predict_mi_topk(const FlatIndex& index, const FeatureVector& query,
                       int k) {
  const auto hits = flat_search(index, query, std::min(k, index.size()));
  if (hits.empty()) throw StateError("predict_mi_topk: nothing retrieved");
  double sum = 0.0;
  for (const auto& h : hits) sum += h.value;
  return sum / static_cast<double>(hits.size());
}

double search_op_count(double k_ivf, double p_ivf, double d_vdb) {
  return k_ivf + p_ivf * d_vdb / k_ivf;
}

namespace {

constexpr std::uint32_t kMagic = 0x4256444Du;  // "MDVB" little-endian
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void put_vec(std::ofstream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

template <typename T>
void get_vec(std::ifstream& in, T* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(T)));
}

}  // namespace

void save_index(const IvfPqIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StateError("save_index: cannot open " + path.string());
  put(out, kMagic);
  put(out, kVersion);
  put(out, static_cast<std::int32_t>(index.d_key));
  put(out, static_cast<std::int32_t>(index.size()));
  put(out, static_cast<std::int32_t>(index.k_ivf));
  put(out, static_cast<std::int32_t>(index.d_sub));
  put_vec(out, index.centroids.data(),
          static_cast<std::size_t>(index.d_key) * index.k_ivf);
  for (int s = 0; s < index.n_sub; ++s)
    put_vec(out, index.codebooks[s].data(),
            static_cast<std::size_t>(index.d_sub) * 256);
  for (const auto& list : index.inverted_lists) {
    put(out, static_cast<std::int32_t>(list.size()));
    put_vec(out, list.data(), list.size());
  }
  put_vec(out, index.codes.data(), index.codes.size());
  put_vec(out, index.values.data(), index.values.size());
  if (!out) throw StateError("save_index: write failed");
}

IvfPqIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StateError("load_index: cannot open " + path.string());
  if (get<std::uint32_t>(in) != kMagic)
    throw StateError("load_index: bad magic");
  if (get<std::uint32_t>(in) != kVersion)
    throw StateError("load_index: unsupported version");
  IvfPqIndex idx;
  idx.d_key = get<std::int32_t>(in);
  const int n = get<std::int32_t>(in);
  idx.k_ivf = get<std::int32_t>(in);
  idx.d_sub = get<std::int32_t>(in);
  if (idx.d_key < 1 || idx.d_sub < 1 || idx.d_key % idx.d_sub != 0)
    throw StateError("load_index: corrupt header");
  idx.n_sub = idx.d_key / idx.d_sub;
  idx.centroids.resize(idx.d_key, idx.k_ivf);
  get_vec(in, idx.centroids.data(),
          static_cast<std::size_t>(idx.d_key) * idx.k_ivf);
  idx.codebooks.resize(idx.n_sub);
  for (int s = 0; s < idx.n_sub; ++s) {
    idx.codebooks[s].resize(idx.d_sub, 256);
    get_vec(in, idx.codebooks[s].data(),
            static_cast<std::size_t>(idx.d_sub) * 256);
  }
  idx.inverted_lists.resize(idx.k_ivf);
  for (auto& list : idx.inverted_lists) {
    const int len = get<std::int32_t>(in);
    list.resize(len);
    get_vec(in, list.data(), list.size());
  }
  idx.codes.resize(static_cast<std::size_t>(n) * idx.n_sub);
  get_vec(in, idx.codes.data(), idx.codes.size());
  idx.values.resize(n);
  get_vec(in, idx.values.data(), idx.values.size());
  if (!in) throw StateError("load_index: truncated file");
  idx.has_raw_keys = false;
  return idx;
}

}  // namespace mcslab
