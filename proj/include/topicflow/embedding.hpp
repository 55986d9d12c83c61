#pragma once

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "topicflow/common.hpp"
#include "topicflow/llm.hpp"

namespace topicflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EmbeddingMatrix {
  Matrix vectors;  // n x D
  std::vector<std::string> ids;

  Eigen::Index rows() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string provider_id() const = 0;
  // One vector per text, all of the same width.  Throws TransportError.
  virtual std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) = 0;
};

// Offline embeddings: each token maps to a pseudo-random Gaussian vector
// seeded by its 64-bit hash; a text embeds to the L2-normalized sum of its
// token vectors.  Texts sharing vocabulary therefore land close together.
class MockEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(int dim = 64, TokenMode mode = TokenMode::words) : dim_(dim), mode_(mode) {}

  std::string provider_id() const override { return "mock-embedding-" + std::to_string(dim_); }
  int dim() const { return dim_; }

  std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) override {
    ++batches_;
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::vector<float> embed_one(const std::string& text) const {
    std::vector<double> acc(dim_, 0.0);
    auto tokens = tokenize(text, mode_);
    if (tokens.empty()) tokens.push_back(text);
    for (const auto& tok : tokens) {
      auto v = token_vector(tok);
      for (int i = 0; i < dim_; ++i) acc[i] += v[i];
    }
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);
    std::vector<float> out(dim_);
    for (int i = 0; i < dim_; ++i) out[i] = static_cast<float>(acc[i] / norm);
    return out;
  }

  std::size_t batches() const { return batches_; }

 private:
  std::vector<double> token_vector(const std::string& token) const {
    std::uint64_t state = fnv1a64(token);
    std::vector<double> v(dim_);
    for (int i = 0; i < dim_; i += 2) {
      // Box-Muller over splitmix64 uniforms; platform independent.
      double u1 = (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
      double u2 = (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
      double r = std::sqrt(-2.0 * std::log(u1));
      v[i] = r * std::cos(2.0 * M_PI * u2);
      if (i + 1 < dim_) v[i + 1] = r * std::sin(2.0 * M_PI * u2);
    }
    return v;
  }

  int dim_;
  TokenMode mode_;
  std::size_t batches_ = 0;
};

// Disk cache keyed by (provider id, text hash): float32 little-endian rows
// appended to rows.f32, with index.tsv mapping hash -> row.
class EmbeddingCache {
 public:
  EmbeddingCache(std::filesystem::path dir, const std::string& provider_id) {
    std::string safe;
    for (char c : provider_id) safe.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_');
    dir_ = std::move(dir) / safe;
    std::filesystem::create_directories(dir_);
    load();
  }

  std::optional<std::vector<float>> get(const std::string& text) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(fnv1a64(text));
    if (it == index_.end()) return std::nullopt;
    return rows_[it->second];
  }

  void put(const std::string& text, const std::vector<float>& row) {
    std::lock_guard lock(mutex_);
    auto h = fnv1a64(text);
    if (index_.count(h)) return;
    if (width_ == 0) width_ = row.size();
    if (row.size() != width_) throw DataError("embedding cache width mismatch");
    std::ofstream data(dir_ / "rows.f32", std::ios::binary | std::ios::app);
    for (float f : row) write_le(data, f);
    std::ofstream idx(dir_ / "index.tsv", std::ios::app);
    idx << hex64(h) << "\t" << rows_.size() << "\t" << width_ << "\n";
    index_[h] = rows_.size();
    rows_.push_back(row);
  }

  std::size_t size() const { return rows_.size(); }

 private:
  static void write_le(std::ostream& os, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                          static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }

  void load() {
    auto idx_path = dir_ / "index.tsv";
    if (!std::filesystem::exists(idx_path)) return;
    std::ifstream idx(idx_path);
    std::string blob = read_file(dir_ / "rows.f32");
    for (std::string hash; idx >> hash;) {
      std::size_t row, width;
      if (!(idx >> row >> width)) throw DataError("embedding cache index truncated");
      width_ = width;
      if ((row + 1) * width * 4 > blob.size()) break;  // row data not flushed; drop it
      std::vector<float> v(width);
      for (std::size_t i = 0; i < width; ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + (row * width + i) * 4);
        std::uint32_t bits = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        std::memcpy(&v[i], &bits, 4);
      }
      index_[std::stoull(hash, nullptr, 16)] = rows_.size();
      rows_.push_back(std::move(v));
    }
  }

  std::filesystem::path dir_;
  std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::vector<float>> rows_;
  std::size_t width_ = 0;
};

struct DimensionMismatch : DataError {
  explicit DimensionMismatch(const std::string& what) : DataError("dimension mismatch: " + what) {}
};

// Embeds texts in batches (cache first); rows come back in input order
// regardless of batch size.
inline EmbeddingMatrix embed(const std::vector<std::string>& texts, EmbeddingProvider& provider, std::size_t batch_size,
                             std::vector<std::string> ids = {}, EmbeddingCache* cache = nullptr) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  for (const auto& t : texts)
    if (trim(t).empty()) throw DataError("cannot embed an empty text");
  if (ids.empty())
    for (std::size_t i = 0; i < texts.size(); ++i) ids.push_back(std::to_string(i));
  if (ids.size() != texts.size()) throw DataError("ids and texts differ in length");

  std::vector<std::vector<float>> rows(texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (cache)
      if (auto hit = cache->get(texts[i])) {
        rows[i] = std::move(*hit);
        continue;
      }
    missing.push_back(i);
  }
  for (std::size_t b = 0; b < missing.size(); b += batch_size) {
    std::vector<std::string> batch;
    for (std::size_t j = b; j < std::min(missing.size(), b + batch_size); ++j) batch.push_back(texts[missing[j]]);
    auto out = provider.embed_batch(batch);
    if (out.size() != batch.size()) throw DimensionMismatch("provider returned wrong number of rows");
    for (std::size_t j = 0; j < out.size(); ++j) {
      rows[missing[b + j]] = out[j];
      if (cache) cache->put(batch[j], out[j]);
    }
  }
  EmbeddingMatrix m;
  m.ids = std::move(ids);
  std::size_t width = texts.empty() ? 0 : rows[0].size();
  m.vectors.resize(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) throw DimensionMismatch("inconsistent embedding widths");
    bool nonzero = false;
    for (std::size_t j = 0; j < width; ++j) {
      if (!std::isfinite(rows[i][j])) throw DataError("non-finite embedding entry");
      nonzero = nonzero || rows[i][j] != 0.0f;
      m.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    if (!nonzero) throw DataError("all-zero embedding row for id " + m.ids[i]);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Incremental PCA

struct PcaModel {
  Vector mean;                       // D
  Matrix components;                 // d x D, orthonormal rows
  Vector explained_variance;         // d
  Vector explained_variance_ratio;   // d, non-increasing, sums to <= 1
  long long n_samples = 0;

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index dim() const { return components.rows(); }
};

struct PcaOptions {
  double variance_target = 0.90;
  std::optional<Eigen::Index> max_dim = 450;
  Eigen::Index chunk_size = 1024;
};

struct DegenerateInput : DataError {
  explicit DegenerateInput(const std::string& what) : DataError("degenerate input: " + what) {}
};

namespace detail {

// Deterministic sign: the largest-magnitude entry of each row is positive.
inline void fix_signs(Matrix& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Eigen::Index arg;
    rows.row(r).cwiseAbs().maxCoeff(&arg);
    if (rows(r, arg) < 0) rows.row(r) *= -1.0;
  }
}

}  // namespace detail

// Fits PCA chunk by chunk (the incremental SVD update used by
// scikit-learn's IncrementalPCA), keeping every component up to max_dim so
// the retained spectrum is exact whenever max_dim >= rank.  The reported
// dimension is the smallest d reaching variance_target, capped by max_dim.
inline PcaModel fit_pca(const Matrix& X, const PcaOptions& opt = {}) {
  const Eigen::Index n = X.rows(), D = X.cols();
  if (n < 2) throw DataError("fit_pca needs at least two rows");
  if (!(opt.variance_target > 0.0 && opt.variance_target <= 1.0)) throw ConfigError("variance_target must be in (0, 1]");
  if (opt.chunk_size < 1) throw ConfigError("chunk_size must be positive");
  const Eigen::Index keep_cap = std::min(D, opt.max_dim ? *opt.max_dim : D);
  if (keep_cap < 1) throw ConfigError("max_dim must be positive");

  Vector mean = Vector::Zero(D);
  Vector m2 = Vector::Zero(D);  // running sum of squared deviations per column
  Matrix components(0, D);
  Vector singular(0);
  long long seen = 0;

  for (Eigen::Index start = 0; start < n; start += opt.chunk_size) {
    const Eigen::Index m = std::min(opt.chunk_size, n - start);
    const Matrix batch = X.middleRows(start, m);
    const Vector batch_mean = batch.colwise().mean().transpose();
    const Vector batch_m2 = (batch.rowwise() - batch_mean.transpose()).colwise().squaredNorm().transpose();

    const double total = static_cast<double>(seen + m);
    Matrix stacked;
    if (seen == 0) {
      stacked = batch.rowwise() - batch_mean.transpose();
    } else {
      const Vector correction = std::sqrt(static_cast<double>(seen) * m / total) * (mean - batch_mean);
      stacked.resize(components.rows() + m + 1, D);
      stacked.topRows(components.rows()) = singular.asDiagonal() * components;
      stacked.middleRows(components.rows(), m) = batch.rowwise() - batch_mean.transpose();
      stacked.bottomRows(1) = correction.transpose();
    }
    // Chan et al. parallel variance update.
    const Vector delta = batch_mean - mean;
    m2 = m2 + batch_m2 + delta.cwiseProduct(delta) * (static_cast<double>(seen) * m / total);
    mean = mean + delta * (static_cast<double>(m) / total);
    seen += m;

    Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinV);
    const Eigen::Index keep = std::min<Eigen::Index>(keep_cap, svd.singularValues().size());
    singular = svd.singularValues().head(keep);
    components = svd.matrixV().leftCols(keep).transpose();
    detail::fix_signs(components);
  }

  const double total_var = m2.sum() / static_cast<double>(n - 1);
  if (!(total_var > 0.0)) throw DegenerateInput("all rows identical (zero variance)");

  Vector ev = singular.array().square() / static_cast<double>(n - 1);
  Vector ratio = ev / total_var;
  Eigen::Index d = ratio.size();
  double cum = 0.0;
  for (Eigen::Index i = 0; i < ratio.size(); ++i) {
    cum += ratio(i);
    if (cum >= opt.variance_target - 1e-12) {
      d = i + 1;
      break;
    }
  }
  // drop numerically null directions so components stay orthonormal
  while (d > 1 && ev(d - 1) <= 1e-14 * ev(0)) --d;

  PcaModel model;
  model.mean = mean;
  model.components = components.topRows(d);
  model.explained_variance = ev.head(d);
  model.explained_variance_ratio = ratio.head(d);
  model.n_samples = n;
  return model;
}

inline PcaModel fit_pca(const EmbeddingMatrix& X, const PcaOptions& opt = {}) { return fit_pca(X.vectors, opt); }

inline Matrix transform(const PcaModel& model, const Matrix& X) {
  if (X.cols() != model.input_dim())
    throw DimensionMismatch("expected width " + std::to_string(model.input_dim()) + ", got " + std::to_string(X.cols()));
  return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

inline Vector transform(const PcaModel& model, const Vector& x) {
  return transform(model, Matrix(x.transpose())).row(0).transpose();
}

// ---------------------------------------------------------------------------
// Binary containers: magic, rows, cols (uint64 LE), then float64 LE data.

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    int c = is.get();
    if (c == EOF) throw DataError("truncated binary matrix");
    v |= static_cast<std::uint64_t>(c & 0xff) << (8 * i);
  }
  return v;
}
inline void write_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(os, bits);
}
inline double read_f64(std::istream& is) {
  std::uint64_t bits = read_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace detail

inline void write_matrix(std::ostream& os, const Matrix& m) {
  detail::write_u64(os, static_cast<std::uint64_t>(m.rows()));
  detail::write_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) detail::write_f64(os, m(r, c));
}

inline Matrix read_matrix(std::istream& is) {
  auto rows = detail::read_u64(is), cols = detail::read_u64(is);
  if (rows > (1ull << 32) || cols > (1ull << 32)) throw DataError("implausible matrix shape");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = detail::read_f64(is);
  return m;
}

inline constexpr char kMatrixMagic[8] = {'T', 'F', 'M', 'A', 'T', '0', '0', '1'};
inline constexpr char kPcaMagic[8] = {'T', 'F', 'P', 'C', 'A', '0', '0', '1'};

inline void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ostringstream os(std::ios::binary);
  os.write(kMatrixMagic, 8);
  write_matrix(os, m);
  write_file_atomic(path, os.str());
}

inline Matrix load_matrix(const std::filesystem::path& path) {
  std::istringstream is(read_file(path), std::ios::binary);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMatrixMagic, 8) != 0) throw DataError("not a matrix file: " + path.string());
  return read_matrix(is);
}

inline void save_pca(const std::filesystem::path& path, const PcaModel& model) {
  std::ostringstream os(std::ios::binary);
  os.write(kPcaMagic, 8);
  detail::write_u64(os, static_cast<std::uint64_t>(model.n_samples));
  write_matrix(os, Matrix(model.mean.transpose()));
  write_matrix(os, model.components);
  write_matrix(os, Matrix(model.explained_variance.transpose()));
  write_matrix(os, Matrix(model.explained_variance_ratio.transpose()));
  write_file_atomic(path, os.str());
}

inline PcaModel load_pca(const std::filesystem::path& path) {
  std::istringstream is(read_file(path), std::ios::binary);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kPcaMagic, 8) != 0) throw DataError("not a PCA model file: " + path.string());
  PcaModel m;
  m.n_samples = static_cast<long long>(detail::read_u64(is));
  m.mean = read_matrix(is).row(0).transpose();
  m.components = read_matrix(is);
  m.explained_variance = read_matrix(is).row(0).transpose();
  m.explained_variance_ratio = read_matrix(is).row(0).transpose();
  return m;
}

// ---------------------------------------------------------------------------

struct ZeroVector : DataError {
  ZeroVector() : DataError("cosine distance of a zero vector") {}
};

inline double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ZeroVector();
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

inline double cosine_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("cosine_distance operands differ in length");
  return 1.0 - cosine_similarity(a, b);
}

}  // namespace topicflow
