#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topicflow/common.hpp"
#include "topicflow/corpus.hpp"
#include "topicflow/embedding.hpp"

namespace topicflow {

struct InsufficientData : DataError {
  explicit InsufficientData(const std::string& what) : DataError("insufficient data: " + what) {}
};

struct InvalidMatrix : DataError {
  explicit InvalidMatrix(const std::string& what) : DataError("invalid distance matrix: " + what) {}
};

struct ClusterLabeling {
  std::vector<int> labels;  // -1 = outlier
  int k = 0;

  std::vector<std::vector<int>> members() const {
    std::vector<std::vector<int>> out(k);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] >= 0) out[labels[i]].push_back(static_cast<int>(i));
    return out;
  }
  std::size_t outliers() const { return std::count(labels.begin(), labels.end(), -1); }
};

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  // Attaches both roots under `into` (which must be a fresh root).
  void attach(int a, int b, int into) {
    parent[find(a)] = into;
    parent[find(b)] = into;
  }
  bool unite(int a, int b) {
    a = find(a), b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[b] = a;
    return true;
  }
};

// Relabels so that cluster ids follow the smallest member index.
inline int canonical_labels(std::vector<int>& labels) {
  std::map<int, int> remap;
  for (int& l : labels) {
    if (l < 0) continue;
    auto [it, fresh] = remap.try_emplace(l, static_cast<int>(remap.size()));
    l = it->second;
  }
  return static_cast<int>(remap.size());
}

}  // namespace detail

// HDBSCAN: mutual-reachability MST, condensed tree, excess-of-mass cluster
// selection.  min_samples defaults to min_cluster_size, counting the point
// itself among its neighbours.
inline ClusterLabeling density_cluster(const Matrix& X, int min_cluster_size, int min_samples = 0) {
  const int n = static_cast<int>(X.rows());
  if (min_cluster_size < 1) throw ConfigError("min_cluster_size must be positive");
  if (n < min_cluster_size)
    throw InsufficientData(std::to_string(n) + " points for min_cluster_size " + std::to_string(min_cluster_size));
  if (min_samples <= 0) min_samples = min_cluster_size;
  min_samples = std::min(min_samples, n);

  ClusterLabeling out;
  out.labels.assign(n, -1);
  if (n == 1) {
    out.labels[0] = 0;
    out.k = 1;
    return out;
  }

  auto dist = [&](int i, int j) { return (X.row(i) - X.row(j)).norm(); };

  std::vector<double> core(n);
  {
    std::vector<double> row(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) row[j] = i == j ? 0.0 : dist(i, j);
      std::nth_element(row.begin(), row.begin() + (min_samples - 1), row.end());
      core[i] = row[min_samples - 1];
    }
  }

  // Prim over the dense mutual-reachability graph.
  struct Edge {
    int a, b;
    double w;
  };
  std::vector<Edge> mst;
  mst.reserve(n - 1);
  {
    std::vector<char> in_tree(n, 0);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<int> from(n, -1);
    int current = 0;
    in_tree[0] = 1;
    for (int step = 1; step < n; ++step) {
      for (int j = 0; j < n; ++j) {
        if (in_tree[j]) continue;
        double w = std::max({dist(current, j), core[current], core[j]});
        if (w < best[j]) best[j] = w, from[j] = current;
      }
      int next = -1;
      for (int j = 0; j < n; ++j)
        if (!in_tree[j] && (next < 0 || best[j] < best[next])) next = j;
      in_tree[next] = 1;
      mst.push_back({from[next], next, best[next]});
      current = next;
    }
  }
  std::stable_sort(mst.begin(), mst.end(), [](const Edge& x, const Edge& y) { return x.w < y.w; });

  // Single-linkage tree: node ids n .. 2n-2.
  std::vector<int> left(n - 1), right(n - 1), size(2 * n - 1, 1);
  std::vector<double> height(n - 1);
  {
    detail::UnionFind uf(2 * n - 1);
    for (int s = 0; s < n - 1; ++s) {
      int a = uf.find(mst[s].a), b = uf.find(mst[s].b);
      left[s] = a, right[s] = b, height[s] = mst[s].w;
      size[n + s] = size[a] + size[b];
      uf.attach(a, b, n + s);
    }
  }

  // Condensed tree.  Cluster 0 is the root.
  struct Entry {
    int parent;
    int child;  // point index, or n + cluster id
    double lambda;
    int child_size;
  };
  std::vector<Entry> condensed;
  std::vector<int> cluster_parent{-1};
  auto lambda_of = [](double d) { return 1.0 / std::max(d, 1e-12); };

  auto leaves_of = [&](int node, std::vector<int>& acc) {
    std::vector<int> stack{node};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (v < n)
        acc.push_back(v);
      else
        stack.push_back(right[v - n]), stack.push_back(left[v - n]);
    }
  };

  {
    std::vector<std::pair<int, int>> work{{2 * n - 2, 0}};  // (tree node, cluster id)
    while (!work.empty()) {
      auto [node, cid] = work.back();
      work.pop_back();
      if (node < n) {
        continue;
      }
      const double lam = lambda_of(height[node - n]);
      const int l = left[node - n], r = right[node - n];
      const bool lbig = size[l] >= min_cluster_size, rbig = size[r] >= min_cluster_size;
      auto fall_out = [&](int sub) {
        std::vector<int> pts;
        leaves_of(sub, pts);
        for (int p : pts) condensed.push_back({cid, p, lam, 1});
      };
      if (lbig && rbig) {
        for (int sub : {l, r}) {
          int child = static_cast<int>(cluster_parent.size());
          cluster_parent.push_back(cid);
          condensed.push_back({cid, n + child, lam, size[sub]});
          work.push_back({sub, child});
        }
      } else if (lbig) {
        fall_out(r);
        work.push_back({l, cid});
      } else if (rbig) {
        fall_out(l);
        work.push_back({r, cid});
      } else {
        fall_out(l);
        fall_out(r);
      }
    }
  }

  const int n_clusters = static_cast<int>(cluster_parent.size());
  std::vector<double> birth(n_clusters, 0.0), stability(n_clusters, 0.0);
  std::vector<std::vector<int>> children(n_clusters);
  for (const auto& e : condensed)
    if (e.child >= n) birth[e.child - n] = e.lambda, children[e.parent].push_back(e.child - n);
  for (const auto& e : condensed) stability[e.parent] += (e.lambda - birth[e.parent]) * e.child_size;

  std::vector<char> selected(n_clusters, 0);
  if (n_clusters == 1) {
    selected[0] = 1;
  } else {
    // Children always carry larger ids than their parent.
    std::vector<double> subtree(stability);
    for (int c = n_clusters - 1; c >= 1; --c) {
      double child_sum = 0.0;
      for (int ch : children[c]) child_sum += subtree[ch];
      if (children[c].empty() || stability[c] >= child_sum) {
        selected[c] = 1;
        subtree[c] = stability[c];
      } else {
        subtree[c] = child_sum;
      }
    }
    // Deselect anything below a selected cluster.
    for (int c = 1; c < n_clusters; ++c)
      for (int a = cluster_parent[c]; a > 0; a = cluster_parent[a])
        if (selected[a]) {
          selected[c] = 0;
          break;
        }
  }

  std::vector<int> point_cluster(n, 0);
  for (const auto& e : condensed)
    if (e.child < n) point_cluster[e.child] = e.parent;
  for (int p = 0; p < n; ++p) {
    for (int c = point_cluster[p]; c >= 0; c = cluster_parent[c])
      if (selected[c]) {
        out.labels[p] = c;
        break;
      }
  }
  out.k = detail::canonical_labels(out.labels);
  return out;
}

// ---------------------------------------------------------------------------
// Ward agglomeration on a precomputed dissimilarity matrix.

struct LinkageStep {
  int left;   // cluster ids: 0..k-1 are leaves, k+s is the cluster made at step s
  int right;
  double distance;
  int size;
};

using Linkage = std::vector<LinkageStep>;

inline void validate_distance_matrix(const Matrix& D, double tol = 1e-9) {
  if (D.rows() != D.cols()) throw InvalidMatrix("not square");
  if (D.rows() == 0) throw InvalidMatrix("empty");
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    if (!std::isfinite(D(i, i)) || std::abs(D(i, i)) > tol) throw InvalidMatrix("non-zero diagonal");
    for (Eigen::Index j = i + 1; j < D.cols(); ++j) {
      if (!std::isfinite(D(i, j)) || !std::isfinite(D(j, i))) throw InvalidMatrix("non-finite entry");
      if (std::abs(D(i, j) - D(j, i)) > tol * std::max(1.0, std::abs(D(i, j)))) throw InvalidMatrix("asymmetric");
    }
  }
}

// Lance-Williams Ward update in the unsquared form:
//   d(k, i+j) = sqrt(((ni+nk) d_ki^2 + (nj+nk) d_kj^2 - nk d_ij^2) / (ni+nj+nk)).
// Ties go to the lexicographically smallest cluster-id pair.
inline Linkage ward_linkage(const Matrix& D) {
  validate_distance_matrix(D);
  const int k = static_cast<int>(D.rows());
  std::vector<std::vector<double>> d(2 * k - 1, std::vector<double>(2 * k - 1, 0.0));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) d[i][j] = 0.5 * (D(i, j) + D(j, i));
  std::vector<int> active(k), size(2 * k - 1, 1);
  std::iota(active.begin(), active.end(), 0);

  Linkage out;
  for (int step = 0; step < k - 1; ++step) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < active.size(); ++x)
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        int i = active[x], j = active[y];
        if (d[i][j] < best) best = d[i][j], bi = i, bj = j;
      }
    const int nc = k + step;
    size[nc] = size[bi] + size[bj];
    for (int m : active) {
      if (m == bi || m == bj) continue;
      const double ni = size[bi], nj = size[bj], nm = size[m];
      double v = ((ni + nm) * d[m][bi] * d[m][bi] + (nj + nm) * d[m][bj] * d[m][bj] - nm * best * best) / (ni + nj + nm);
      d[m][nc] = d[nc][m] = std::sqrt(std::max(v, 0.0));
    }
    out.push_back({bi, bj, best, size[nc]});
    active.erase(std::remove_if(active.begin(), active.end(), [&](int c) { return c == bi || c == bj; }), active.end());
    active.push_back(nc);
  }
  return out;
}

// Flat labels after k - n_clusters merges, numbered by smallest member.
inline std::vector<int> cut_linkage(const Linkage& linkage, int k, int n_clusters) {
  if (n_clusters < 1 || n_clusters > k)
    throw ConfigError("n_clusters must be in [1, " + std::to_string(k) + "], got " + std::to_string(n_clusters));
  detail::UnionFind uf(2 * k - 1);
  for (int s = 0; s < k - n_clusters; ++s) uf.attach(linkage[s].left, linkage[s].right, k + s);
  std::vector<int> labels(k);
  for (int i = 0; i < k; ++i) labels[i] = uf.find(i);
  detail::canonical_labels(labels);
  return labels;
}

inline std::vector<int> ward_cluster(const Matrix& D, int n_clusters) {
  if (n_clusters < 1 || n_clusters > D.rows())
    throw ConfigError("n_clusters must be in [1, " + std::to_string(D.rows()) + "], got " + std::to_string(n_clusters));
  return cut_linkage(ward_linkage(D), static_cast<int>(D.rows()), n_clusters);
}

// ---------------------------------------------------------------------------

// Maximal marginal relevance over cosine similarity.  The first pick is the
// candidate closest to the centroid; later picks maximize
// lambda * sim(c, centroid) - (1 - lambda) * max_s sim(c, s).
inline std::vector<int> mmr_select(const Matrix& candidates, const Vector& centroid, double lambda, int k) {
  const int m = static_cast<int>(candidates.rows());
  if (m < 1) throw DataError("mmr_select needs at least one candidate");
  if (k < 1 || k > m) throw ConfigError("mmr_select: k must be in [1, m]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("mmr_select: lambda must be in [0, 1]");

  std::vector<double> relevance(m);
  for (int i = 0; i < m; ++i) relevance[i] = cosine_similarity(candidates.row(i).transpose(), centroid);

  std::vector<int> picked;
  std::vector<char> used(m, 0);
  std::vector<double> redundancy(m, -std::numeric_limits<double>::infinity());
  int first = 0;
  for (int i = 1; i < m; ++i)
    if (relevance[i] > relevance[first]) first = i;
  picked.push_back(first);
  used[first] = 1;
  while (static_cast<int>(picked.size()) < k) {
    const int last = picked.back();
    for (int i = 0; i < m; ++i)
      if (!used[i])
        redundancy[i] = std::max(redundancy[i], cosine_similarity(candidates.row(i).transpose(), candidates.row(last).transpose()));
    int best = -1;
    double best_score = 0.0;
    for (int i = 0; i < m; ++i) {
      if (used[i]) continue;
      double score = lambda * relevance[i] - (1.0 - lambda) * redundancy[i];
      if (best < 0 || score > best_score) best = i, best_score = score;
    }
    picked.push_back(best);
    used[best] = 1;
  }
  return picked;
}

// ---------------------------------------------------------------------------

inline void save_labeling(const std::filesystem::path& path, const std::vector<std::string>& ids, const std::vector<int>& labels) {
  if (ids.size() != labels.size()) throw DataError("ids and labels differ in length");
  std::string out = "id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out += csv::escape(ids[i]) + "," + std::to_string(labels[i]) + "\n";
  write_file_atomic(path, out);
}

inline std::pair<std::vector<std::string>, std::vector<int>> load_labeling(const std::filesystem::path& path) {
  auto rows = csv::parse(read_file(path));
  if (rows.empty() || rows[0].second != std::vector<std::string>{"id", "label"}) throw ParseError("expected header id,label", 1);
  std::pair<std::vector<std::string>, std::vector<int>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, fields] = rows[r];
    if (fields.size() != 2) throw ParseError("expected 2 fields", line);
    int label = detail::parse_int(fields[1], "label", line);
    if (label < -1) throw ParseError("label below -1", line);
    out.first.push_back(fields[0]);
    out.second.push_back(label);
  }
  return out;
}

}  // namespace topicflow
