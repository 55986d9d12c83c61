#pragma once

// Slow, direct reference implementations used to check the library.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "topicflow/clustering.hpp"

namespace oracles {

using topicflow::Linkage;
using topicflow::Matrix;
using topicflow::Vector;

// NPMI of one word pair with probabilities counted over documents.
inline double npmi(const std::vector<std::vector<std::string>>& docs, const std::string& a, const std::string& b) {
  double na = 0, nb = 0, nab = 0;
  for (const auto& d : docs) {
    std::set<std::string> s(d.begin(), d.end());
    bool ha = s.count(a), hb = s.count(b);
    na += ha;
    nb += hb;
    nab += ha && hb;
  }
  const double n = static_cast<double>(docs.size());
  const double pij = nab / n;
  if (pij == 1.0) return 1.0;
  double v = std::log((pij + 1e-12) / ((na / n) * (nb / n))) / -std::log(pij + 1e-12);
  return std::max(-1.0, std::min(1.0, v));
}

// ICC(2,k) from a two-way ANOVA written as explicit loops.
inline double icc_2k(const Eigen::MatrixXd& y) {
  const int n = y.rows(), k = y.cols();
  double grand = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) grand += y(i, j);
  grand /= n * k;
  double ssr = 0, ssc = 0, sst = 0;
  for (int i = 0; i < n; ++i) {
    double m = 0;
    for (int j = 0; j < k; ++j) m += y(i, j) / k;
    ssr += k * (m - grand) * (m - grand);
  }
  for (int j = 0; j < k; ++j) {
    double m = 0;
    for (int i = 0; i < n; ++i) m += y(i, j) / n;
    ssc += n * (m - grand) * (m - grand);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) sst += (y(i, j) - grand) * (y(i, j) - grand);
  double msr = ssr / (n - 1), msc = ssc / (k - 1), mse = (sst - ssr - ssc) / ((n - 1.0) * (k - 1.0));
  return (msr - mse) / (msr + (msc - mse) / n);
}

// Agglomeration with clusters keyed by member sets, the squared-form
// Lance-Williams update and an exhaustive search over all live pairs.
inline Linkage ward(const Matrix& D) {
  const int k = static_cast<int>(D.rows());
  std::map<int, std::vector<int>> live;
  std::map<std::pair<int, int>, double> sq;
  for (int i = 0; i < k; ++i) live[i] = {i};
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) sq[{i, j}] = D(i, j) * D(i, j);
  Linkage out;
  for (int step = 0; step < k - 1; ++step) {
    std::pair<int, int> best{-1, -1};
    double bd = 0;
    for (auto& [a, ma] : live)
      for (auto& [b, mb] : live)
        if (a < b && (best.first < 0 || sq[{a, b}] < bd)) best = {a, b}, bd = sq[{a, b}];
    auto [i, j] = best;
    const int id = k + step;
    const double ni = live[i].size(), nj = live[j].size();
    for (auto& [m, mm] : live) {
      if (m == i || m == j) continue;
      const double nm = mm.size();
      double v = ((ni + nm) * sq[{m, i}] + (nj + nm) * sq[{m, j}] - nm * bd) / (ni + nj + nm);
      sq[{m, id}] = sq[{id, m}] = std::max(v, 0.0);
    }
    std::vector<int> merged = live[i];
    merged.insert(merged.end(), live[j].begin(), live[j].end());
    live.erase(i);
    live.erase(j);
    live[id] = merged;
    out.push_back({i, j, std::sqrt(bd), static_cast<int>(merged.size())});
  }
  return out;
}

inline double cos_sim(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

// Greedy MMR that rescores every remaining candidate from scratch against
// the full selected set at each step.
inline std::vector<int> mmr(const Matrix& C, const Vector& centroid, double lambda, int k) {
  std::vector<int> chosen;
  for (int step = 0; step < k; ++step) {
    int best = -1;
    double bs = 0;
    for (int i = 0; i < C.rows(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double rel = cos_sim(C.row(i), centroid);
      double score;
      if (chosen.empty()) {
        score = rel;
      } else {
        double red = -2;
        for (int s : chosen) red = std::max(red, cos_sim(C.row(i), C.row(s)));
        score = lambda * rel - (1 - lambda) * red;
      }
      if (best < 0 || score > bs) best = i, bs = score;
    }
    chosen.push_back(best);
  }
  return chosen;
}

// Explained-variance ratios from a full eigendecomposition of the covariance.
inline Eigen::VectorXd covariance_spectrum(const Matrix& X) {
  Matrix c = X.rowwise() - X.colwise().mean();
  Matrix cov = c.transpose() * c / static_cast<double>(X.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  Eigen::VectorXd ev = es.eigenvalues().reverse();
  return ev / ev.sum();
}

inline Vector ols(const Matrix& X, const Vector& y) { return (X.transpose() * X).inverse() * X.transpose() * y; }

}  // namespace oracles
