#pragma once

// Dynamic time warping over sequences of Eigen vectors. The accumulated cost
// sums squared element distances along the warping path; the reported
// distance is the square root of the minimal sum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "arcade/error.hpp"

namespace arcade::dtw {

class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), d_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> d_;
};

/// 0-based (i, j) pairs from (0, 0) to (U-1, V-1).
using WarpPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct Result {
  double distance = 0.0;
  WarpPath path;
};

namespace detail {

template <typename Vec>
void check_inputs(std::span<const Vec> x, std::span<const Vec> y) {
  if (x.empty() || y.empty()) throw DimensionError("DTW needs two non-empty sequences");
  const auto dim = x.front().size();
  auto same = [dim](const Vec& v) { return v.size() == dim; };
  if (!std::all_of(x.begin(), x.end(), same) || !std::all_of(y.begin(), y.end(), same)) {
    throw DimensionError("DTW sequence elements must share one dimension");
  }
}

}  // namespace detail

template <typename Vec>
DistanceMatrix distance_matrix(std::span<const Vec> x, std::span<const Vec> y) {
  detail::check_inputs(x, y);
  DistanceMatrix d(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) d(i, j) = (x[i] - y[j]).norm();
  }
  return d;
}

template <typename Vec>
DistanceMatrix distance_matrix(const std::vector<Vec>& x, const std::vector<Vec>& y) {
  return distance_matrix(std::span<const Vec>(x), std::span<const Vec>(y));
}

namespace detail {

// Cumulative squared cost, row-major U x V.
template <typename Vec>
std::vector<double> accumulate(std::span<const Vec> x, std::span<const Vec> y) {
  const std::size_t u = x.size(), v = y.size();
  std::vector<double> acc(u * v);
  for (std::size_t i = 0; i < u; ++i) {
    for (std::size_t j = 0; j < v; ++j) {
      const double c = (x[i] - y[j]).squaredNorm();
      double prev;
      if (i == 0 && j == 0) prev = 0.0;
      else if (i == 0) prev = acc[j - 1];
      else if (j == 0) prev = acc[(i - 1) * v];
      else prev = std::min({acc[(i - 1) * v + j - 1], acc[(i - 1) * v + j], acc[i * v + j - 1]});
      acc[i * v + j] = c + prev;
    }
  }
  return acc;
}

}  // namespace detail

template <typename Vec>
double distance(std::span<const Vec> x, std::span<const Vec> y) {
  detail::check_inputs(x, y);
  // Two rolling rows suffice when the path is not needed.
  const std::size_t v = y.size();
  std::vector<double> prev(v), cur(v);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < v; ++j) {
      const double c = (x[i] - y[j]).squaredNorm();
      double best;
      if (i == 0 && j == 0) best = 0.0;
      else if (i == 0) best = cur[j - 1];
      else if (j == 0) best = prev[0];
      else best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = c + best;
    }
    std::swap(prev, cur);
  }
  return std::sqrt(prev[v - 1]);
}

template <typename Vec>
double distance(const std::vector<Vec>& x, const std::vector<Vec>& y) {
  return distance(std::span<const Vec>(x), std::span<const Vec>(y));
}

/// Distance plus an optimal warping path. Ties prefer the diagonal move.
template <typename Vec>
Result align(std::span<const Vec> x, std::span<const Vec> y) {
  detail::check_inputs(x, y);
  const auto acc = detail::accumulate(x, y);
  const std::size_t v = y.size();
  Result r;
  r.distance = std::sqrt(acc.back());
  std::size_t i = x.size() - 1, j = v - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = acc[(i - 1) * v + j - 1];
      const double up = acc[(i - 1) * v + j];
      const double left = acc[i * v + j - 1];
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

template <typename Vec>
Result align(const std::vector<Vec>& x, const std::vector<Vec>& y) {
  return align(std::span<const Vec>(x), std::span<const Vec>(y));
}

/// sqrt of the summed squared distances along `path`.
template <typename Vec>
double path_cost(std::span<const Vec> x, std::span<const Vec> y, const WarpPath& path) {
  double s = 0.0;
  for (auto [i, j] : path) s += (x[i] - y[j]).squaredNorm();
  return std::sqrt(s);
}

template <typename Vec>
double path_cost(const std::vector<Vec>& x, const std::vector<Vec>& y, const WarpPath& path) {
  return path_cost(std::span<const Vec>(x), std::span<const Vec>(y), path);
}

inline bool is_valid_path(const WarpPath& path, std::size_t u, std::size_t v) {
  if (path.empty() || path.front() != std::pair<std::size_t, std::size_t>{0, 0} ||
      path.back() != std::pair<std::size_t, std::size_t>{u - 1, v - 1}) {
    return false;
  }
  for (std::size_t k = 1; k < path.size(); ++k) {
    const auto di = path[k].first - path[k - 1].first;
    const auto dj = path[k].second - path[k - 1].second;
    if (path[k].first < path[k - 1].first || path[k].second < path[k - 1].second) return false;
    if (di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
  }
  return true;
}

}  // namespace arcade::dtw
