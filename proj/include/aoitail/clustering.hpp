#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoitail/mobility.hpp"
#include "aoitail/rng.hpp"

namespace aoitail {

// Minimal dense row-major matrix; all clustering sizes are tiny.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

// Gaussian similarity of pair midpoints with a hard cutoff: zero beyond the
// cutoff distance, exp(-dist^2 / scale^2) inside it, ones on the diagonal.
inline Matrix similarity_matrix(std::span<const Vec2> points, double scale_m, double cutoff_m) {
  const int k = static_cast<int>(points.size());
  Matrix s(k, k);
  for (int i = 0; i < k; ++i) {
    s.at(i, i) = 1.0;
    for (int j = i + 1; j < k; ++j) {
      const double dist = norm_l2(points[i] - points[j]);
      const double v = dist > cutoff_m ? 0.0 : std::exp(-dist * dist / (scale_m * scale_m));
      s.at(i, j) = v;
      s.at(j, i) = v;
    }
  }
  return s;
}

struct EigenSystem {
  std::vector<double> values;  // ascending
  Matrix vectors;              // columns aligned with values
};

// Cyclic Jacobi sweeps for a symmetric matrix. Fine for the sizes here (a few
// hundred at most); convergence is checked against the off-diagonal Frobenius
// mass relative to the whole matrix.
inline EigenSystem jacobi_eigensystem(Matrix m, int max_sweeps = 100) {
  if (m.rows != m.cols) throw std::invalid_argument("jacobi: matrix not square");
  const int n = m.rows;
  Matrix v(n, n);
  for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

  double total = 0;
  for (double x : m.a) total += x * x;
  const double target = 1e-12 * std::sqrt(total);

  bool converged = false;
  int sweep = 0;
  double off = 0;
  for (; sweep < max_sweeps; ++sweep) {
    off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += 2.0 * m.at(p, q) * m.at(p, q);
    off = std::sqrt(off);
    if (off <= target || n == 1) {
      converged = true;
      break;
    }
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (apq == 0) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double mip = m.at(i, p);
          const double miq = m.at(i, q);
          m.at(i, p) = c * mip - s * miq;
          m.at(i, q) = s * mip + c * miq;
        }
        for (int i = 0; i < n; ++i) {
          const double mpi = m.at(p, i);
          const double mqi = m.at(q, i);
          m.at(p, i) = c * mpi - s * mqi;
          m.at(q, i) = s * mpi + c * mqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v.at(i, p);
          const double viq = v.at(i, q);
          v.at(i, p) = c * vip - s * viq;
          v.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  if (!converged)
    throw std::runtime_error("jacobi: no convergence after " + std::to_string(sweep) +
                             " sweeps, off-diagonal residual " + std::to_string(off));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return m.at(i, i) < m.at(j, j); });
  EigenSystem sys;
  sys.values.resize(n);
  sys.vectors = Matrix(n, n);
  for (int c = 0; c < n; ++c) {
    sys.values[c] = m.at(order[c], order[c]);
    for (int r = 0; r < n; ++r) sys.vectors.at(r, c) = v.at(r, order[c]);
  }
  return sys;
}

// Rows of the spectral embedding: eigenvectors of the normalized Laplacian
// I - D^{-1/2} S D^{-1/2} for the smallest `groups` eigenvalues, rows scaled
// to unit length. Degrees are at least 1 because of the unit diagonal.
inline Matrix spectral_embedding(const Matrix& similarity, int groups) {
  const int k = similarity.rows;
  if (groups < 1 || groups > k)
    throw std::invalid_argument("spectral embedding: group count out of range");
  std::vector<double> inv_sqrt_deg(k);
  for (int i = 0; i < k; ++i) {
    double d = 0;
    for (int j = 0; j < k; ++j) d += similarity.at(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  Matrix lap(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      lap.at(i, j) = (i == j ? 1.0 : 0.0) -
                     similarity.at(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
  const EigenSystem sys = jacobi_eigensystem(std::move(lap));
  Matrix rows(k, groups);
  for (int r = 0; r < k; ++r) {
    double norm = 0;
    for (int c = 0; c < groups; ++c) norm += sys.vectors.at(r, c) * sys.vectors.at(r, c);
    norm = std::sqrt(norm);
    if (norm > 1e-300)
      for (int c = 0; c < groups; ++c) rows.at(r, c) = sys.vectors.at(r, c) / norm;
  }
  return rows;
}

struct GroupAssignment {
  std::vector<int> group;  // per pair
  int groups = 0;

  std::vector<std::vector<int>> members() const {
    std::vector<std::vector<int>> m(groups);
    for (int k = 0; k < static_cast<int>(group.size()); ++k) m[group[k]].push_back(k);
    return m;
  }
};

// Lloyd iterations with k-means++ seeding, several restarts, best inertia
// kept. An emptied cluster is re-seeded at the point farthest from its
// current centroid. All randomness comes from the caller's stream.
inline GroupAssignment kmeans_rows(const Matrix& rows, int groups, Rng& rng,
                                   int restarts = 20, int max_iter = 100) {
  const int k = rows.rows;
  const int dim = rows.cols;
  if (groups < 1 || groups > k) throw std::invalid_argument("kmeans: group count out of range");

  auto dist2 = [&](int r, const std::vector<double>& center) {
    double d = 0;
    for (int c = 0; c < dim; ++c) {
      const double diff = rows.at(r, c) - center[static_cast<std::size_t>(c)];
      d += diff * diff;
    }
    return d;
  };

  std::vector<int> best_assign(k, 0);
  double best_inertia = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < restarts; ++restart) {
    // k-means++ seeding.
    std::vector<std::vector<double>> centers;
    centers.reserve(groups);
    {
      const int first = static_cast<int>(rng.index(k));
      centers.push_back(std::vector<double>(dim));
      for (int c = 0; c < dim; ++c) centers[0][c] = rows.at(first, c);
    }
    std::vector<double> d2(k);
    while (static_cast<int>(centers.size()) < groups) {
      double sum = 0;
      for (int r = 0; r < k; ++r) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) m = std::min(m, dist2(r, c));
        d2[r] = m;
        sum += m;
      }
      int pick;
      if (sum > 0) {
        double u = rng.uniform() * sum;
        pick = k - 1;
        for (int r = 0; r < k; ++r) {
          u -= d2[r];
          if (u <= 0) {
            pick = r;
            break;
          }
        }
      } else {
        pick = static_cast<int>(rng.index(k));  // all points coincide
      }
      centers.push_back(std::vector<double>(dim));
      for (int c = 0; c < dim; ++c) centers.back()[c] = rows.at(pick, c);
    }

    std::vector<int> assign(k, 0);
    std::vector<int> count(groups, 0);
    for (int it = 0; it < max_iter; ++it) {
      bool changed = false;
      for (int r = 0; r < k; ++r) {
        int arg = 0;
        double best = dist2(r, centers[0]);
        for (int g = 1; g < groups; ++g) {
          const double d = dist2(r, centers[g]);
          if (d < best) {
            best = d;
            arg = g;
          }
        }
        if (assign[r] != arg) {
          assign[r] = arg;
          changed = true;
        }
      }
      if (!changed && it > 0) break;

      std::fill(count.begin(), count.end(), 0);
      for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
      for (int r = 0; r < k; ++r) {
        ++count[assign[r]];
        for (int c = 0; c < dim; ++c) centers[assign[r]][c] += rows.at(r, c);
      }
      for (int g = 0; g < groups; ++g) {
        if (count[g] == 0) continue;
        for (int c = 0; c < dim; ++c) centers[g][c] /= count[g];
      }
      // Re-seed any emptied cluster at the point farthest from its centroid.
      for (int g = 0; g < groups; ++g) {
        if (count[g] > 0) continue;
        int far = 0;
        double far_d = -1;
        for (int r = 0; r < k; ++r) {
          const double d = dist2(r, centers[assign[r]]);
          if (d > far_d) {
            far_d = d;
            far = r;
          }
        }
        for (int c = 0; c < dim; ++c) centers[g][c] = rows.at(far, c);
        assign[far] = g;
        count[g] = 1;
      }
    }

    double inertia = 0;
    for (int r = 0; r < k; ++r) inertia += dist2(r, centers[assign[r]]);
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_assign = assign;
    }
  }

  GroupAssignment out;
  out.group = std::move(best_assign);
  out.groups = groups;
  return out;
}

struct RbMap {
  std::vector<std::vector<int>> blocks_of_pair;  // ascending per pair
  bool overfull = false;  // some group had more members than blocks
};

// Round-robin split of all blocks inside each group: block n goes to the
// group's (n mod size)-th member by pair index. Members of the same group
// never share a block; a group larger than the block count leaves its highest
// members empty-handed.
inline RbMap allocate_rbs(const GroupAssignment& assignment, int rb_count) {
  RbMap map;
  map.blocks_of_pair.resize(assignment.group.size());
  for (const auto& members : assignment.members()) {
    if (members.empty()) continue;
    const int m = static_cast<int>(members.size());
    if (m > rb_count) map.overfull = true;
    for (int n = 0; n < rb_count; ++n)
      map.blocks_of_pair[members[n % m]].push_back(n);
  }
  return map;
}

}  // namespace aoitail
