#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>
#include <utility>
#include <vector>

#include "catalog/error.hpp"

namespace catalog {

template <typename Scalar>
struct Assignment {
  // (row, column) pairs sorted by row.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  // Sum of the assigned entries, accumulated in row order.
  Scalar total = Scalar(0);
};

namespace detail {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct HungarianSolution {
  std::vector<Eigen::Index> row_to_col;
  std::vector<Scalar> row_potential;
  std::vector<Scalar> col_potential;
};

// Shortest augmenting path Hungarian method with potentials on a square
// matrix, O(k^3). Potentials satisfy u_i + v_j <= c_ij with equality on the
// returned assignment.
template <typename Scalar>
HungarianSolution<Scalar> hungarian_square(const DenseMatrix<Scalar>& c) {
  const Eigen::Index k = c.rows();
  const Scalar inf = std::numeric_limits<Scalar>::has_infinity ? std::numeric_limits<Scalar>::infinity()
                                                                : std::numeric_limits<Scalar>::max();
  std::vector<Scalar> u(k + 1, Scalar(0)), v(k + 1, Scalar(0));
  std::vector<Eigen::Index> match(k + 1, 0), way(k + 1, 0);

  for (Eigen::Index row = 1; row <= k; ++row) {
    match[0] = row;
    Eigen::Index j0 = 0;
    std::vector<Scalar> minv(k + 1, inf);
    std::vector<char> used(k + 1, 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = match[j0];
      Scalar delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const Scalar reduced = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < minv[j]) {
          minv[j] = reduced;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= k; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  HungarianSolution<Scalar> out;
  out.row_to_col.assign(std::size_t(k), -1);
  for (Eigen::Index j = 1; j <= k; ++j) out.row_to_col[std::size_t(match[j] - 1)] = j - 1;
  out.row_potential.assign(u.begin() + 1, u.end());
  out.col_potential.assign(v.begin() + 1, v.end());
  return out;
}

// Optimum over the given rows/columns of `cost`, padded to square with zero
// dummies. Returns the real (row, col) pairs and their row-order sum.
template <typename Scalar>
Assignment<Scalar> solve_subproblem(const DenseMatrix<Scalar>& cost, const std::vector<Eigen::Index>& rows,
                                    const std::vector<Eigen::Index>& cols, HungarianSolution<Scalar>* duals = nullptr) {
  Assignment<Scalar> out;
  const Eigen::Index n = Eigen::Index(rows.size());
  const Eigen::Index m = Eigen::Index(cols.size());
  if (n == 0 || m == 0) return out;
  const Eigen::Index k = std::max(n, m);
  DenseMatrix<Scalar> padded = DenseMatrix<Scalar>::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) padded(i, j) = cost(rows[std::size_t(i)], cols[std::size_t(j)]);

  auto solution = hungarian_square<Scalar>(padded);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = solution.row_to_col[std::size_t(i)];
    if (j < m) {
      out.pairs.emplace_back(rows[std::size_t(i)], cols[std::size_t(j)]);
      out.total += cost(rows[std::size_t(i)], cols[std::size_t(j)]);
    }
  }
  if (duals) *duals = std::move(solution);
  return out;
}

template <typename Scalar>
bool nearly_equal(Scalar a, Scalar b, Scalar scale) {
  if constexpr (std::is_integral_v<Scalar>) {
    (void)scale;
    return a == b;
  } else {
    return std::abs(a - b) <= Scalar(1e-9) * scale;
  }
}

}  // namespace detail

// Minimum-weight injective pairing of size min(n, m) over a non-negative
// n x m cost matrix. A rectangular matrix is padded to square with zero-cost
// dummies. Among optimal pairings the one whose row-sorted pair list is
// lexicographically smallest is returned.
template <typename Derived>
Assignment<typename Derived::Scalar> solve_assignment(const Eigen::MatrixBase<Derived>& cost_in) {
  using Scalar = typename Derived::Scalar;
  using Index = Eigen::Index;
  static_assert(std::is_arithmetic_v<Scalar>, "cost matrix must hold arithmetic values");

  const detail::DenseMatrix<Scalar> cost = cost_in;
  const Index n = cost.rows();
  const Index m = cost.cols();
  if (n == 0 || m == 0) return {};

  Scalar scale(1);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const Scalar x = cost(i, j);
      if constexpr (std::is_floating_point_v<Scalar>) {
        if (!std::isfinite(x)) throw ValidationError("cost matrix entries must be finite");
      }
      if (x < Scalar(0)) throw ValidationError("cost matrix entries must be non-negative");
      scale = std::max(scale, x);
    }
  }
  scale *= Scalar(std::max(n, m));

  std::vector<Index> rows(static_cast<std::size_t>(n)), cols(static_cast<std::size_t>(m));
  for (Index i = 0; i < n; ++i) rows[std::size_t(i)] = i;
  for (Index j = 0; j < m; ++j) cols[std::size_t(j)] = j;

  detail::HungarianSolution<Scalar> duals;
  const Assignment<Scalar> best = detail::solve_subproblem<Scalar>(cost, rows, cols, &duals);
  const Scalar optimum = best.total;

  // current[r]: column of row r in an optimal pairing consistent with the
  // choices made so far, or -1 when the row is left unassigned.
  std::vector<Index> current(std::size_t(n), -1);
  for (const auto& [r, c] : best.pairs) current[std::size_t(r)] = c;

  // Every optimal pairing uses only edges that are tight under the optimal
  // duals, so only those are worth probing.
  auto tight = [&](Index r, Index c) {
    const Scalar reduced = cost(r, c) - duals.row_potential[std::size_t(r)] - duals.col_potential[std::size_t(c)];
    return detail::nearly_equal<Scalar>(reduced, Scalar(0), scale);
  };

  Assignment<Scalar> out;
  Scalar committed(0);
  std::vector<Index> free_rows = rows;
  std::vector<Index> free_cols = cols;

  for (Index r = 0; r < n; ++r) {
    free_rows.erase(std::find(free_rows.begin(), free_rows.end(), r));
    Index chosen = -1;
    for (const Index c : free_cols) {
      if (current[std::size_t(r)] == c) {
        chosen = c;
        break;
      }
      if (!tight(r, c)) continue;
      std::vector<Index> rest_cols;
      for (const Index cc : free_cols)
        if (cc != c) rest_cols.push_back(cc);
      const auto rest = detail::solve_subproblem<Scalar>(cost, free_rows, rest_cols);
      if (detail::nearly_equal<Scalar>(committed + cost(r, c) + rest.total, optimum, scale)) {
        chosen = c;
        for (const Index fr : free_rows) current[std::size_t(fr)] = -1;
        for (const auto& [rr, cc] : rest.pairs) current[std::size_t(rr)] = cc;
        current[std::size_t(r)] = c;
        break;
      }
    }
    if (chosen < 0) continue;  // row stays unassigned (only possible when n > m)
    out.pairs.emplace_back(r, chosen);
    out.total += cost(r, chosen);
    committed += cost(r, chosen);
    free_cols.erase(std::find(free_cols.begin(), free_cols.end(), chosen));
  }
  return out;
}

}  // namespace catalog
