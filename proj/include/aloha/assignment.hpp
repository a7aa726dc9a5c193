#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "aloha/error.hpp"
#include "aloha/model.hpp"

namespace aloha {

namespace detail {

// Shortest-augmenting-path solver for the square min-cost assignment problem
// (Jonker-Volgenant style, O(n^3)). Returns col -> row in `col_owner` and the
// dual potentials, which identify the tight edges used for tie resolution.
struct SquareAssignmentResult {
  std::vector<int> col_owner;   // column j is assigned to row col_owner[j]
  std::vector<double> row_potential;
  std::vector<double> col_potential;
};

inline SquareAssignmentResult solve_square_min_cost(
    const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-indexed internals; index 0 is the virtual start column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  SquareAssignmentResult r;
  r.col_owner.assign(n, -1);
  r.row_potential.assign(n, 0.0);
  r.col_potential.assign(n, 0.0);
  for (int j = 1; j <= n; ++j) r.col_owner[j - 1] = p[j] - 1;
  for (int i = 1; i <= n; ++i) r.row_potential[i - 1] = u[i];
  for (int j = 1; j <= n; ++j) r.col_potential[j - 1] = v[j];
  return r;
}

// Rewrites the optimal matching into the lexicographically smallest one among
// all optima, walking rows in order and preferring the smallest column whose
// choice keeps a perfect matching on the tight-edge graph.
class TieCanonicalizer {
 public:
  TieCanonicalizer(const std::vector<std::vector<double>>& cost,
                   const SquareAssignmentResult& solved, double tol)
      : n_(static_cast<int>(cost.size())), row_to_col_(n_, -1),
        col_to_row_(n_, -1), locked_col_(n_, 0), tight_(n_) {
    for (int j = 0; j < n_; ++j) {
      col_to_row_[j] = solved.col_owner[j];
      if (solved.col_owner[j] >= 0) row_to_col_[solved.col_owner[j]] = j;
    }
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        const double rc =
            cost[i][j] - solved.row_potential[i] - solved.col_potential[j];
        if (rc <= tol) tight_[i].push_back(j);
      }
    }
  }

  std::vector<int> run() {
    for (int r = 0; r < n_; ++r) {
      const int cur = row_to_col_[r];
      for (int c : tight_[r]) {
        if (c >= cur) break;  // tight_ columns are ascending
        if (locked_col_[c]) continue;
        if (try_switch(r, c)) break;
      }
      locked_col_[row_to_col_[r]] = 1;
    }
    return row_to_col_;
  }

 private:
  // Move row r onto column c, rerouting the displaced row through tight
  // edges. Rolls back if no rerouting exists.
  bool try_switch(int r, int c) {
    const int cur = row_to_col_[r];
    const int displaced = col_to_row_[c];
    auto saved_row_to_col = row_to_col_;
    auto saved_col_to_row = col_to_row_;
    row_to_col_[r] = c;
    col_to_row_[c] = r;
    col_to_row_[cur] = -1;
    visited_.assign(n_, 0);
    visited_[static_cast<std::size_t>(c)] = 1;
    if (displaced < 0 || augment(displaced, r)) return true;
    row_to_col_ = std::move(saved_row_to_col);
    col_to_row_ = std::move(saved_col_to_row);
    return false;
  }

  bool augment(int row, int fixed_row) {
    for (int c : tight_[row]) {
      if (locked_col_[c] || visited_[static_cast<std::size_t>(c)]) continue;
      visited_[static_cast<std::size_t>(c)] = 1;
      const int owner = col_to_row_[c];
      if (owner < 0 || (owner != fixed_row && augment(owner, fixed_row))) {
        row_to_col_[row] = c;
        col_to_row_[c] = row;
        return true;
      }
    }
    return false;
  }

  int n_;
  std::vector<int> row_to_col_;
  std::vector<int> col_to_row_;
  std::vector<char> locked_col_;
  std::vector<std::vector<int>> tight_;
  std::vector<char> visited_;
};

}  // namespace detail

/// Maximum-total-weight injective assignment of matrix rows to columns.
/// Rectangular inputs are padded to a square with zero-weight dummies; rows
/// landing on a dummy column are reported as unmatched. Ties between equal-
/// weight optima resolve to the lexicographically smallest (row, column)
/// pairing. Weights must be finite.
inline Assignment hungarian_max(const SimilarityMatrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  Assignment out;
  if (rows == 0) return out;
  if (cols == 0) {
    for (std::size_t r = 0; r < rows; ++r) out.unmatched_rows.push_back(r);
    return out;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!std::isfinite(m.weights[r][c]))
        throw Error("hungarian_max: non-finite weight");
    }
  }

  const std::size_t n = std::max(rows, cols);
  // cost = 1 - weight keeps the minimization numerically inside [0,1];
  // dummy cells carry weight 0, i.e. cost 1.
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 1.0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) cost[r][c] = 1.0 - m.weights[r][c];

  auto solved = detail::solve_square_min_cost(cost);
  auto row_to_col = detail::TieCanonicalizer(cost, solved, 1e-12).run();

  for (std::size_t r = 0; r < rows; ++r) {
    const auto c = static_cast<std::size_t>(row_to_col[r]);
    if (c < cols)
      out.pairs.push_back({r, c, m.weights[r][c]});
    else
      out.unmatched_rows.push_back(r);
  }
  return out;
}

}  // namespace aloha
