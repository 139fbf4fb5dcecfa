#pragma once

#include "birksync/common.hpp"
#include "birksync/perm.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace birksync {

enum class Sense { minimize, maximize };

template <typename Scalar>
struct CostMatrix {
  Matrix<Scalar> entries;
  Sense sense = Sense::minimize;
};

template <typename Scalar>
struct Assignment {
  Perm perm;
  Scalar objective{};
};

namespace detail {

// Moves row `row` onto column `col` by an alternating cycle through tight
// entries. Rows below `row` are frozen. Returns false if no such cycle exists.
inline bool reroute(int row, int col, std::vector<int>& row_mate, std::vector<int>& col_mate,
                    const std::vector<std::vector<char>>& tight) {
  const int n = static_cast<int>(row_mate.size());
  const int target = row_mate[row];  // column freed by `row`
  const int start = col_mate[col];   // row displaced from `col`
  if (start < row) return false;
  std::vector<int> parent_col(n, -1);  // for each row: column through which it was reached
  std::vector<char> seen_row(n, 0), seen_col(n, 0);
  seen_col[col] = 1;
  seen_row[row] = 1;
  for (int r = 0; r < row; ++r) seen_row[r] = 1;
  std::deque<int> queue{start};
  seen_row[start] = 1;
  std::vector<int> reach_col(n, -1);  // column c -> row that reaches it
  int found = -1;
  while (!queue.empty() && found < 0) {
    const int r = queue.front();
    queue.pop_front();
    for (int c = 0; c < n; ++c) {
      if (!tight[r][c] || seen_col[c]) continue;
      seen_col[c] = 1;
      reach_col[c] = r;
      if (c == target) {
        found = c;
        break;
      }
      const int next = col_mate[c];
      if (seen_row[next]) continue;
      seen_row[next] = 1;
      parent_col[next] = c;
      queue.push_back(next);
    }
  }
  if (found < 0) return false;
  // Flip the path: every row on it takes the column it reached.
  int c = found;
  while (true) {
    const int r = reach_col[c];
    const int prev = parent_col[r];
    row_mate[r] = c;
    col_mate[c] = r;
    if (r == start) break;
    c = prev;
  }
  row_mate[row] = col;
  col_mate[col] = row;
  return true;
}

}  // namespace detail

/// Exact linear assignment by shortest augmenting paths with dual potentials,
/// O(n^3). Among all optimal assignments the lexicographically smallest mapping
/// is returned: it is searched inside the equality subgraph of the optimal
/// duals, which contains exactly the optimal assignments.
template <typename Derived>
Assignment<typename Derived::Scalar> solve_assignment(const Eigen::MatrixBase<Derived>& cost_in,
                                                      Sense sense = Sense::minimize) {
  using Scalar = typename Derived::Scalar;
  check_square(cost_in.rows(), cost_in.cols(), "solve_assignment");
  if (!cost_in.allFinite()) throw DomainError("solve_assignment: non-finite cost entry");

  const int n = static_cast<int>(cost_in.rows());
  Matrix<Scalar> cost = sense == Sense::minimize ? Matrix<Scalar>(cost_in) : Matrix<Scalar>(-cost_in);

  // 1-based potentials / matching, classic formulation.
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      Scalar delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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

  std::vector<int> row_mate(n), col_mate(n);
  for (int j = 1; j <= n; ++j) {
    row_mate[p[j] - 1] = j - 1;
    col_mate[j - 1] = p[j] - 1;
  }

  // Equality subgraph with a tolerance scaled to the cost magnitude.
  const Scalar scale = Scalar(1) + cost.cwiseAbs().maxCoeff();
  const Scalar tol = Scalar(1e-9) * scale;
  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      tight[i][j] = cost(i, j) - u[i + 1] - v[j + 1] <= tol;
    }
    tight[i][row_mate[i]] = 1;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < row_mate[i]; ++j) {
      if (tight[i][j] && detail::reroute(i, j, row_mate, col_mate, tight)) break;
    }
  }

  Assignment<Scalar> out{Perm(row_mate), Scalar(0)};
  for (int i = 0; i < n; ++i) out.objective += cost_in(i, row_mate[i]);
  return out;
}

template <typename Scalar>
Assignment<Scalar> solve_assignment(const CostMatrix<Scalar>& c) {
  return solve_assignment(c.entries, c.sense);
}

}  // namespace birksync
