#pragma once

// Exact K x K linear assignment.
//
// solve_min_assignment runs the shortest-augmenting-path Hungarian method to
// obtain an optimal matching together with optimal dual potentials. Every
// optimal assignment uses only edges with zero reduced cost, so the
// lexicographically smallest optimum is the lexicographically smallest
// perfect matching of that tight subgraph, found greedily row by row with
// alternating-path repairs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "lsw/core.hpp"

namespace lsw {

struct AssignmentResult {
  Permutation perm;   // perm[k] = column assigned to row k
  double objective;   // sum_k cost(k, perm[k]), accumulated in row order
};

enum class Sense { Minimize, Maximize };

namespace detail {

inline void check_square_finite(const Matrix& cost, const char* who) {
  if (cost.rows() == 0 || cost.rows() != cost.cols())
    throw DataError(std::string(who) + ": cost matrix must be square and non-empty");
  for (std::size_t i = 0; i < cost.size(); ++i)
    if (!std::isfinite(cost.values()[i]))
      throw DataError(std::string(who) + ": non-finite entry at (" +
                      std::to_string(i / cost.cols()) + ", " +
                      std::to_string(i % cost.cols()) + ")");
}

inline double assignment_sum(const Matrix& cost, const Permutation& perm) {
  double s = 0.0;
  for (std::size_t k = 0; k < perm.size(); ++k)
    s += cost(k, static_cast<std::size_t>(perm[k]));
  return s;
}

// Shortest augmenting path Hungarian. Returns row -> column and fills the
// row/column potentials so that cost(i, j) - u[i] - v[j] >= 0 with equality
// on the matching.
inline std::vector<int> hungarian(const Matrix& cost, std::vector<double>& u,
                                  std::vector<double>& v) {
  const std::size_t n = cost.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based internally; index 0 is the virtual root column.
  std::vector<double> uu(n + 1, 0.0), vv(n + 1, 0.0);
  std::vector<std::size_t> col_owner(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    col_owner[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = col_owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - uu[i0] - vv[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          uu[col_owner[j]] += delta;
          vv[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (col_owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      col_owner[j0] = col_owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    row_to_col[col_owner[j] - 1] = static_cast<int>(j - 1);
  u.assign(uu.begin() + 1, uu.end());
  v.assign(vv.begin() + 1, vv.end());
  return row_to_col;
}

// Depth-first search for an alternating path from `row` to `target` column
// inside the tight graph, avoiding columns marked in `blocked`.
inline bool reroute(std::size_t row, std::size_t target,
                    const std::vector<std::vector<char>>& tight,
                    std::vector<int>& row_to_col, std::vector<int>& col_to_row,
                    std::vector<char>& blocked) {
  const std::size_t n = row_to_col.size();
  for (std::size_t c = 0; c < n; ++c) {
    if (!tight[row][c] || blocked[c]) continue;
    blocked[c] = 1;
    if (c == target) {
      row_to_col[row] = static_cast<int>(c);
      col_to_row[c] = static_cast<int>(row);
      return true;
    }
    const auto next = static_cast<std::size_t>(col_to_row[c]);
    if (reroute(next, target, tight, row_to_col, col_to_row, blocked)) {
      row_to_col[row] = static_cast<int>(c);
      col_to_row[c] = static_cast<int>(row);
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Minimizes sum_k cost(k, perm[k]); ties resolve to the lexicographically
/// smallest optimal permutation.
inline AssignmentResult solve_min_assignment(const Matrix& cost) {
  detail::check_square_finite(cost, "solve_min_assignment");
  const std::size_t n = cost.rows();
  std::vector<double> u, v;
  std::vector<int> row_to_col = detail::hungarian(cost, u, v);

  double scale = 1.0;
  for (double c : cost.values()) scale = std::max(scale, std::abs(c));
  const double eps =
      64.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;

  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      tight[i][j] = (cost(i, j) - u[i] - v[j]) <= eps;
  for (std::size_t i = 0; i < n; ++i)
    tight[i][static_cast<std::size_t>(row_to_col[i])] = 1;

  std::vector<int> col_to_row(n);
  for (std::size_t i = 0; i < n; ++i)
    col_to_row[static_cast<std::size_t>(row_to_col[i])] = static_cast<int>(i);

  // Columns owned by already-fixed rows are never touched again.
  std::vector<char> fixed_col(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (!tight[r][c] || fixed_col[c]) continue;
      const auto current = static_cast<std::size_t>(row_to_col[r]);
      if (c == current) break;
      // Give c to r; its previous owner must reach r's old column.
      const auto displaced = static_cast<std::size_t>(col_to_row[c]);
      std::vector<char> blocked = fixed_col;
      blocked[c] = 1;
      std::vector<int> trial_rc = row_to_col, trial_cr = col_to_row;
      trial_rc[r] = static_cast<int>(c);
      trial_cr[c] = static_cast<int>(r);
      if (detail::reroute(displaced, current, tight, trial_rc, trial_cr, blocked)) {
        row_to_col = std::move(trial_rc);
        col_to_row = std::move(trial_cr);
        break;
      }
    }
    fixed_col[static_cast<std::size_t>(row_to_col[r])] = 1;
  }

  Permutation perm(std::move(row_to_col));
  const double objective = detail::assignment_sum(cost, perm);
  return {std::move(perm), objective};
}

/// Maximizes sum_k score(k, perm[k]) by minimizing the negated scores.
inline AssignmentResult solve_max_assignment(const Matrix& score) {
  detail::check_square_finite(score, "solve_max_assignment");
  Matrix negated(score.rows(), score.cols());
  for (std::size_t i = 0; i < score.size(); ++i)
    negated.values()[i] = -score.values()[i];
  AssignmentResult r = solve_min_assignment(negated);
  r.objective = detail::assignment_sum(score, r.perm);
  return r;
}

inline constexpr std::size_t brute_force_max_K = 8;

/// Exhaustive search over all K! permutations in lexicographic order; the
/// first strict improvement wins, so ties resolve lexicographically.
inline AssignmentResult brute_force_assignment(const Matrix& cost, Sense sense) {
  detail::check_square_finite(cost, "brute_force_assignment");
  const std::size_t n = cost.rows();
  if (n > brute_force_max_K)
    throw UsageError("brute_force_assignment: K = " + std::to_string(n) +
                     " exceeds limit of " + std::to_string(brute_force_max_K));
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<int> best = p;
  double best_value = 0.0;
  bool first = true;
  do {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += cost(k, static_cast<std::size_t>(p[k]));
    const bool better = sense == Sense::Minimize ? s < best_value : s > best_value;
    if (first || better) {
      best = p;
      best_value = s;
      first = false;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return {Permutation(std::move(best)), best_value};
}

}  // namespace lsw
