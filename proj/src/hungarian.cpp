#include "detectrack/hungarian.hpp"

#include <limits>
#include <stdexcept>

namespace detectrack {

std::vector<int> hungarian_square(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) {
    throw std::invalid_argument("hungarian_square: matrix must be square");
  }
  if (!cost.allFinite()) {
    throw std::invalid_argument("hungarian_square: costs must be finite");
  }
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual root of each augmenting tree.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int row = 1; row <= n; ++row) {
    match_col[0] = row;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match_col[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < minv[j]) {
          minv[j] = reduced;
          way[j] = j0;
        }
        // Strict comparison: lowest column wins ties.
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const int j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(match_col[j] - 1)] = j - 1;
  return assignment;
}

std::vector<int> hungarian_min_cost(const Eigen::MatrixXd& cost, double pad_cost) {
  const Eigen::Index rows = cost.rows(), cols = cost.cols();
  if (rows == 0 || cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);
  const Eigen::Index n = std::max(rows, cols);
  Eigen::MatrixXd square = Eigen::MatrixXd::Constant(n, n, pad_cost);
  square.topLeftCorner(rows, cols) = cost;
  const std::vector<int> full = hungarian_square(square);
  std::vector<int> out(static_cast<std::size_t>(rows), -1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int c = full[static_cast<std::size_t>(r)];
    if (c < cols) out[static_cast<std::size_t>(r)] = c;
  }
  return out;
}

}  // namespace detectrack
