#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace mmnoma {

// Two-phase dense simplex over the tableau, Bland-style lexicographic
// tie-breaking. Solves maximize c^T x subject to A x <= b, x >= 0.
// Problem sizes here never exceed a few dozen rows, so a dense tableau is
// the right tool.
struct LpResult {
  enum class Status { optimal, infeasible, unbounded };
  Status status = Status::infeasible;
  double value = 0.0;
  std::vector<double> x;
};

class SimplexSolver {
 public:
  SimplexSolver(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                const std::vector<double>& c)
      : m_(static_cast<int>(b.size())),
        n_(static_cast<int>(c.size())),
        nonbasic_(static_cast<std::size_t>(n_) + 1),
        basic_(static_cast<std::size_t>(m_)),
        tab_(static_cast<std::size_t>(m_) + 2,
             std::vector<double>(static_cast<std::size_t>(n_) + 2, 0.0)) {
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < n_; ++j) tab_[i][j] = a[i][j];
    }
    for (int i = 0; i < m_; ++i) {
      basic_[i] = n_ + i;
      tab_[i][n_] = -1.0;
      tab_[i][n_ + 1] = b[i];
    }
    for (int j = 0; j < n_; ++j) {
      nonbasic_[j] = j;
      tab_[m_][j] = -c[j];
    }
    nonbasic_[n_] = -1;
    tab_[m_ + 1][n_] = 1.0;
  }

  LpResult solve() {
    LpResult res;
    int r = 0;
    for (int i = 1; i < m_; ++i) {
      if (tab_[i][n_ + 1] < tab_[r][n_ + 1]) r = i;
    }
    if (m_ > 0 && tab_[r][n_ + 1] < -kEps) {
      pivot(r, n_);
      if (!run_phase(2) || tab_[m_ + 1][n_ + 1] < -kEps) {
        res.status = LpResult::Status::infeasible;
        return res;
      }
      for (int i = 0; i < m_; ++i) {
        if (basic_[i] == -1) {
          int s = 0;
          for (int j = 1; j <= n_; ++j) {
            if (better(i, j, s)) s = j;
          }
          pivot(i, s);
        }
      }
    }
    const bool bounded = run_phase(1);
    res.x.assign(static_cast<std::size_t>(n_), 0.0);
    for (int i = 0; i < m_; ++i) {
      if (basic_[i] < n_) res.x[static_cast<std::size_t>(basic_[i])] = tab_[i][n_ + 1];
    }
    if (!bounded) {
      res.status = LpResult::Status::unbounded;
      res.value = std::numeric_limits<double>::infinity();
    } else {
      res.status = LpResult::Status::optimal;
      res.value = tab_[m_][n_ + 1];
    }
    return res;
  }

 private:
  static constexpr double kEps = 1e-9;

  bool better(int row, int j, int s) const {
    const double d = tab_[row][j] - tab_[row][s];
    if (d != 0.0) return d < 0.0;
    return nonbasic_[j] < nonbasic_[s];
  }

  void pivot(int r, int s) {
    auto& prow = tab_[static_cast<std::size_t>(r)];
    const double inv = 1.0 / prow[s];
    for (int i = 0; i < m_ + 2; ++i) {
      if (i == r || std::abs(tab_[i][s]) <= kEps) continue;
      auto& row = tab_[static_cast<std::size_t>(i)];
      const double f = row[s] * inv;
      for (int j = 0; j < n_ + 2; ++j) row[j] -= prow[j] * f;
      row[s] = prow[s] * f;
    }
    for (int j = 0; j < n_ + 2; ++j) {
      if (j != s) prow[j] *= inv;
    }
    for (int i = 0; i < m_ + 2; ++i) {
      if (i != r) tab_[i][s] *= -inv;
    }
    prow[s] = inv;
    std::swap(basic_[static_cast<std::size_t>(r)], nonbasic_[static_cast<std::size_t>(s)]);
  }

  bool run_phase(int phase) {
    const int obj_row = m_ + phase - 1;
    for (;;) {
      int s = -1;
      for (int j = 0; j <= n_; ++j) {
        if (nonbasic_[j] == -phase) continue;
        if (s == -1 || better(obj_row, j, s)) s = j;
      }
      if (tab_[obj_row][s] >= -kEps) return true;
      int r = -1;
      for (int i = 0; i < m_; ++i) {
        if (tab_[i][s] <= kEps) continue;
        if (r == -1) {
          r = i;
          continue;
        }
        const double ratio_i = tab_[i][n_ + 1] / tab_[i][s];
        const double ratio_r = tab_[r][n_ + 1] / tab_[r][s];
        if (ratio_i < ratio_r || (ratio_i == ratio_r && basic_[i] < basic_[r])) r = i;
      }
      if (r == -1) return false;  // unbounded
      pivot(r, s);
    }
  }

  int m_, n_;
  std::vector<int> nonbasic_;
  std::vector<int> basic_;
  std::vector<std::vector<double>> tab_;
};

/// Convenience wrapper: maximize c^T x s.t. A x <= b, x >= 0.
inline LpResult solve_lp_max(const std::vector<std::vector<double>>& a,
                             const std::vector<double>& b, const std::vector<double>& c) {
  return SimplexSolver(a, b, c).solve();
}

}  // namespace mmnoma
