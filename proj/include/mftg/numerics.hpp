#pragma once

#include <span>
#include <vector>

#include "mftg/scenario.hpp"

namespace mftg {

/// Dense row-major n×n matrix. Only used for the I×I coupling matrices.
class SmallMatrix {
 public:
  SmallMatrix() = default;
  explicit SmallMatrix(int n) : n_(n), entries_(static_cast<std::size_t>(n) * n, 0.0) {}
  SmallMatrix(int n, std::vector<double> row_major);

  static SmallMatrix identity(int n);

  int size() const noexcept { return n_; }
  double& operator()(int row, int col) { return entries_[index(row, col)]; }
  double operator()(int row, int col) const { return entries_[index(row, col)]; }
  std::span<const double> entries() const noexcept { return entries_; }

  bool operator==(const SmallMatrix&) const = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * n_ + col;
  }

  int n_ = 0;
  std::vector<double> entries_;
};

/// x^n for integer n ≥ 0, by repeated squaring.
double ipow(double x, int n);

/// Real m-th root for odd m, sign preserving: signed_root(-y, m) == -signed_root(y, m).
double signed_root(double y, int m);

/// Solves E g = c with partial pivoting. Throws SingularityError when a pivot
/// falls below 1e-12 times the scale of its row.
std::vector<double> solve_linear(const SmallMatrix& e, std::span<const double> c);

/// E[ε^order] for the shock entering transition `step` -> `step + 1`.
double noise_even_moment(const NoiseSpec& noise, int step, int order);

/// Minimum over `grid` of the second derivative of z ↦ z^{2p} + (a z + b)^{2p}.
/// Throws DomainError when a == 0, b == 0, p < 1 or the grid is empty.
double convexity_scan(int p, double a, double b, std::span<const double> grid);

}  // namespace mftg
