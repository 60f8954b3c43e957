#include "mftg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mftg {

SmallMatrix::SmallMatrix(int n, std::vector<double> row_major)
    : n_(n), entries_(std::move(row_major)) {
  if (n < 1 || entries_.size() != static_cast<std::size_t>(n) * n) {
    throw DomainError("SmallMatrix: expected " + std::to_string(n) + "x" +
                      std::to_string(n) + " entries");
  }
}

SmallMatrix SmallMatrix::identity(int n) {
  SmallMatrix m(n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double ipow(double x, int n) {
  double result = 1.0;
  double base = x;
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

double signed_root(double y, int m) {
  if (m < 1 || m % 2 == 0) {
    throw DomainError("signed_root: order must be a positive odd integer, got " +
                      std::to_string(m));
  }
  if (!std::isfinite(y)) throw DomainError("signed_root: non-finite argument");
  if (m == 1 || y == 0.0) return y;

  const double magnitude = std::abs(y);
  double t = m == 3 ? std::cbrt(magnitude) : std::pow(magnitude, 1.0 / m);
  // One Newton step on t^m = |y| removes the error from rounding 1/m.
  const double tm1 = ipow(t, m - 1);
  if (tm1 > 0.0 && std::isfinite(tm1)) t -= (tm1 * t - magnitude) / (m * tm1);
  return std::copysign(t, y);
}

std::vector<double> solve_linear(const SmallMatrix& e, std::span<const double> c) {
  const int n = e.size();
  if (n < 1 || c.size() != static_cast<std::size_t>(n)) {
    throw DomainError("solve_linear: dimension mismatch");
  }

  std::vector<double> a(e.entries().begin(), e.entries().end());
  std::vector<double> rhs(c.begin(), c.end());
  std::vector<double> row_scale(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = a[i * n + j];
      if (!std::isfinite(v)) throw DomainError("solve_linear: non-finite matrix entry");
      row_scale[i] = std::max(row_scale[i], std::abs(v));
    }
    if (!std::isfinite(rhs[i])) throw DomainError("solve_linear: non-finite right-hand side");
  }

  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (pivot != col) {
      for (int j = 0; j < n; ++j) std::swap(a[col * n + j], a[pivot * n + j]);
      std::swap(rhs[col], rhs[pivot]);
      std::swap(row_scale[col], row_scale[pivot]);
    }
    const double p = a[col * n + col];
    if (!(std::abs(p) > 1e-12 * row_scale[col])) {
      throw SingularityError("coupling matrix is singular (pivot " + std::to_string(p) +
                             " in column " + std::to_string(col) + ")");
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / p;
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
      rhs[r] -= f * rhs[col];
    }
  }

  std::vector<double> g(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = rhs[i];
    for (int j = i + 1; j < n; ++j) s -= a[i * n + j] * g[j];
    g[i] = s / a[i * n + i];
  }
  return g;
}

namespace {

double double_factorial_odd(int n) {
  double r = 1.0;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

}  // namespace

double noise_even_moment(const NoiseSpec& noise, int step, int order) {
  if (order < 2 || order % 2 != 0) {
    throw DomainError("noise_even_moment: order must be even and >= 2, got " +
                      std::to_string(order));
  }
  if (noise.kind == NoiseKind::ExplicitMoments) {
    const auto it = noise.moments.find(order);
    if (it == noise.moments.end()) {
      throw DomainError("noise moment of order " + std::to_string(order) +
                        " is not tabulated");
    }
    if (step < 0 || static_cast<std::size_t>(step) >= it->second.size()) {
      throw DomainError("noise moment table has no entry for step " + std::to_string(step));
    }
    return it->second[step];
  }
  if (step < 0 || static_cast<std::size_t>(step) >= noise.sigma.size()) {
    throw DomainError("noise sigma has no entry for step " + std::to_string(step));
  }
  const double sigma = noise.sigma[step];
  switch (noise.kind) {
    case NoiseKind::Gaussian:
      return ipow(sigma, order) * double_factorial_odd(order - 1);
    case NoiseKind::Rademacher:
      return ipow(sigma, order);
    case NoiseKind::Uniform: {
      const double w = sigma * std::sqrt(3.0);
      return ipow(w, order) / (order + 1);
    }
    case NoiseKind::ExplicitMoments:
      break;
  }
  return 0.0;
}

double convexity_scan(int p, double a, double b, std::span<const double> grid) {
  if (p < 1) throw DomainError("convexity_scan: p must be >= 1");
  if (a == 0.0 || b == 0.0) throw DomainError("convexity_scan: requires a != 0 and b != 0");
  if (grid.empty()) throw DomainError("convexity_scan: empty grid");
  const double k = 2.0 * p * (2.0 * p - 1.0);
  double lowest = std::numeric_limits<double>::infinity();
  for (const double z : grid) {
    if (!std::isfinite(z)) throw DomainError("convexity_scan: non-finite grid point");
    const double second = k * ipow(z, 2 * p - 2) + k * a * a * ipow(a * z + b, 2 * p - 2);
    lowest = std::min(lowest, second);
  }
  return lowest;
}

}  // namespace mftg
