#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace crsfl {

// Dense d-dimensional gradient / weight vector. Dimension is fixed per
// experiment; all elements stay finite.
using GradientVector = std::vector<double>;

inline double squared_l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double squared_l2(double x) { return x * x; }

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void check_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

// y += x
inline void add_inplace(GradientVector& y, std::span<const double> x) {
  check_same_dim(y.size(), x.size(), "add_inplace");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
}

// y -= x
inline void sub_inplace(GradientVector& y, std::span<const double> x) {
  check_same_dim(y.size(), x.size(), "sub_inplace");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= x[i];
}

// y += a * x
inline void axpy_inplace(GradientVector& y, double a,
                         std::span<const double> x) {
  check_same_dim(y.size(), x.size(), "axpy_inplace");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline void scale_inplace(GradientVector& y, double a) {
  for (double& v : y) v *= a;
}

}  // namespace crsfl
