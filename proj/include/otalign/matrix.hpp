#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace otalign {

// Row-major dense matrix of doubles. Deliberately minimal; all numerical
// kernels in this project are explicit loops over these.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a[i * cols + j];
  }

  std::span<double> row(std::size_t i) { return {a.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {a.data() + i * cols, cols};
  }

  std::size_t size() const { return a.size(); }
};

// y = M x
inline void matvec(const Mat& m, std::span<const double> x,
                   std::span<double> y) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.a.data() + i * m.cols;
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += r[j] * x[j];
    y[i] = s;
  }
}

// y += Mᵀ x
inline void matvec_t_add(const Mat& m, std::span<const double> x,
                         std::span<double> y) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.a.data() + i * m.cols;
    const double xi = x[i];
    for (std::size_t j = 0; j < m.cols; ++j) y[j] += r[j] * xi;
  }
}

// m += s · u vᵀ
inline void add_outer(Mat& m, std::span<const double> u,
                      std::span<const double> v, double s = 1.0) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* r = m.a.data() + i * m.cols;
    const double ui = s * u[i];
    for (std::size_t j = 0; j < m.cols; ++j) r[j] += ui * v[j];
  }
}

inline double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace otalign
