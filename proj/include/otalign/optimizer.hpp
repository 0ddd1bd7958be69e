#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace otalign {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a flat parameter vector with bias correction.
class Adam {
 public:
  Adam(std::size_t n, AdamOptions opts)
      : opts_(opts), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& w, const std::vector<double>& g) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g[i];
      v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g[i] * g[i];
      w[i] -= opts_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + opts_.eps);
    }
  }

 private:
  AdamOptions opts_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace otalign
