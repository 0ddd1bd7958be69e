#pragma once

// Independent reference implementations used only by tests. Each one takes
// the slow-but-obvious route so it shares no code path with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "otalign/matrix.hpp"
#include "otalign/recognizer.hpp"

namespace oracles {

// Plain recursion over the three edit operations, no memoization.
inline int lev_recursive(std::string_view a, std::string_view b) {
  if (a.empty()) return static_cast<int>(b.size());
  if (b.empty()) return static_cast<int>(a.size());
  const int del = lev_recursive(a.substr(1), b) + 1;
  const int ins = lev_recursive(a, b.substr(1)) + 1;
  const int sub = lev_recursive(a.substr(1), b.substr(1)) + (a[0] != b[0] ? 1 : 0);
  return std::min({del, ins, sub});
}

// All strings over `alphabet` with length <= max_len, including "".
inline std::vector<std::string> all_strings(std::string_view alphabet, int max_len) {
  std::vector<std::string> out{""};
  std::size_t level_start = 0;
  for (int len = 1; len <= max_len; ++len) {
    const std::size_t level_end = out.size();
    for (std::size_t i = level_start; i < level_end; ++i)
      for (char c : alphabet) out.push_back(out[i] + c);
    level_start = level_end;
  }
  return out;
}

// CTC collapse applied to an explicit class path.
inline std::string collapse_path(const std::vector<int>& path,
                                 const otalign::Alphabet& ab) {
  std::string out;
  int prev = -1;
  for (int k : path) {
    if (k != prev && k != otalign::Alphabet::kBlank) out += ab.symbol_of(k);
    prev = k;
  }
  return out;
}

// Brute-force CTC: enumerate every class path, sum softmax probabilities of
// the paths that collapse to the target.
inline double ctc_enumerate(const otalign::Mat& logits, const std::string& target,
                            const otalign::Alphabet& ab) {
  const int T = static_cast<int>(logits.rows);
  const int K = static_cast<int>(logits.cols);
  otalign::Mat probs(logits.rows, logits.cols);
  for (int t = 0; t < T; ++t) {
    double hi = logits(t, 0);
    for (int k = 1; k < K; ++k) hi = std::max(hi, logits(t, k));
    double sum = 0.0;
    for (int k = 0; k < K; ++k) sum += std::exp(logits(t, k) - hi);
    for (int k = 0; k < K; ++k) probs(t, k) = std::exp(logits(t, k) - hi) / sum;
  }

  double total = 0.0;
  std::vector<int> path(static_cast<std::size_t>(T), 0);
  std::function<void(int, double)> walk = [&](int t, double p) {
    if (t == T) {
      if (collapse_path(path, ab) == target) total += p;
      return;
    }
    for (int k = 0; k < K; ++k) {
      path[static_cast<std::size_t>(t)] = k;
      walk(t + 1, p * probs(t, k));
    }
  };
  walk(0, 1.0);
  return -std::log(total);
}

// Central finite difference of f along coordinate i of xs.
inline double central_diff(std::vector<double>& xs, std::size_t i,
                           const std::function<double()>& f, double h = 1e-4) {
  const double keep = xs[i];
  xs[i] = keep + h;
  const double up = f();
  xs[i] = keep - h;
  const double down = f();
  xs[i] = keep;
  return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double mag = std::max(std::abs(a), std::abs(b));
  if (mag < 1e-10) return 0.0;  // both effectively zero
  return std::abs(a - b) / mag;
}

// Golden-section minimum of a strictly convex function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo,
                         double hi, int iters = 200) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  for (int i = 0; i < iters; ++i) {
    if (f(c) < f(d))
      b = d;
    else
      a = c;
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  return f((a + b) / 2.0);
}

}  // namespace oracles
