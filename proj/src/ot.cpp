#include "otalign/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace otalign {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_marginal(std::span<const double> m, const char* what) {
  double sum = 0.0;
  for (double v : m) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(what) + ": does not sum to 1");
}

}  // namespace

Mat cost_matrix(const Mat& projected, const EmbeddingSpace& embedding) {
  if (projected.rows == 0 || embedding.points.rows == 0)
    throw std::invalid_argument("cost_matrix: empty inputs");
  if (projected.cols != embedding.dim)
    throw std::invalid_argument("cost_matrix: dimension mismatch");
  Mat c(projected.rows, embedding.points.rows);
  for (std::size_t i = 0; i < projected.rows; ++i)
    for (std::size_t w = 0; w < embedding.points.rows; ++w)
      c(i, w) = sqdist(projected.row(i), embedding.points.row(w));
  return c;
}

TransportPlan sinkhorn(const Mat& cost, std::span<const double> row_marginal,
                       std::span<const double> col_marginal,
                       const SinkhornOptions& opts,
                       const std::vector<double>* warm_f,
                       const std::vector<double>* warm_g) {
  const std::size_t n = cost.rows, m = cost.cols;
  if (row_marginal.size() != n || col_marginal.size() != m)
    throw std::invalid_argument("sinkhorn: marginal size mismatch");
  if (opts.epsilon <= 0.0 || opts.tol <= 0.0 || opts.max_iters < 1)
    throw std::invalid_argument("sinkhorn: invalid options");
  for (double v : cost.a)
    if (!std::isfinite(v)) throw std::invalid_argument("sinkhorn: non-finite cost");
  check_marginal(row_marginal, "sinkhorn row marginal");
  check_marginal(col_marginal, "sinkhorn col marginal");

  const double eps = opts.epsilon;
  std::vector<double> log_a(n), log_b(m);
  for (std::size_t i = 0; i < n; ++i) {
    if (row_marginal[i] <= 0.0)
      throw std::invalid_argument("sinkhorn: zero row marginal entry");
    log_a[i] = std::log(row_marginal[i]);
  }
  std::vector<char> active(m, 1);
  for (std::size_t w = 0; w < m; ++w) {
    active[w] = col_marginal[w] > 0.0;
    log_b[w] = active[w] ? std::log(col_marginal[w]) : kNegInf;
  }

  TransportPlan plan;
  plan.epsilon = eps;
  plan.f = (warm_f && warm_f->size() == n) ? *warm_f : std::vector<double>(n, 0.0);
  plan.g = (warm_g && warm_g->size() == m) ? *warm_g : std::vector<double>(m, 0.0);
  for (std::size_t w = 0; w < m; ++w)
    if (!active[w]) plan.g[w] = 0.0;  // unused; keep finite for the dump

  std::vector<double>& f = plan.f;
  std::vector<double>& g = plan.g;
  std::vector<double> col_sum(m);

  auto logsumexp_row = [&](std::size_t i) {
    double hi = kNegInf;
    for (std::size_t w = 0; w < m; ++w) {
      if (!active[w]) continue;
      hi = std::max(hi, (g[w] - cost(i, w)) / eps);
    }
    double s = 0.0;
    for (std::size_t w = 0; w < m; ++w) {
      if (!active[w]) continue;
      s += std::exp((g[w] - cost(i, w)) / eps - hi);
    }
    return hi + std::log(s);
  };
  auto logsumexp_col = [&](std::size_t w) {
    double hi = kNegInf;
    for (std::size_t i = 0; i < n; ++i)
      hi = std::max(hi, (f[i] - cost(i, w)) / eps);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += std::exp((f[i] - cost(i, w)) / eps - hi);
    return hi + std::log(s);
  };

  double violation = std::numeric_limits<double>::infinity();
  int sweeps = 0;
  while (sweeps < opts.max_iters) {
    ++sweeps;
    for (std::size_t i = 0; i < n; ++i)
      f[i] = eps * (log_a[i] - logsumexp_row(i));
    for (std::size_t w = 0; w < m; ++w)
      if (active[w]) g[w] = eps * (log_b[w] - logsumexp_col(w));

    // After the column update the column sums are exact; the residual
    // lives in the rows. Both are measured for the trace.
    violation = 0.0;
    std::fill(col_sum.begin(), col_sum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (std::size_t w = 0; w < m; ++w) {
        if (!active[w]) continue;
        const double t = std::exp((f[i] + g[w] - cost(i, w)) / eps);
        row_sum += t;
        col_sum[w] += t;
      }
      violation = std::max(violation, std::abs(row_sum - row_marginal[i]));
    }
    for (std::size_t w = 0; w < m; ++w) {
      const double target = active[w] ? col_marginal[w] : 0.0;
      violation = std::max(violation, std::abs(col_sum[w] - target));
    }
    plan.violation_trace.push_back(violation);
    if (violation < opts.tol) {
      plan.converged = true;
      break;
    }
  }

  plan.iterations = sweeps;
  plan.marginal_violation = violation;
  plan.t = Mat(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t w = 0; w < m; ++w)
      plan.t(i, w) = active[w] ? std::exp((f[i] + g[w] - cost(i, w)) / eps) : 0.0;
  return plan;
}

double ot_objective(const Mat& plan, const Mat& cost, double epsilon) {
  if (plan.rows != cost.rows || plan.cols != cost.cols)
    throw std::invalid_argument("ot_objective: shape mismatch");
  double transport = 0.0, entropy = 0.0;
  for (std::size_t k = 0; k < plan.a.size(); ++k) {
    const double t = plan.a[k];
    if (t < 0.0) throw std::invalid_argument("ot_objective: negative plan entry");
    if (t > 0.0) {
      transport += t * cost.a[k];
      entropy += t * (std::log(t) - 1.0);
    }
  }
  return transport + epsilon * entropy;
}

std::vector<double> row_distribution(const TransportPlan& plan, std::size_t i) {
  if (i >= plan.t.rows) throw std::invalid_argument("row_distribution: bad row");
  double sum = 0.0;
  for (std::size_t w = 0; w < plan.t.cols; ++w) sum += plan.t(i, w);
  if (sum <= 0.0) throw std::invalid_argument("row_distribution: zero row");
  std::vector<double> q(plan.t.cols);
  for (std::size_t w = 0; w < plan.t.cols; ++w) q[w] = plan.t(i, w) / sum;
  return q;
}

double row_entropy(std::span<const double> dist) {
  double sum = 0.0, h = 0.0;
  for (double q : dist) {
    if (q < 0.0) throw std::invalid_argument("row_entropy: negative entry");
    sum += q;
    if (q > 0.0) h -= q * std::log(q);
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("row_entropy: not a probability vector");
  return h;
}

}  // namespace otalign
