#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "otalign/embedding.hpp"
#include "otalign/matrix.hpp"

namespace otalign {

struct SinkhornOptions {
  double epsilon = 0.1;
  int max_iters = 2000;
  double tol = 1e-6;  // max-norm marginal residual
};

// Entropically regularized coupling between N image rows and |lexicon|
// columns. Dual potentials are kept so follow-up solves on a slightly
// perturbed cost can warm-start.
struct TransportPlan {
  Mat t;
  double epsilon = 0.0;
  bool converged = false;
  double marginal_violation = 0.0;
  int iterations = 0;
  std::vector<double> violation_trace;  // one entry per sweep
  std::vector<double> f, g;             // dual potentials
};

// C(i,w) = ||projected_i - e_w||^2
Mat cost_matrix(const Mat& projected, const EmbeddingSpace& embedding);

// Log-domain Sinkhorn: alternating dual potential updates until the
// max-norm marginal violation drops below tol or max_iters is reached.
// Columns with zero marginal mass are excluded from the updates and
// receive exactly zero plan mass.
TransportPlan sinkhorn(const Mat& cost, std::span<const double> row_marginal,
                       std::span<const double> col_marginal,
                       const SinkhornOptions& opts,
                       const std::vector<double>* warm_f = nullptr,
                       const std::vector<double>* warm_g = nullptr);

// <T,C> + epsilon * sum T(log T - 1), with 0*(log 0 - 1) = 0.
double ot_objective(const Mat& plan, const Mat& cost, double epsilon);

// T(i,.) normalized to sum 1.
std::vector<double> row_distribution(const TransportPlan& plan, std::size_t i);

// Shannon entropy in nats; validates the input is a probability vector.
double row_entropy(std::span<const double> dist);

}  // namespace otalign
