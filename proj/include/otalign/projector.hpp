#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "otalign/embedding.hpp"
#include "otalign/matrix.hpp"
#include "otalign/optimizer.hpp"
#include "otalign/ot.hpp"
#include "otalign/rng.hpp"

namespace otalign {

// Trainable map from visual descriptors into the word-embedding space:
// three affine layers with ReLU between them, in_dim -> 128 -> 128 -> out_dim.
struct ProjectorConfig {
  int in_dim = 64;
  int hidden = 128;
  int out_dim = 100;
  void validate() const;
};

struct ProjectorParams {
  ProjectorConfig cfg;
  Mat w1;
  std::vector<double> b1;
  Mat w2;
  std::vector<double> b2;
  Mat w3;
  std::vector<double> b3;

  static ProjectorParams init(const ProjectorConfig& cfg, Rng rng);
  std::size_t param_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

std::vector<double> project(const ProjectorParams& params,
                            std::span<const double> z);

// Forward over all rows with cached activations for backprop.
struct ProjectorActivations {
  Mat h1, h2;   // post-ReLU
  Mat out;      // N x out_dim
};
ProjectorActivations project_all(const ProjectorParams& params, const Mat& z_rows);

// Accumulates the parameter gradient given d(loss)/d(output) per row.
std::vector<double> projector_backprop(const ProjectorParams& params,
                                       const Mat& z_rows,
                                       const ProjectorActivations& acts,
                                       const Mat& grad_out);

// (row into the descriptor matrix, word index in the lexicon/embedding)
struct AlignedPair {
  std::size_t row;
  int word;
};

struct SupLossResult {
  double loss = 0.0;
  std::vector<double> grad;  // flat, layout of flatten()
};

// Mean squared deviation between projected descriptors and the embeddings
// of their transcriptions.
SupLossResult sup_loss(const ProjectorParams& params, const Mat& z_rows,
                       const std::vector<AlignedPair>& aligned,
                       const EmbeddingSpace& embedding);

struct OtLossResult {
  double value = 0.0;          // transport + epsilon * entropic term
  double transport_term = 0.0;
  double entropy_term = 0.0;   // sum T (log T - 1)
  bool converged = false;
  std::vector<double> grad;    // flat parameter gradient, plan held fixed
  TransportPlan plan;
};

// Projects every descriptor, solves the entropic coupling against the
// lexicon embedding under the given prior, and returns the objective with
// the envelope (fixed-plan) gradient: d<T,C>/dz_i = sum_w 2 T_iw (z_i - e_w),
// chained through the projector.
OtLossResult ot_loss(const ProjectorParams& params, const Mat& z_rows,
                     const EmbeddingSpace& embedding,
                     std::span<const double> prior,
                     const SinkhornOptions& opts,
                     const std::vector<double>* warm_f = nullptr,
                     const std::vector<double>* warm_g = nullptr);

struct ProjectorTrainOptions {
  int epochs = 30;
  double lambda_ot = 1e-2;
  AdamOptions adam{.lr = 1e-4};
  SinkhornOptions sinkhorn;
  std::uint64_t seed = 0;
};

struct ProjectorTrainResult {
  std::vector<double> loss_trace;  // L_sup + lambda_ot * L_OT per epoch
  std::vector<double> sup_trace;
  std::vector<double> ot_trace;
  int sinkhorn_failures = 0;       // epochs whose solve did not converge
  std::vector<double> warm_f, warm_g;  // potentials from the last solve
};

// Full-batch Adam; the coupling is re-solved once per epoch on the current
// projections, warm-started from the previous epoch's potentials.
ProjectorTrainResult train_projector(ProjectorParams& params, const Mat& z_rows,
                                     const std::vector<AlignedPair>& aligned,
                                     const EmbeddingSpace& embedding,
                                     std::span<const double> prior,
                                     const ProjectorTrainOptions& opts);

void save_projector(const std::filesystem::path& path, const ProjectorParams& params);
ProjectorParams load_projector(const std::filesystem::path& path);

}  // namespace otalign
