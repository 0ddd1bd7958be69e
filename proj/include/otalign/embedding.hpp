#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "otalign/lexicon.hpp"
#include "otalign/matrix.hpp"

namespace otalign {

// Symmetric nonnegative matrix with zero diagonal (edit-distance units).
struct DistanceMatrix {
  Mat d;
  std::size_t n() const { return d.rows; }
  void validate() const;  // throws std::invalid_argument
};

struct MdsOptions {
  int max_iters = 500;
  double tol = 1e-9;  // relative stress decrease
  std::uint64_t seed = 0;
};

struct EmbeddingSpace {
  std::size_t dim = 0;
  Mat points;     // one row per lexicon word, index-aligned
  double stress = 0.0;  // final normalized stress
  std::vector<double> stress_trace;  // raw stress, initial config included
};

DistanceMatrix pairwise_distances(const Lexicon& lex);

// Raw stress: sum over i<j of (d_ij - ||x_i - x_j||)^2.
double stress(const DistanceMatrix& dist, const Mat& points);

// SMACOF stress majorization from a seeded uniform start in [-1,1]^dim.
// Raw stress is non-increasing across iterations; stops when the relative
// decrease falls below tol or max_iters is reached. Normalized stress is
// raw stress divided by sum of d_ij^2 over i<j.
EmbeddingSpace mds_embed(const DistanceMatrix& dist, std::size_t dim,
                         const MdsOptions& opts);

nlohmann::json embedding_to_json(const EmbeddingSpace& emb);
EmbeddingSpace embedding_from_json(const nlohmann::json& j);

}  // namespace otalign
