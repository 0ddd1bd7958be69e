#include "otalign/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "otalign/rng.hpp"

namespace otalign {

void DistanceMatrix::validate() const {
  if (d.rows != d.cols) throw std::invalid_argument("distance matrix: not square");
  for (std::size_t i = 0; i < d.rows; ++i) {
    if (d(i, i) != 0.0)
      throw std::invalid_argument("distance matrix: nonzero diagonal");
    for (std::size_t j = i + 1; j < d.cols; ++j) {
      if (d(i, j) != d(j, i))
        throw std::invalid_argument("distance matrix: not symmetric");
      if (d(i, j) < 0.0)
        throw std::invalid_argument("distance matrix: negative entry");
    }
  }
}

DistanceMatrix pairwise_distances(const Lexicon& lex) {
  if (lex.words.empty())
    throw std::invalid_argument("pairwise_distances: empty lexicon");
  const std::size_t n = lex.words.size();
  DistanceMatrix dist{Mat(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = levenshtein(lex.words[i], lex.words[j]);
      dist.d(i, j) = v;
      dist.d(j, i) = v;
    }
  }
  return dist;
}

double stress(const DistanceMatrix& dist, const Mat& points) {
  if (points.rows != dist.n())
    throw std::invalid_argument("stress: point count does not match matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) {
    for (std::size_t j = i + 1; j < points.rows; ++j) {
      const double e = dist.d(i, j) - std::sqrt(sqdist(points.row(i), points.row(j)));
      s += e * e;
    }
  }
  return s;
}

EmbeddingSpace mds_embed(const DistanceMatrix& dist, std::size_t dim,
                         const MdsOptions& opts) {
  dist.validate();
  const std::size_t n = dist.n();
  if (dim < 1) throw std::invalid_argument("mds_embed: dim must be >= 1");
  if (dim > n) throw std::invalid_argument("mds_embed: dim exceeds point count");

  EmbeddingSpace emb;
  emb.dim = dim;
  emb.points = Mat(n, dim);
  Rng rng = Rng(opts.seed).fork("mds_init");
  for (double& v : emb.points.a) v = rng.uniform(-1.0, 1.0);

  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) denom += dist.d(i, j) * dist.d(i, j);

  double sigma_prev = stress(dist, emb.points);
  emb.stress_trace.push_back(sigma_prev);

  Mat next(n, dim);
  std::vector<double> brow(n);
  for (int it = 0; it < opts.max_iters && sigma_prev > 0.0; ++it) {
    // Guttman transform: X' = (1/n) B(X) X with B built from distance ratios.
    std::fill(next.a.begin(), next.a.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double bii = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dij = std::sqrt(sqdist(emb.points.row(i), emb.points.row(j)));
        const double bij = (dij > 0.0) ? -dist.d(i, j) / dij : 0.0;
        brow[j] = bij;
        bii -= bij;
      }
      brow[i] = bii;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = brow[j] / static_cast<double>(n);
        if (w == 0.0) continue;
        for (std::size_t k = 0; k < dim; ++k) next(i, k) += w * emb.points(j, k);
      }
    }
    std::swap(emb.points.a, next.a);

    const double sigma = stress(dist, emb.points);
    emb.stress_trace.push_back(sigma);
    const double rel = (sigma_prev - sigma) / sigma_prev;
    sigma_prev = sigma;
    if (rel < opts.tol) break;
  }

  emb.stress = denom > 0.0 ? sigma_prev / denom : sigma_prev;
  return emb;
}

nlohmann::json embedding_to_json(const EmbeddingSpace& emb) {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t i = 0; i < emb.points.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < emb.points.cols; ++k) row.push_back(emb.points(i, k));
    pts.push_back(std::move(row));
  }
  return {{"dim", emb.dim}, {"points", std::move(pts)}, {"stress", emb.stress}};
}

EmbeddingSpace embedding_from_json(const nlohmann::json& j) {
  EmbeddingSpace emb;
  emb.dim = j.at("dim").get<std::size_t>();
  const auto& pts = j.at("points");
  emb.points = Mat(pts.size(), emb.dim);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].size() != emb.dim)
      throw std::invalid_argument("embedding json: row width mismatch");
    for (std::size_t k = 0; k < emb.dim; ++k) emb.points(i, k) = pts[i][k].get<double>();
  }
  emb.stress = j.at("stress").get<double>();
  return emb;
}

}  // namespace otalign
