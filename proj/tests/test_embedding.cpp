#include <doctest.h>

#include <cmath>

#include "otalign/embedding.hpp"
#include "otalign/rng.hpp"

using namespace otalign;

namespace {

DistanceMatrix unit_triangle() {
  DistanceMatrix d{Mat(3, 3)};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d.d(i, j) = i == j ? 0.0 : 1.0;
  return d;
}

}  // namespace

TEST_CASE("pairwise_distances examples") {
  const Lexicon one = build_lexicon({"a"}, PriorMode::Uniform);
  const DistanceMatrix d1 = pairwise_distances(one);
  CHECK(d1.n() == 1);
  CHECK(d1.d(0, 0) == 0.0);

  const Lexicon two = build_lexicon({"a", "b"}, PriorMode::Uniform);
  const DistanceMatrix d2 = pairwise_distances(two);
  CHECK(d2.d(0, 1) == 1.0);
  CHECK(d2.d(1, 0) == 1.0);

  const Lexicon three = build_lexicon({"ab", "ba", "aa"}, PriorMode::Uniform);
  const DistanceMatrix d3 = pairwise_distances(three);
  // sorted words: aa, ab, ba
  CHECK(d3.d(1, 2) == 2.0);  // ab <-> ba
  CHECK(d3.d(0, 1) == 1.0);  // aa <-> ab
  CHECK(d3.d(0, 2) == 1.0);  // aa <-> ba
}

TEST_CASE("stress examples") {
  SUBCASE("perfect 1-d line") {
    DistanceMatrix d{Mat(3, 3)};
    const double line[3] = {0.0, 1.0, 2.0};
    Mat pts(3, 1);
    for (int i = 0; i < 3; ++i) {
      pts(i, 0) = line[i];
      for (int j = 0; j < 3; ++j) d.d(i, j) = std::abs(line[i] - line[j]);
    }
    CHECK(stress(d, pts) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("all points collapsed against unit distances") {
    const DistanceMatrix d = unit_triangle();
    const Mat pts(3, 2);  // all at origin
    CHECK(stress(d, pts) == doctest::Approx(3.0).epsilon(1e-15));
  }
  SUBCASE("equilateral triangle recovers zero stress") {
    const DistanceMatrix d = unit_triangle();
    Mat pts(3, 2);
    pts(1, 0) = 1.0;
    pts(2, 0) = 0.5;
    pts(2, 1) = std::sqrt(3.0) / 2.0;
    CHECK(stress(d, pts) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch throws") {
    const DistanceMatrix d = unit_triangle();
    CHECK_THROWS_AS(stress(d, Mat(2, 2)), std::invalid_argument);
  }
}

TEST_CASE("stress is invariant under rigid motions") {
  Rng rng(17);
  DistanceMatrix d{Mat(5, 5)};
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) {
      const double v = rng.uniform(0.5, 3.0);
      d.d(i, j) = v;
      d.d(j, i) = v;
    }
  Mat pts(5, 2);
  for (double& v : pts.a) v = rng.uniform(-2.0, 2.0);

  const double theta = 0.73, tx = 1.4, ty = -2.2;
  Mat moved(5, 2);
  for (int i = 0; i < 5; ++i) {
    moved(i, 0) = std::cos(theta) * pts(i, 0) - std::sin(theta) * pts(i, 1) + tx;
    moved(i, 1) = std::sin(theta) * pts(i, 0) + std::cos(theta) * pts(i, 1) + ty;
  }
  CHECK(std::abs(stress(d, pts) - stress(d, moved)) < 1e-9);
}

TEST_CASE("mds_embed collapses duplicate points at zero distance") {
  DistanceMatrix d{Mat(2, 2)};
  const EmbeddingSpace emb = mds_embed(d, 2, {});
  CHECK(emb.points(0, 0) == doctest::Approx(emb.points(1, 0)).epsilon(1e-15));
  CHECK(emb.points(0, 1) == doctest::Approx(emb.points(1, 1)).epsilon(1e-15));
  CHECK(emb.stress == doctest::Approx(0.0));
}

TEST_CASE("mds_embed recovers an equilateral triangle") {
  const DistanceMatrix d = unit_triangle();
  const EmbeddingSpace emb = mds_embed(d, 2, {5000, 1e-15, 42});
  CHECK(stress(d, emb.points) < 1e-6);
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      CHECK(std::sqrt(sqdist(emb.points.row(i), emb.points.row(j))) ==
            doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("mds_embed beats random configurations on a 2-d square metric") {
  const Lexicon lex = build_lexicon({"aa", "ab", "ba", "bb"}, PriorMode::Uniform);
  const DistanceMatrix d = pairwise_distances(lex);
  const EmbeddingSpace emb = mds_embed(d, 2, {2000, 1e-12, 7});

  double denom = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) denom += d.d(i, j) * d.d(i, j);

  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    Mat pts(4, 2);
    for (double& v : pts.a) v = rng.uniform(-2.0, 2.0);
    CHECK(emb.stress <= stress(d, pts) / denom + 1e-12);
  }
}

TEST_CASE("mds stress trace is non-increasing") {
  Rng rng(23);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const int n = 8;
    DistanceMatrix d{Mat(n, n)};
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double v = 1.0 + rng.bounded(5);
        d.d(i, j) = v;
        d.d(j, i) = v;
      }
    const EmbeddingSpace emb = mds_embed(d, 3, {300, 1e-12, seed});
    REQUIRE(emb.stress_trace.size() >= 2);
    for (std::size_t k = 1; k < emb.stress_trace.size(); ++k)
      CHECK(emb.stress_trace[k] <= emb.stress_trace[k - 1] + 1e-12);
  }
}

TEST_CASE("mds_embed is reproducible bitwise") {
  const Lexicon lex =
      build_lexicon({"cat", "cart", "dog", "dig", "cot"}, PriorMode::Uniform);
  const DistanceMatrix d = pairwise_distances(lex);
  const EmbeddingSpace a = mds_embed(d, 3, {200, 1e-9, 123});
  const EmbeddingSpace b = mds_embed(d, 3, {200, 1e-9, 123});
  CHECK(a.points.a == b.points.a);
  CHECK(a.stress == b.stress);
}

TEST_CASE("mds_embed input validation") {
  DistanceMatrix d{Mat(3, 3)};
  d.d(0, 1) = 1.0;  // asymmetric
  CHECK_THROWS_AS(mds_embed(d, 2, {}), std::invalid_argument);

  const DistanceMatrix tri = unit_triangle();
  CHECK_THROWS_AS(mds_embed(tri, 4, {}), std::invalid_argument);
  CHECK_THROWS_AS(mds_embed(tri, 0, {}), std::invalid_argument);
}

TEST_CASE("embedding json round trip") {
  const DistanceMatrix d = unit_triangle();
  const EmbeddingSpace emb = mds_embed(d, 2, {100, 1e-9, 5});
  const EmbeddingSpace back = embedding_from_json(embedding_to_json(emb));
  CHECK(back.dim == emb.dim);
  CHECK(back.points.a == emb.points.a);
  CHECK(back.stress == emb.stress);
}
