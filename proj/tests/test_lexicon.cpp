#include <doctest.h>

#include <numeric>
#include <set>

#include "otalign/lexicon.hpp"
#include "otalign/rng.hpp"
#include "oracles.hpp"

using namespace otalign;

TEST_CASE("build_lexicon empirical prior") {
  const Lexicon lex = build_lexicon({"a", "b", "a"}, PriorMode::Empirical);
  CHECK(lex.words == std::vector<std::string>{"a", "b"});
  CHECK(lex.counts == std::vector<std::int64_t>{2, 1});
  CHECK(lex.prior[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(lex.prior[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("build_lexicon uniform prior") {
  const Lexicon lex = build_lexicon({"a", "b"}, PriorMode::Uniform);
  CHECK(lex.prior == std::vector<double>{0.5, 0.5});
}

TEST_CASE("build_lexicon zipf prior with harmonic normalization") {
  // counts a=3, b=2, c=1 -> ranks 1,2,3 -> weights 1, 1/2, 1/3
  const Lexicon lex =
      build_lexicon({"a", "a", "a", "b", "b", "c"}, PriorMode::Zipf, 1.0);
  CHECK(lex.prior[0] == doctest::Approx(6.0 / 11.0).epsilon(1e-12));
  CHECK(lex.prior[1] == doctest::Approx(3.0 / 11.0).epsilon(1e-12));
  CHECK(lex.prior[2] == doctest::Approx(2.0 / 11.0).epsilon(1e-12));

  // independent check of the normalizer
  double norm = 0.0;
  for (int r = 1; r <= 3; ++r) norm += std::pow(r, -1.0);
  CHECK(norm == doctest::Approx(11.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("build_lexicon zipf rank ties break lexicographically") {
  const Lexicon lex = build_lexicon({"b", "a"}, PriorMode::Zipf, 1.0);
  // equal counts: 'a' takes rank 1
  CHECK(lex.prior[0] > lex.prior[1]);
}

TEST_CASE("build_lexicon rejects bad input") {
  CHECK_THROWS_AS(build_lexicon({}, PriorMode::Empirical), std::invalid_argument);
  CHECK_THROWS_AS(build_lexicon({"ok", "no7"}, PriorMode::Empirical),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_lexicon({""}, PriorMode::Empirical), std::invalid_argument);
}

TEST_CASE("prior sums to one in every mode") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> tokens;
    const int n = 1 + static_cast<int>(rng.bounded(50));
    for (int i = 0; i < n; ++i) {
      std::string w(1 + rng.bounded(6), 'a');
      for (char& c : w) c = static_cast<char>('a' + rng.bounded(26));
      tokens.push_back(w);
    }
    for (PriorMode mode :
         {PriorMode::Empirical, PriorMode::Uniform, PriorMode::Zipf}) {
      const Lexicon lex = build_lexicon(tokens, mode, 1.3);
      const double sum =
          std::accumulate(lex.prior.begin(), lex.prior.end(), 0.0);
      CHECK(std::abs(sum - 1.0) < 1e-12);
      for (double p : lex.prior) CHECK(p >= 0.0);
    }
  }
}

TEST_CASE("levenshtein examples") {
  CHECK(levenshtein("and", "and") == 0);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("cat", "cart") == 1);
  CHECK(levenshtein("kitten", "sitting") == 3);
}

TEST_CASE("levenshtein matches the recursive edit-sequence oracle") {
  const auto strings = oracles::all_strings("ab", 4);
  for (const auto& a : strings)
    for (const auto& b : strings)
      CHECK(levenshtein(a, b) == oracles::lev_recursive(a, b));
}

TEST_CASE("levenshtein is a metric on random samples") {
  Rng rng(5);
  std::vector<std::string> corpus;
  for (int i = 0; i < 30; ++i) {
    std::string w(1 + rng.bounded(8), 'a');
    for (char& c : w) c = static_cast<char>('a' + rng.bounded(4));
    corpus.push_back(w);
  }
  for (const auto& a : corpus)
    for (const auto& b : corpus) {
      const int dab = levenshtein(a, b);
      CHECK((dab == 0) == (a == b));
      CHECK(dab == levenshtein(b, a));
      for (const auto& c : corpus)
        CHECK(levenshtein(a, c) <= dab + levenshtein(b, c));
    }
}

namespace {

// Independent PHOC oracle: split [0,1) into n*L unit cells; each cell lies in
// exactly one character span and one region. A character occupies a region
// iff strictly more than half of its L cells fall inside.
PhocVector phoc_cells_oracle(std::string_view word, const PhocConfig& cfg) {
  const int n = static_cast<int>(word.size());
  const int na = static_cast<int>(cfg.alphabet.size());
  PhocVector out;
  out.bits.assign(static_cast<std::size_t>(cfg.dim()), 0);
  std::size_t offset = 0;
  for (int level : cfg.levels) {
    std::vector<std::vector<int>> cells(
        static_cast<std::size_t>(level),
        std::vector<int>(static_cast<std::size_t>(n), 0));
    for (int u = 0; u < n * level; ++u) {
      const int ch = u / level;
      const int region = u / n;
      ++cells[static_cast<std::size_t>(region)][static_cast<std::size_t>(ch)];
    }
    for (int r = 0; r < level; ++r)
      for (int i = 0; i < n; ++i)
        if (2 * cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] >
            level) {
          const auto ci = cfg.alphabet.find(word[static_cast<std::size_t>(i)]);
          out.bits[offset + static_cast<std::size_t>(r) * na + ci] = 1;
        }
    offset += static_cast<std::size_t>(level) * na;
  }
  return out;
}

}  // namespace

TEST_CASE("phoc_encode examples") {
  PhocConfig ab{"ab", {1}};
  CHECK(phoc_encode("a", ab).bits == std::vector<std::uint8_t>{1, 0});

  PhocConfig two{"ab", {2}};
  CHECK(phoc_encode("ab", two).bits == std::vector<std::uint8_t>{1, 0, 0, 1});

  PhocConfig both{"ab", {1, 2}};
  CHECK(phoc_encode("ab", both).bits ==
        std::vector<std::uint8_t>{1, 1, 1, 0, 0, 1});
}

TEST_CASE("phoc_encode matches the cell-counting oracle") {
  Rng rng(9);
  const PhocConfig cfg{"abcd", {1, 2, 3, 4, 5}};
  for (int trial = 0; trial < 200; ++trial) {
    std::string w(1 + rng.bounded(9), 'a');
    for (char& c : w) c = static_cast<char>('a' + rng.bounded(4));
    CHECK(phoc_encode(w, cfg).bits == phoc_cells_oracle(w, cfg).bits);
  }
}

TEST_CASE("phoc_encode is deterministic with bounded bit count per level") {
  const PhocConfig cfg{};  // a-z, levels 1..4
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::string w(1 + rng.bounded(8), 'a');
    for (char& c : w) c = static_cast<char>('a' + rng.bounded(26));
    const PhocVector v1 = phoc_encode(w, cfg);
    const PhocVector v2 = phoc_encode(w, cfg);
    CHECK(v1.bits == v2.bits);
    std::size_t offset = 0;
    for (int level : cfg.levels) {
      const std::size_t width =
          static_cast<std::size_t>(level) * cfg.alphabet.size();
      int bits = 0;
      for (std::size_t i = offset; i < offset + width; ++i) bits += v1.bits[i];
      CHECK(bits <= static_cast<int>(w.size()) * level);
      offset += width;
    }
    for (auto b : v1.bits) CHECK((b == 0 || b == 1));
  }
}

TEST_CASE("phoc_encode rejects characters outside the alphabet") {
  CHECK_THROWS_AS(phoc_encode("ax", PhocConfig{"ab", {1}}), std::invalid_argument);
  CHECK_THROWS_AS(phoc_encode("", PhocConfig{"ab", {1}}), std::invalid_argument);
}

TEST_CASE("lexicon json round trip") {
  const Lexicon lex = build_lexicon({"cat", "dog", "cat"}, PriorMode::Empirical);
  const Lexicon back = lexicon_from_json(lexicon_to_json(lex));
  CHECK(back.words == lex.words);
  CHECK(back.counts == lex.counts);
  CHECK(back.prior == lex.prior);
}

TEST_CASE("lexicon index lookup") {
  const Lexicon lex = build_lexicon({"cat", "dog"}, PriorMode::Uniform);
  CHECK(lex.index_of("cat") == 0);
  CHECK(lex.index_of("dog") == 1);
  CHECK(lex.index_of("cow") == -1);
}
