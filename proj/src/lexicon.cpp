#include "otalign/lexicon.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace otalign {

PriorMode prior_mode_from_string(std::string_view s) {
  if (s == "empirical") return PriorMode::Empirical;
  if (s == "uniform") return PriorMode::Uniform;
  if (s == "zipf") return PriorMode::Zipf;
  throw std::invalid_argument("unknown prior mode: " + std::string(s));
}

std::string to_string(PriorMode mode) {
  switch (mode) {
    case PriorMode::Empirical: return "empirical";
    case PriorMode::Uniform: return "uniform";
    case PriorMode::Zipf: return "zipf";
  }
  return "?";
}

int Lexicon::index_of(std::string_view w) const {
  auto it = std::lower_bound(words.begin(), words.end(), w);
  if (it == words.end() || *it != w) return -1;
  return static_cast<int>(it - words.begin());
}

int PhocConfig::dim() const {
  int total = 0;
  for (int l : levels) total += l;
  return static_cast<int>(alphabet.size()) * total;
}

void PhocConfig::validate() const {
  if (alphabet.empty()) throw std::invalid_argument("phoc: empty alphabet");
  int prev = 0;
  for (int l : levels) {
    if (l < 1 || l <= prev)
      throw std::invalid_argument("phoc: levels must be strictly increasing and >= 1");
    prev = l;
  }
  if (levels.empty()) throw std::invalid_argument("phoc: no levels");
}

Lexicon build_lexicon(const std::vector<std::string>& tokens, PriorMode mode,
                      double zipf_s, std::string_view alphabet) {
  if (tokens.empty()) throw std::invalid_argument("build_lexicon: empty token list");

  std::map<std::string, std::int64_t> counts;
  for (const auto& t : tokens) {
    if (t.empty()) throw std::invalid_argument("build_lexicon: empty token");
    for (char c : t) {
      if (alphabet.find(c) == std::string_view::npos)
        throw std::invalid_argument("build_lexicon: token '" + t +
                                    "' contains a character outside the alphabet");
    }
    ++counts[t];
  }

  Lexicon lex;
  lex.words.reserve(counts.size());
  lex.counts.reserve(counts.size());
  for (const auto& [w, c] : counts) {  // map iteration is lexicographic
    lex.words.push_back(w);
    lex.counts.push_back(c);
  }

  const std::size_t n = lex.words.size();
  lex.prior.assign(n, 0.0);
  switch (mode) {
    case PriorMode::Empirical: {
      const double total = static_cast<double>(
          std::accumulate(lex.counts.begin(), lex.counts.end(), std::int64_t{0}));
      for (std::size_t i = 0; i < n; ++i)
        lex.prior[i] = static_cast<double>(lex.counts[i]) / total;
      break;
    }
    case PriorMode::Uniform: {
      std::fill(lex.prior.begin(), lex.prior.end(), 1.0 / static_cast<double>(n));
      break;
    }
    case PriorMode::Zipf: {
      // rank 1 = highest count; ties broken lexicographically
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (lex.counts[i] != lex.counts[j]) return lex.counts[i] > lex.counts[j];
        return lex.words[i] < lex.words[j];
      });
      double norm = 0.0;
      std::vector<double> weight(n);
      for (std::size_t r = 0; r < n; ++r) {
        weight[order[r]] = std::pow(static_cast<double>(r + 1), -zipf_s);
        norm += weight[order[r]];
      }
      for (std::size_t i = 0; i < n; ++i) lex.prior[i] = weight[i] / norm;
      break;
    }
  }
  return lex;
}

int levenshtein(std::string_view a, std::string_view b) {
  const std::size_t m = a.size(), n = b.size();
  if (m == 0) return static_cast<int>(n);
  if (n == 0) return static_cast<int>(m);

  std::vector<int> prev(n + 1), cur(n + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

PhocVector phoc_encode(std::string_view word, const PhocConfig& cfg) {
  cfg.validate();
  if (word.empty()) throw std::invalid_argument("phoc_encode: empty word");

  const int na = static_cast<int>(cfg.alphabet.size());
  const int n = static_cast<int>(word.size());

  std::vector<int> char_idx(word.size());
  for (std::size_t i = 0; i < word.size(); ++i) {
    const auto pos = cfg.alphabet.find(word[i]);
    if (pos == std::string::npos)
      throw std::invalid_argument("phoc_encode: character outside alphabet");
    char_idx[i] = static_cast<int>(pos);
  }

  PhocVector out;
  out.bits.assign(static_cast<std::size_t>(cfg.dim()), 0);
  std::size_t offset = 0;
  for (int level : cfg.levels) {
    for (int r = 0; r < level; ++r) {
      for (int i = 0; i < n; ++i) {
        // Work in units of 1/(n*level): char i spans [i*level, (i+1)*level),
        // region r spans [r*n, (r+1)*n); char width is `level` units.
        const long lo = std::max<long>(static_cast<long>(i) * level,
                                       static_cast<long>(r) * n);
        const long hi = std::min<long>(static_cast<long>(i + 1) * level,
                                       static_cast<long>(r + 1) * n);
        const long overlap = hi - lo;
        if (2 * overlap > level) {
          out.bits[offset + static_cast<std::size_t>(r) * na + char_idx[i]] = 1;
        }
      }
    }
    offset += static_cast<std::size_t>(level) * na;
  }
  return out;
}

nlohmann::json lexicon_to_json(const Lexicon& lex) {
  return {{"words", lex.words}, {"counts", lex.counts}, {"prior", lex.prior}};
}

Lexicon lexicon_from_json(const nlohmann::json& j) {
  Lexicon lex;
  j.at("words").get_to(lex.words);
  j.at("counts").get_to(lex.counts);
  j.at("prior").get_to(lex.prior);
  if (lex.words.size() != lex.counts.size() || lex.words.size() != lex.prior.size())
    throw std::invalid_argument("lexicon json: misaligned arrays");
  return lex;
}

}  // namespace otalign
