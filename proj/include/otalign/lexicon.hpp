#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace otalign {

inline constexpr std::string_view kDefaultAlphabet = "abcdefghijklmnopqrstuvwxyz";

enum class PriorMode { Empirical, Uniform, Zipf };

PriorMode prior_mode_from_string(std::string_view s);
std::string to_string(PriorMode mode);

// Vocabulary with per-word counts and a probability prior over words.
// Words are unique, nonempty and sorted lexicographically so that indices
// are stable across runs.
struct Lexicon {
  std::vector<std::string> words;
  std::vector<std::int64_t> counts;
  std::vector<double> prior;

  // index of w in words, or -1
  int index_of(std::string_view w) const;
  std::size_t size() const { return words.size(); }
};

struct PhocConfig {
  std::string alphabet{kDefaultAlphabet};
  std::vector<int> levels = {1, 2, 3, 4};

  int dim() const;
  void validate() const;  // throws std::invalid_argument
};

// Binary pyramidal character-occupancy vector, laid out level-major:
// for each level L, for each region r in [0, L), one bit per alphabet char.
struct PhocVector {
  std::vector<std::uint8_t> bits;
  std::size_t size() const { return bits.size(); }
};

// mode == Zipf ranks words by descending count (lexicographic tie-break)
// and assigns rank^(-zipf_s) weights before normalizing.
Lexicon build_lexicon(const std::vector<std::string>& tokens, PriorMode mode,
                      double zipf_s = 1.0,
                      std::string_view alphabet = kDefaultAlphabet);

int levenshtein(std::string_view a, std::string_view b);

// A character belongs to a region iff the overlap of their normalized
// intervals strictly exceeds half the character's width. Computed in exact
// integer arithmetic so boundary ties are never subject to rounding.
PhocVector phoc_encode(std::string_view word, const PhocConfig& cfg);

nlohmann::json lexicon_to_json(const Lexicon& lex);
Lexicon lexicon_from_json(const nlohmann::json& j);

}  // namespace otalign
