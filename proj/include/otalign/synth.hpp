#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "otalign/image.hpp"
#include "otalign/rng.hpp"

namespace otalign {

struct CorpusSpec {
  std::vector<std::string> vocab;
  double zipf_s = 1.0;
  int n_tokens = 1;
  std::uint64_t seed = 0;
};

struct RenderSpec {
  double shear_max = 2.0;       // px of horizontal displacement at the extremes
  double offset_max = 2.0;      // px of vertical baseline offset
  double noise_sigma = 0.05;    // additive gaussian pixel noise, in [0, 0.1]
  bool thickness_jitter = true; // randomly thicken strokes by one pixel
  std::uint64_t seed = 0;
};

enum class Split { Train = 0, Val = 1, Test = 2 };

std::string to_string(Split s);
Split split_from_string(std::string_view s);

struct DatasetItem {
  int id = 0;
  Split split = Split::Train;
  WordImage image;  // image.truth carries the transcription
};

struct Dataset {
  std::vector<DatasetItem> items;  // ordered by id
  nlohmann::json manifest;

  std::vector<const DatasetItem*> split_items(Split s) const;
};

// Distinct words drawn uniformly over lengths [len_min, len_max].
std::vector<std::string> generate_vocab(int size, int len_min, int len_max,
                                        std::string_view alphabet, Rng rng);

// n_tokens i.i.d. draws; rank r (1-based, in vocab order) has probability
// proportional to r^(-zipf_s). zipf_s = 0 is uniform.
std::vector<std::string> sample_corpus(const CorpusSpec& spec);

// 8x8 stroke-combination bitmap for 'a'..'z'; throws for anything else.
std::array<std::uint8_t, 8> glyph_rows(char c);

// Glyph bitmaps concatenated with 1-px gaps, jittered, scaled into the
// 32x128 canvas (aspect preserved, background 0), then noised.
WordImage render_word(const std::string& word, const RenderSpec& spec,
                      std::uint64_t instance_seed);

// One image per token; split sizes by largest remainder, assignment by a
// seeded hash order over ids. Images are quantized to the on-disk 8-bit grid.
Dataset gen_dataset(const CorpusSpec& corpus, const RenderSpec& render,
                    std::array<double, 3> fractions, std::uint64_t split_seed);

// Directory layout: manifest.json, labels.tsv (id, split, truth),
// images/NNNNNN.pgm. Refuses to overwrite unless force is set.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir, bool force);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace otalign
