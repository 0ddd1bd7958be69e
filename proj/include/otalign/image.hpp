#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace otalign {

inline constexpr int kCanonicalHeight = 32;
inline constexpr int kCanonicalWidth = 128;

// Grayscale word image, intensities in [0,1], ink bright on dark background.
// `truth` is carried for evaluation and seed labeling only; training code
// paths receive labels explicitly and never read it.
struct WordImage {
  int height = kCanonicalHeight;
  int width = kCanonicalWidth;
  std::vector<double> pixels;  // row-major
  std::string truth;

  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
  double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
};

// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const WordImage& img);
WordImage read_pgm(const std::filesystem::path& path);

// Snap intensities to the 8-bit grid used on disk, so in-memory datasets
// and reloaded ones are bit-identical.
void quantize_u8(WordImage& img);

}  // namespace otalign
