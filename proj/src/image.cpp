#include "otalign/image.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace otalign {

void write_pgm(const std::filesystem::path& path, const WordImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> buf(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    buf[i] = static_cast<std::uint8_t>(std::lround(img.pixels[i] * 255.0));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

WordImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0)
    throw std::runtime_error("unsupported pgm: " + path.string());
  in.get();  // single whitespace after header
  WordImage img;
  img.width = w;
  img.height = h;
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error("truncated pgm: " + path.string());
  img.pixels.resize(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i)
    img.pixels[i] = static_cast<double>(buf[i]) / 255.0;
  return img;
}

void quantize_u8(WordImage& img) {
  for (double& v : img.pixels)
    v = static_cast<double>(std::lround(v * 255.0)) / 255.0;
}

}  // namespace otalign
