#include "otalign/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace otalign {

namespace {

constexpr char kMagic[4] = {'O', 'T', 'H', 'R'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64_le(std::ofstream& out, std::span<const double> xs) {
  static_assert(std::endian::native == std::endian::little,
                "big-endian hosts need byte swaps here");
  out.write(reinterpret_cast<const char*>(xs.data()),
            static_cast<std::streamsize>(xs.size() * sizeof(double)));
}

std::size_t shape_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

const LoadedArray& ParamFile::get(std::string_view name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw std::runtime_error("param file: missing array " + std::string(name));
}

void write_param_file(const std::filesystem::path& path,
                      std::span<const NamedArray> arrays,
                      const nlohmann::json& meta) {
  nlohmann::json header;
  header["meta"] = meta;
  header["arrays"] = nlohmann::json::array();
  for (const auto& a : arrays) {
    if (a.data.size() != shape_count(a.shape))
      throw std::invalid_argument("write_param_file: shape/data mismatch for " + a.name);
    header["arrays"].push_back({{"name", a.name}, {"shape", a.shape}});
  }
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(hs.size()));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& a : arrays) put_f64_le(out, a.data);
  if (!out) throw std::runtime_error("short write to " + path.string());
}

ParamFile read_param_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad magic in " + path.string());
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported param file version");
  const std::uint32_t hlen = get_u32(in);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  const nlohmann::json header = nlohmann::json::parse(hs);

  ParamFile pf;
  pf.meta = header.value("meta", nlohmann::json::object());
  for (const auto& spec : header.at("arrays")) {
    LoadedArray a;
    a.name = spec.at("name").get<std::string>();
    spec.at("shape").get_to(a.shape);
    a.data.resize(shape_count(a.shape));
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated param file " + path.string());
    pf.arrays.push_back(std::move(a));
  }
  return pf;
}

}  // namespace otalign
