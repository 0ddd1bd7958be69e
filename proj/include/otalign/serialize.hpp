#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace otalign {

// Flat binary parameter file: magic "OTHR", u32 version, u32 header length,
// JSON header (array names/shapes plus free-form meta), then the raw
// little-endian f64 payloads in header order.
struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const double> data;
};

struct LoadedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

struct ParamFile {
  nlohmann::json meta;
  std::vector<LoadedArray> arrays;

  const LoadedArray& get(std::string_view name) const;
};

void write_param_file(const std::filesystem::path& path,
                      std::span<const NamedArray> arrays,
                      const nlohmann::json& meta);
ParamFile read_param_file(const std::filesystem::path& path);

}  // namespace otalign
