#pragma once

// Binary container for named float32 tensors with a JSON header.
//
// Layout (little-endian):
//   8 bytes   magic "MASKARCH"
//   u32       format version
//   u64       header length in bytes
//   header    UTF-8 JSON: {"meta": {...}, "tensors": [{"name", "shape", "offset"}]}
//   payload   raw float32 values; `offset` counts floats from the payload start

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskanim/tensor.hpp"

namespace maskanim {

inline constexpr std::uint32_t kArchiveVersion = 1;

struct TensorArchive {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  /// Throws IoError when `name` is absent.
  [[nodiscard]] const Tensor& get(const std::string& name) const;
  [[nodiscard]] bool contains(const std::string& name) const;
};

/// Writes atomically: data goes to a sibling temporary file that is renamed
/// over `path` once complete. Throws IoError.
void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
/// Throws IoError for unreadable, truncated or foreign files.
[[nodiscard]] TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace maskanim
