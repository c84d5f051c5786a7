#pragma once

#include <filesystem>

#include "maskanim/core.hpp"

namespace maskanim {

// 8-bit PNG I/O. Reading maps byte b to b / 255; writing rounds v * 255.
// Failures throw IoError naming the file.

[[nodiscard]] Frame read_frame_png(const std::filesystem::path& path);
[[nodiscard]] Mask read_mask_png(const std::filesystem::path& path);
/// Any (1, C, H, W) tensor with C in {1, 3}; values are clamped to [0, 1].
[[nodiscard]] Tensor read_png_tensor(const std::filesystem::path& path, int channels);

void write_png(const std::filesystem::path& path, const Tensor& image);
inline void write_png(const std::filesystem::path& path, const Frame& f) { write_png(path, f.tensor()); }
inline void write_png(const std::filesystem::path& path, const Mask& m) { write_png(path, m.tensor()); }

}  // namespace maskanim
