#include "maskanim/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "maskanim/errors.hpp"

namespace maskanim {

Tensor read_png_tensor(const std::filesystem::path& path, int channels) {
  if (channels != 1 && channels != 3) throw std::invalid_argument("read_png: channels must be 1 or 3");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr) == 0) {
    const std::string message = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + message);
  }
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  Tensor out(Shape{1, channels, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const std::size_t idx = (static_cast<std::size_t>(y) * w + x) * channels + c;
        out.at(0, c, y, x) = static_cast<float>(buffer[idx]) / 255.0f;
      }
  return out;
}

Frame read_frame_png(const std::filesystem::path& path) {
  Tensor t = read_png_tensor(path, 3);
  if (t.h() != t.w()) throw IoError("frame " + path.string() + " is not square");
  return Frame(std::move(t));
}

Mask read_mask_png(const std::filesystem::path& path) {
  Tensor t = read_png_tensor(path, 1);
  if (t.h() != t.w()) throw IoError("mask " + path.string() + " is not square");
  return Mask(std::move(t));
}

void write_png(const std::filesystem::path& path, const Tensor& t) {
  const int channels = t.c();
  if (t.n() != 1 || (channels != 1 && channels != 3)) {
    throw std::invalid_argument("write_png: expected (1, 1|3, H, W), got " + t.shape().str());
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const int h = t.h();
  const int w = t.w();
  std::vector<png_byte> buffer(static_cast<std::size_t>(h) * w * channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const float v = std::clamp(t.at(0, c, y, x), 0.0f, 1.0f);
        buffer[(static_cast<std::size_t>(y) * w + x) * channels + c] =
            static_cast<png_byte>(std::lround(v * 255.0f));
      }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr) == 0) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

}  // namespace maskanim
