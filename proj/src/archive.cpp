#include "maskanim/archive.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

#include "maskanim/errors.hpp"

namespace maskanim {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'A', 'S', 'K', 'A', 'R', 'C', 'H'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw IoError(path.string() + ": truncated archive header");
  }
  return value;
}

}  // namespace

const Tensor& TensorArchive::get(const std::string& name) const {
  for (const auto& [key, tensor] : tensors) {
    if (key == name) return tensor;
  }
  throw IoError("archive has no tensor named '" + name + "'");
}

bool TensorArchive::contains(const std::string& name) const {
  return std::any_of(tensors.begin(), tensors.end(),
                     [&](const auto& entry) { return entry.first == name; });
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    const Shape& s = t.shape();
    header["tensors"].push_back({{"name", name}, {"shape", {s.n, s.c, s.h, s.w}}, {"offset", offset}});
    offset += t.numel();
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string() + ": cannot open for writing");
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kArchiveVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& entry : archive.tensors) {
      const Tensor& t = entry.second;
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    if (!out) throw IoError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path.string() + ": " + ec.message());
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError(path.string() + ": not a tensor archive");
  }
  const auto version = take<std::uint32_t>(in, path);
  if (version != kArchiveVersion) {
    throw IoError(path.string() + ": unsupported archive version " + std::to_string(version));
  }
  const auto length = take<std::uint64_t>(in, path);
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
    throw IoError(path.string() + ": truncated archive header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed archive header: " + e.what());
  }
  const std::streampos payload = in.tellg();

  TensorArchive archive;
  archive.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    const auto dims = entry.at("shape").get<std::vector<int>>();
    if (dims.size() != 4) throw IoError(path.string() + ": tensor shape must have 4 axes");
    Tensor t(Shape{dims[0], dims[1], dims[2], dims[3]});
    const auto offset = entry.at("offset").get<std::uint64_t>();
    in.seekg(payload + static_cast<std::streamoff>(offset * sizeof(float)));
    if (!in.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(float)))) {
      throw IoError(path.string() + ": truncated payload for '" +
                    entry.at("name").get<std::string>() + "'");
    }
    archive.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return archive;
}

}  // namespace maskanim
