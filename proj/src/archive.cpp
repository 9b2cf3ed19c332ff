#include "scagan/archive.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace scagan {
namespace {

constexpr char kMagic[8] = {'S', 'C', 'A', 'G', 'A', 'N', 'A', 'R'};
static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian");

}  // namespace

void Archive::put(std::string name, Tensor t) {
  for (auto& [n, existing] : tensors_) {
    if (n == name) {
      existing = std::move(t);
      return;
    }
  }
  tensors_.emplace_back(std::move(name), std::move(t));
}

const Tensor* Archive::find(std::string_view name) const {
  for (const auto& [n, t] : tensors_) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor& Archive::get(std::string_view name) const {
  if (const Tensor* t = find(name)) return *t;
  throw ArchiveError("archive has no tensor named '" + std::string(name) + "'");
}

void Archive::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors_) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  const std::string text = header.dump();
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArchiveError("cannot open '" + tmp.string() + "' for writing");
    const std::uint64_t len = text.size();
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : tensors_) {
      out.write(reinterpret_cast<const char*>(t.ptr()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw ArchiveError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open archive '" + path.string() + "'");
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ArchiveError("'" + path.string() + "' is not a scagan archive");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ArchiveError("truncated archive header in '" + path.string() + "'");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError("corrupt archive header in '" + path.string() + "': " + e.what());
  }
  Archive ar;
  ar.meta = header.value("meta", nlohmann::json::object());
  const auto payload_start = in.tellg();
  for (const auto& entry : header.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    Tensor t(shape);
    const auto offset = entry.at("offset").get<std::uint64_t>();
    in.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(double)));
    in.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw ArchiveError("truncated tensor payload in '" + path.string() + "'");
    ar.tensors_.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return ar;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace scagan
