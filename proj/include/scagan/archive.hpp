#pragma once

// Single-file tensor archive used for checkpoints and extractor weights.
//
// Layout (all integers little-endian):
//   bytes 0..7   magic "SCAGANAR"
//   bytes 8..15  uint64 length L of the JSON header
//   next L bytes UTF-8 JSON: {"meta": {...}, "tensors": [{"name", "shape", "offset"}]}
//   remainder    float64 payload; "offset" counts doubles from the payload start

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "scagan/tensor.hpp"

namespace scagan {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Archive {
 public:
  nlohmann::json meta = nlohmann::json::object();

  void put(std::string name, Tensor t);
  const Tensor& get(std::string_view name) const;  // throws ArchiveError if absent
  const Tensor* find(std::string_view name) const;
  const std::vector<std::pair<std::string, Tensor>>& tensors() const noexcept { return tensors_; }

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, Tensor>> tensors_;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace scagan
