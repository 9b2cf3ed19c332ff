#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "scagan/autograd.hpp"
#include "scagan/data.hpp"

namespace scagan {

struct DataConfig {
  int height = 64;
  int width = 48;
  double heatmap_sigma = 0.0;  // <= 0 selects default_heatmap_sigma(height)
  XdogParams xdog;
  bool strict = false;
  std::filesystem::path cache_dir;   // optional precomputed edges/heatmaps
  std::filesystem::path labels_dir;  // optional label maps for semantic content
  int semantic_channels = 8;

  double resolved_sigma() const { return heatmap_sigma > 0.0 ? heatmap_sigma : default_heatmap_sigma(height); }
};

struct TrainingPair {
  std::string id;
  ImageMap source_image;  // I_s
  ImageMap target_image;  // I_t
  PoseHeatmap source_pose;
  PoseHeatmap target_pose;
  EdgeMap source_edge;  // E_s
  EdgeMap target_edge;  // E_t, Phase-1 supervision
  std::optional<Tensor> target_labels;  // K x H x W one-hot, semantic-content ablation only
};

/// Source/target images at any resolution plus keypoints in that image's pixel frame.
TrainingPair make_training_pair(std::string id, const ImageU8& source, const ImageU8& target,
                                const Keypoints& source_kp, const Keypoints& target_kp,
                                const DataConfig& config);

/// Parses a bracketed integer list such as "[12, -1, 40]".
std::vector<int> parse_int_list(std::string_view text);

struct KeypointTable {
  std::map<std::string, Keypoints> records;
  std::vector<std::string> rejects;  // "line N: reason"
};

/// CSV with header `name,keypoints_y,keypoints_x`; coordinates are bracketed
/// integer lists of 18 entries, -1 marks an invisible joint. A header written
/// with ':' separators is also accepted.
KeypointTable load_keypoints_csv(const std::filesystem::path& path);

struct PairDescriptor {
  std::string from;
  std::string to;
  std::filesystem::path from_path;
  std::filesystem::path to_path;
  Keypoints from_keypoints;
  Keypoints to_keypoints;

  std::string id() const;
};

struct PairIndex {
  std::vector<PairDescriptor> pairs;
  std::vector<std::string> skipped;  // one diagnostic per skipped manifest row
  std::vector<std::string> keypoint_rejects;
};

/// Reads a `from,to` manifest. Rows with a missing image or keypoint record are
/// skipped with a warning, or raise DataError when `strict` is set.
PairIndex load_pair_index(const std::filesystem::path& pairs_manifest,
                          const std::filesystem::path& image_dir,
                          const std::filesystem::path& keypoints_file, bool strict);

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  virtual TrainingPair get(std::size_t index) const = 0;
};

class InMemoryDataset final : public Dataset {
 public:
  explicit InMemoryDataset(std::vector<TrainingPair> pairs) : pairs_(std::move(pairs)) {}
  std::size_t size() const override { return pairs_.size(); }
  TrainingPair get(std::size_t index) const override { return pairs_.at(index); }

 private:
  std::vector<TrainingPair> pairs_;
};

/// Resolves descriptors to TrainingPairs on demand, reading cached edge and
/// heatmap tensors from `config.cache_dir` when present.
class FileDataset final : public Dataset {
 public:
  FileDataset(PairIndex index, DataConfig config);
  std::size_t size() const override { return index_.pairs.size(); }
  TrainingPair get(std::size_t index) const override;
  const PairIndex& index() const noexcept { return index_; }

 private:
  PairIndex index_;
  DataConfig config_;
};

// Cache layout used by `scagan prepare` and FileDataset.
std::filesystem::path edge_cache_path(const std::filesystem::path& cache_dir, const DataConfig& config,
                                      const std::string& image_name);
std::filesystem::path heatmap_cache_path(const std::filesystem::path& cache_dir,
                                         const DataConfig& config, const std::string& image_name,
                                         const Keypoints& kp);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

/// Uniform Fisher-Yates permutation of 0..n-1 with rejection-sampled indices,
/// so the sequence depends only on the generator state.
std::vector<std::size_t> permutation(std::size_t n, std::mt19937_64& rng);

/// Index batches for one epoch; the final short batch is kept.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    bool shuffle, std::mt19937_64& rng);

class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, std::size_t batch_size, bool shuffle, std::uint64_t seed);
  /// Next batch of the current epoch, or nullopt once the epoch is exhausted.
  std::optional<std::vector<TrainingPair>> next();
  const std::vector<std::vector<std::size_t>>& plan() const noexcept { return batches_; }

 private:
  const Dataset& dataset_;
  std::vector<std::vector<std::size_t>> batches_;
  std::size_t cursor_ = 0;
};

/// Network-ready stacked tensors (N leading).
struct Batch {
  Var source_image, target_image;  // N x 3 x H x W
  Var source_pose, target_pose;    // N x 18 x H x W
  Var source_edge, target_edge;    // N x 1 x H x W
  Var target_labels;               // N x K x H x W or undefined
  std::vector<std::string> ids;

  int size() const { return source_image.dim(0); }
};

Batch collate(const std::vector<TrainingPair>& pairs);

}  // namespace scagan
