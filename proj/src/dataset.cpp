#include "scagan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "scagan/archive.hpp"
#include "scagan/log.hpp"

namespace scagan {
namespace fs = std::filesystem;
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits on `delim` outside of double quotes and square brackets.
std::vector<std::string> split_fields(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  int depth = 0;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      continue;
    }
    if (!quoted) {
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == delim && depth == 0) {
        out.push_back(trim(cur));
        cur.clear();
        continue;
      }
    }
    cur.push_back(c);
  }
  out.push_back(trim(cur));
  return out;
}

std::ifstream open_text(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("cannot open ") + what + " '" + path.string() + "'");
  return in;
}

Tensor one_hot_labels(const ImageU8& labels, int height, int width, int classes) {
  Tensor t({classes, height, width});
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(labels.height - 1, y * labels.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(labels.width - 1, x * labels.width / width);
      const int cls = labels.at(sy, sx, 0);
      if (cls >= classes) {
        throw DataError("label value " + std::to_string(cls) + " exceeds semantic_channels");
      }
      t[(static_cast<std::size_t>(cls) * height + y) * width + x] = 1.0;
    }
  }
  return t;
}

}  // namespace

TrainingPair make_training_pair(std::string id, const ImageU8& source, const ImageU8& target,
                                const Keypoints& source_kp, const Keypoints& target_kp,
                                const DataConfig& config) {
  const int h = config.height, w = config.width;
  TrainingPair pair;
  pair.id = std::move(id);
  pair.source_image = normalize_image(resize_bilinear(source, h, w));
  pair.target_image = normalize_image(resize_bilinear(target, h, w));
  const double sigma = config.resolved_sigma();
  pair.source_pose =
      rasterize_pose_heatmap(source_kp.rescaled(source.height, source.width, h, w), h, w, sigma);
  pair.target_pose =
      rasterize_pose_heatmap(target_kp.rescaled(target.height, target.width, h, w), h, w, sigma);
  // Edges are computed after resizing.
  pair.source_edge = xdog_edge(rgb_to_luminance(pair.source_image), config.xdog);
  pair.target_edge = xdog_edge(rgb_to_luminance(pair.target_image), config.xdog);
  return pair;
}

std::vector<int> parse_int_list(std::string_view text) {
  std::string s = trim(text);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
    throw DataError("expected a bracketed list, got '" + s + "'");
  }
  std::vector<int> out;
  std::string_view body(s.data() + 1, s.size() - 2);
  if (trim(body).empty()) return out;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const auto comma = body.find(',', pos);
    const std::string item = trim(body.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    int v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size() || item.empty()) {
      throw DataError("non-integer list entry '" + item + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

KeypointTable load_keypoints_csv(const fs::path& path) {
  std::ifstream in = open_text(path, "keypoints file");
  std::string header;
  if (!std::getline(in, header)) throw DataError("keypoints file '" + path.string() + "' is empty");
  const char delim = header.find(',') == std::string::npos && header.find(':') != std::string::npos ? ':' : ',';
  const auto cols = split_fields(header, delim);
  if (cols.size() != 3 || cols[0] != "name" || cols[1] != "keypoints_y" || cols[2] != "keypoints_x") {
    throw DataError("keypoints file '" + path.string() +
                    "' must have header name,keypoints_y,keypoints_x");
  }
  KeypointTable table;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, delim);
    try {
      if (fields.size() != 3) throw DataError("expected 3 fields");
      const auto ys = parse_int_list(fields[1]);
      const auto xs = parse_int_list(fields[2]);
      if (ys.size() != kNumJoints || xs.size() != kNumJoints) {
        throw DataError("expected " + std::to_string(kNumJoints) + " joints, got " +
                        std::to_string(ys.size()) + "/" + std::to_string(xs.size()));
      }
      Keypoints kp;
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        const bool visible = ys[j] != -1 && xs[j] != -1;
        kp.joints[j] = Joint{static_cast<double>(xs[j]), static_cast<double>(ys[j]), visible};
      }
      table.records[fields[0]] = kp;
    } catch (const DataError& e) {
      table.rejects.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

std::string PairDescriptor::id() const {
  return fs::path(from).stem().string() + "___" + fs::path(to).stem().string();
}

PairIndex load_pair_index(const fs::path& pairs_manifest, const fs::path& image_dir,
                          const fs::path& keypoints_file, bool strict) {
  const KeypointTable kp = load_keypoints_csv(keypoints_file);
  PairIndex index;
  index.keypoint_rejects = kp.rejects;
  std::ifstream in = open_text(pairs_manifest, "pairs manifest");
  std::string header;
  if (!std::getline(in, header)) throw DataError("pairs manifest is empty");
  const auto cols = split_fields(header, ',');
  if (cols.size() != 2 || cols[0] != "from" || cols[1] != "to") {
    throw DataError("pairs manifest '" + pairs_manifest.string() + "' must have header from,to");
  }
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, ',');
    std::string problem;
    PairDescriptor d;
    if (fields.size() != 2) {
      problem = "expected 2 fields";
    } else {
      d.from = fields[0];
      d.to = fields[1];
      d.from_path = image_dir / d.from;
      d.to_path = image_dir / d.to;
      for (const auto& [name, p] : {std::pair{d.from, d.from_path}, std::pair{d.to, d.to_path}}) {
        if (!problem.empty()) break;
        if (!fs::exists(p)) problem = "missing image '" + p.string() + "'";
        else if (!kp.records.count(name)) problem = "no keypoint record for '" + name + "'";
      }
    }
    if (!problem.empty()) {
      const std::string msg = pairs_manifest.filename().string() + " line " + std::to_string(lineno) + ": " + problem;
      if (strict) throw DataError(msg);
      log_warning("skipping pair, " + msg);
      index.skipped.push_back(msg);
      continue;
    }
    d.from_keypoints = kp.records.at(d.from);
    d.to_keypoints = kp.records.at(d.to);
    index.pairs.push_back(std::move(d));
  }
  return index;
}

fs::path edge_cache_path(const fs::path& cache_dir, const DataConfig& config, const std::string& image_name) {
  const std::string key = "xdog_" + hex64(config.xdog.hash()) + "_" + std::to_string(config.height) + "x" +
                          std::to_string(config.width);
  return cache_dir / "edges" / key / (fs::path(image_name).stem().string() + ".tensor");
}

fs::path heatmap_cache_path(const fs::path& cache_dir, const DataConfig& config, const std::string& image_name,
                            const Keypoints& kp) {
  std::ostringstream os;
  os.precision(17);
  os << "heatmap:" << config.resolved_sigma() << ',' << config.height << ',' << config.width;
  const std::string key = "pose_" + hex64(fnv1a64(os.str()));
  return cache_dir / "heatmaps" / key /
         (fs::path(image_name).stem().string() + "_" + hex64(kp.hash()) + ".tensor");
}

void save_tensor(const fs::path& path, const Tensor& t) {
  Archive ar;
  ar.put("data", t);
  fs::create_directories(path.parent_path());
  ar.save(path);
}

Tensor load_tensor(const fs::path& path) { return Archive::load(path).get("data"); }

FileDataset::FileDataset(PairIndex index, DataConfig config)
    : index_(std::move(index)), config_(std::move(config)) {}

TrainingPair FileDataset::get(std::size_t i) const {
  const PairDescriptor& d = index_.pairs.at(i);
  const ImageU8 src = read_image(d.from_path, 3);
  const ImageU8 tgt = read_image(d.to_path, 3);
  const int h = config_.height, w = config_.width;
  const bool cached = !config_.cache_dir.empty() && fs::exists(edge_cache_path(config_.cache_dir, config_, d.from)) &&
                      fs::exists(edge_cache_path(config_.cache_dir, config_, d.to)) &&
                      fs::exists(heatmap_cache_path(config_.cache_dir, config_, d.from, d.from_keypoints)) &&
                      fs::exists(heatmap_cache_path(config_.cache_dir, config_, d.to, d.to_keypoints));
  TrainingPair pair;
  if (cached) {
    pair.id = d.id();
    pair.source_image = normalize_image(resize_bilinear(src, h, w));
    pair.target_image = normalize_image(resize_bilinear(tgt, h, w));
    pair.source_edge = EdgeMap{load_tensor(edge_cache_path(config_.cache_dir, config_, d.from))};
    pair.target_edge = EdgeMap{load_tensor(edge_cache_path(config_.cache_dir, config_, d.to))};
    const double sigma = config_.resolved_sigma();
    pair.source_pose = PoseHeatmap{load_tensor(heatmap_cache_path(config_.cache_dir, config_, d.from, d.from_keypoints)), sigma};
    pair.target_pose = PoseHeatmap{load_tensor(heatmap_cache_path(config_.cache_dir, config_, d.to, d.to_keypoints)), sigma};
  } else {
    pair = make_training_pair(d.id(), src, tgt, d.from_keypoints, d.to_keypoints, config_);
  }
  if (!config_.labels_dir.empty()) {
    const fs::path label_path = config_.labels_dir / (fs::path(d.to).stem().string() + ".png");
    pair.target_labels = one_hot_labels(read_image(label_path, 1), h, w, config_.semantic_channels);
  }
  return pair;
}

std::vector<std::size_t> permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(p[i - 1], p[static_cast<std::size_t>(r % bound)]);
  }
  return p;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                    std::mt19937_64& rng) {
  if (n == 0) throw DataError("batch iterator over an empty dataset");
  if (batch_size == 0) throw DataError("batch size must be >= 1");
  std::vector<std::size_t> order;
  if (shuffle) {
    order = permutation(n, rng);
  } else {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

BatchIterator::BatchIterator(const Dataset& dataset, std::size_t batch_size, bool shuffle, std::uint64_t seed)
    : dataset_(dataset) {
  std::mt19937_64 rng(seed);
  batches_ = epoch_batches(dataset.size(), batch_size, shuffle, rng);
}

std::optional<std::vector<TrainingPair>> BatchIterator::next() {
  if (cursor_ >= batches_.size()) return std::nullopt;
  std::vector<TrainingPair> out;
  for (std::size_t i : batches_[cursor_]) out.push_back(dataset_.get(i));
  ++cursor_;
  return out;
}

namespace {

Var stack(const std::vector<const Tensor*>& items) {
  const Shape& s = items.front()->shape();
  Tensor out({static_cast<int>(items.size()), s[0], s[1], s[2]});
  const std::size_t chunk = items.front()->size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i]->shape() != s) throw ShapeError("collate: inconsistent pair shapes");
    std::copy(items[i]->ptr(), items[i]->ptr() + chunk, out.ptr() + i * chunk);
  }
  return Var(std::move(out));
}

}  // namespace

Batch collate(const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) throw DataError("collate: empty batch");
  auto gather = [&](auto member) {
    std::vector<const Tensor*> items;
    for (const auto& p : pairs) items.push_back(&member(p));
    return stack(items);
  };
  Batch b;
  b.source_image = gather([](const TrainingPair& p) -> const Tensor& { return p.source_image.pixels; });
  b.target_image = gather([](const TrainingPair& p) -> const Tensor& { return p.target_image.pixels; });
  b.source_pose = gather([](const TrainingPair& p) -> const Tensor& { return p.source_pose.channels; });
  b.target_pose = gather([](const TrainingPair& p) -> const Tensor& { return p.target_pose.channels; });
  b.source_edge = gather([](const TrainingPair& p) -> const Tensor& { return p.source_edge.values; });
  b.target_edge = gather([](const TrainingPair& p) -> const Tensor& { return p.target_edge.values; });
  if (pairs.front().target_labels) {
    std::vector<const Tensor*> items;
    for (const auto& p : pairs) {
      if (!p.target_labels) throw DataError("collate: label maps missing for some pairs");
      items.push_back(&*p.target_labels);
    }
    b.target_labels = stack(items);
  }
  for (const auto& p : pairs) b.ids.push_back(p.id);
  const Shape& s = b.source_image.shape();
  for (const Var* v : {&b.target_image, &b.source_pose, &b.target_pose, &b.source_edge, &b.target_edge}) {
    if (v->dim(2) != s[2] || v->dim(3) != s[3]) throw ShapeError("collate: spatial dims differ within a pair");
  }
  return b;
}

}  // namespace scagan
