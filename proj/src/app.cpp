#include "scagan/app.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>

#include "scagan/image.hpp"
#include "scagan/is_net.hpp"
#include "scagan/log.hpp"
#include "scagan/pct_net.hpp"
#include "scagan/synthetic.hpp"
#include "scagan/version.hpp"

namespace scagan::app {
namespace {

namespace fs = std::filesystem;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool up_to_date(const fs::path& cached, const fs::path& input) {
  return fs::exists(cached) && fs::last_write_time(cached) >= fs::last_write_time(input);
}

ImageMap first_image(const Tensor& batch) {
  return ImageMap{batch.reshaped({batch.dim(1), batch.dim(2), batch.dim(3)})};
}

}  // namespace

nlohmann::json make_manifest(const Invocation& inv, const RunConfig* config, std::uint64_t seed,
                             const nlohmann::json& extra) {
  nlohmann::json m;
  m["command"] = inv.command;
  m["args"] = inv.args;
  m["seed"] = seed;
  m["source_hash"] = kSourceHash;
  m["created"] = utc_now();
  if (config) {
    m["config"] = config->to_json();
    m["config_ini"] = format_config(*config);
    m["ablation"] = config->ablation;
  }
  for (const auto& [k, v] : extra.items()) m[k] = v;
  return m;
}

fs::path write_manifest(const fs::path& dir, const std::string& name, const nlohmann::json& manifest) {
  fs::create_directories(dir);
  const fs::path path = dir / ("manifest_" + name + ".json");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  return path;
}

PrepareReport cmd_prepare(const RunConfig& config, const Invocation& inv) {
  const DataConfig& dc = config.data;
  if (dc.cache_dir.empty()) throw ConfigError("prepare: [data] cache is not set");
  if (config.paths.keypoints.empty() || config.paths.images.empty()) {
    throw ConfigError("prepare: [data] images and keypoints are required");
  }
  const KeypointTable table = load_keypoints_csv(config.paths.keypoints);
  PrepareReport r;
  std::vector<std::string> rejects = table.rejects;
  const double sigma = dc.resolved_sigma();
  for (const auto& [name, kp] : table.records) {
    const fs::path image_path = config.paths.images / name;
    if (!fs::exists(image_path)) {
      rejects.push_back(name + ": image not found in " + config.paths.images.string());
      continue;
    }
    ++r.images;
    const fs::path edge_path = edge_cache_path(dc.cache_dir, dc, name);
    const fs::path heat_path = heatmap_cache_path(dc.cache_dir, dc, name, kp);
    const bool edge_ok = up_to_date(edge_path, image_path);
    const bool heat_ok = up_to_date(heat_path, config.paths.keypoints) && up_to_date(heat_path, image_path);
    r.up_to_date += static_cast<std::size_t>(edge_ok) + static_cast<std::size_t>(heat_ok);
    if (edge_ok && heat_ok) continue;
    const ImageU8 raw = read_image(image_path, 3);
    try {
      if (!heat_ok) {
        const Keypoints scaled = kp.rescaled(raw.height, raw.width, dc.height, dc.width);
        const PoseHeatmap hm = rasterize_pose_heatmap(scaled, dc.height, dc.width, sigma);
        fs::create_directories(heat_path.parent_path());
        save_tensor(heat_path, hm.channels);
        ++r.heatmaps_written;
      }
    } catch (const DataError& e) {
      rejects.push_back(name + ": " + e.what());
      continue;
    }
    if (!edge_ok) {
      const ImageMap img = normalize_image(resize_bilinear(raw, dc.height, dc.width));
      fs::create_directories(edge_path.parent_path());
      save_tensor(edge_path, xdog_edge(rgb_to_luminance(img), dc.xdog).values);
      ++r.edges_written;
    }
  }
  r.rejects = rejects.size();
  r.rejects_file = dc.cache_dir / "rejects.txt";
  fs::create_directories(dc.cache_dir);
  {
    std::ofstream out(r.rejects_file);
    for (const auto& line : rejects) out << line << '\n';
  }
  r.manifest = write_manifest(dc.cache_dir, "prepare",
                              make_manifest(inv, &config, config.train.seed,
                                            {{"images", r.images},
                                             {"edges_written", r.edges_written},
                                             {"heatmaps_written", r.heatmaps_written},
                                             {"up_to_date", r.up_to_date},
                                             {"rejects", r.rejects}}));
  log_info("prepare: " + std::to_string(r.images) + " images, " + std::to_string(r.edges_written) + " edge and " +
           std::to_string(r.heatmaps_written) + " heatmap files written, " + std::to_string(r.up_to_date) +
           " up to date, " + std::to_string(r.rejects) + " rejects");
  return r;
}

namespace {

FileDataset open_dataset(const RunConfig& config) {
  if (config.paths.pairs.empty() || config.paths.images.empty() || config.paths.keypoints.empty()) {
    throw ConfigError("[data] pairs, images and keypoints are required");
  }
  PairIndex index = load_pair_index(config.paths.pairs, config.paths.images, config.paths.keypoints, config.data.strict);
  for (const auto& s : index.skipped) log_warning("skipped pair: " + s);
  return FileDataset(std::move(index), config.data);
}

}  // namespace

TrainReport cmd_train(const RunConfig& config, const TrainOptions& options, const Invocation& inv) {
  if (options.out_dir.empty()) throw ConfigError("train: no output directory");
  const FileDataset dataset = open_dataset(config);
  const auto extractor = make_extractor(config.features);
  RunOptions run;
  run.out_dir = options.out_dir;
  run.resume = options.resume;
  run.pct_checkpoint = options.pct_checkpoint;
  run.stop_after_epochs = options.stop_after_epochs;
  nlohmann::json extra = {{"phase", to_string(config.train.phase)},
                          {"extractor", extractor->provenance()},
                          {"pairs", dataset.size()},
                          {"resume", options.resume ? options.resume->string() : ""},
                          {"pct_checkpoint", options.pct_checkpoint ? options.pct_checkpoint->string() : ""}};
  const std::string name = "train_" + to_string(config.train.phase);
  TrainReport r;
  r.manifest = write_manifest(options.out_dir, name, make_manifest(inv, &config, config.train.seed, extra));
  r.summary = run_training(config.train, config.models, dataset, *extractor, run);
  extra["steps"] = r.summary.steps;
  extra["start_epoch"] = r.summary.start_epoch;
  extra["end_epoch"] = r.summary.end_epoch;
  nlohmann::json ckpts = nlohmann::json::array();
  for (const auto& c : r.summary.checkpoints) ckpts.push_back(c.string());
  extra["checkpoints"] = ckpts;
  extra["metrics_csv"] = r.summary.metrics_csv.string();
  write_manifest(options.out_dir, name, make_manifest(inv, &config, config.train.seed, extra));
  return r;
}

InferReport cmd_infer(const RunConfig& config, const InferOptions& options, const Invocation& inv) {
  if (options.out_dir.empty()) throw ConfigError("infer: no output directory");
  const ModelConfig& models = config.models;
  const bool needs_pct = models.is.content == ContentSource::PriorEdge;
  std::optional<ModelParams> pct;
  if (needs_pct) {
    if (!options.pct_checkpoint) throw TrainError("missing pct checkpoint: pass --pct-checkpoint");
    pct = load_generator(*options.pct_checkpoint, Phase::Pct, models);
  }
  if (options.is_checkpoint.empty()) throw TrainError("missing is checkpoint: pass --is-checkpoint");
  const ModelParams is = load_generator(options.is_checkpoint, Phase::Is, models);
  const FileDataset dataset = open_dataset(config);

  InferReport r;
  r.images_dir = options.out_dir / "images";
  r.edges_dir = options.out_dir / "edges";
  r.targets_dir = options.out_dir / "targets";
  r.index_csv = options.out_dir / "index.csv";
  fs::create_directories(r.images_dir);
  fs::create_directories(r.targets_dir);
  const bool has_edges = models.is.content == ContentSource::PriorEdge || models.is.content == ContentSource::SourceEdge;
  if (has_edges) fs::create_directories(r.edges_dir);
  std::ofstream index(r.index_csv);
  index << "pair_id,from,to,image,edge\n";
  const std::size_t n = options.limit ? std::min(options.limit, dataset.size()) : dataset.size();
  NoGradGuard guard;
  for (std::size_t i = 0; i < n; ++i) {
    const TrainingPair pair = dataset.get(i);
    const Batch batch = collate({pair});
    const Var content = content_input(batch, pct ? &*pct : nullptr, models);
    const Var out = is_forward(batch.source_image, content, batch.target_pose, config.train.seed + i, is, models.is);
    const std::string file = pair.id + ".png";
    write_png(r.images_dir / file, denormalize_image(first_image(out.value())));
    write_png(r.targets_dir / file, denormalize_image(pair.target_image));
    std::string edge_file;
    if (has_edges) {
      const Tensor& e = content.value();
      write_png(r.edges_dir / file, edge_to_u8(EdgeMap{e.reshaped({1, e.dim(2), e.dim(3)})}));
      edge_file = (fs::path("edges") / file).string();
    }
    const auto& d = dataset.index().pairs[i];
    index << pair.id << ',' << d.from << ',' << d.to << ',' << (fs::path("images") / file).string() << ',' << edge_file
          << '\n';
    ++r.pairs;
  }
  r.manifest = write_manifest(
      options.out_dir, "infer",
      make_manifest(inv, &config, config.train.seed,
                    {{"pairs", r.pairs},
                     {"pct_checkpoint", options.pct_checkpoint ? options.pct_checkpoint->string() : ""},
                     {"is_checkpoint", options.is_checkpoint.string()}}));
  return r;
}

EvalResult cmd_eval(const EvalOptions& options, const Invocation& inv) {
  Extractors ex;
  if (options.toy_fid) ex.fid = std::make_shared<ToyStatsEmbedder>();
  EvalResult r;
  r.report = evaluate_directories(options.generated_dir, options.truth_dir, options.metrics, ex);
  const fs::path out = options.out_dir.empty() ? options.generated_dir : options.out_dir;
  r.csv = out / "eval.csv";
  r.report.write_csv(r.csv);
  std::ofstream(out / "eval.txt") << r.report.table();
  nlohmann::json summary = r.report.summary;
  nlohmann::json skipped = r.report.skipped;
  r.manifest = write_manifest(out, "eval",
                              make_manifest(inv, nullptr, 0,
                                            {{"generated", options.generated_dir.string()},
                                             {"truth", options.truth_dir.string()},
                                             {"metrics", options.metrics},
                                             {"fid_embedder", options.toy_fid ? "toy-stats" : ""},
                                             {"summary", summary},
                                             {"skipped", skipped}}));
  return r;
}

fs::path cmd_synth(const SynthOptions& o, const Invocation& inv) {
  if (o.out_dir.empty()) throw ConfigError("synth: no output directory");
  synthetic::write_dataset(o.out_dir, o.people, o.poses, o.height, o.width, o.seed);
  RunConfig c;
  c.paths.pairs = "pairs.csv";
  c.paths.images = "images";
  c.paths.keypoints = "keypoints.csv";
  c.data.cache_dir = "cache";
  c.data.height = o.height;
  c.data.width = o.width;
  c.train.epochs = 4;
  c.train.decay_start_epoch = 2;
  c.train.seed = o.seed;
  const fs::path path = o.out_dir / "config.ini";
  std::ofstream(path) << format_config(c);
  write_manifest(o.out_dir, "synth",
                 make_manifest(inv, nullptr, o.seed,
                               {{"people", o.people}, {"poses", o.poses}, {"height", o.height}, {"width", o.width}}));
  return path;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : csv + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  return out;
}

}  // namespace scagan::app
