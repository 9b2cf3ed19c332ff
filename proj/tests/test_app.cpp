#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "doctest.h"
#include "json.hpp"
#include "scagan/app.hpp"
#include "scagan/config.hpp"
#include "scagan/log.hpp"
#include "scagan/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace scagan;
namespace fs = std::filesystem;

namespace {

const char* kTinyModel = R"(
[model]
pct_base = 4
pct_max = 8
pct_res = 1
is_levels = 2
is_base = 8
is_max = 8
is_modulation = 4
disc_base = 4

[train]
epochs = 2
decay_start = 1
seed = 5

[features]
base = 4
)";

// Synthetic dataset at 32x24 plus a config next to it.
fs::path make_dataset(const fs::path& dir, int people, int poses, const std::string& extra = "") {
  synthetic::write_dataset(dir, people, poses, 32, 24, 17);
  const fs::path cfg = dir / "config.ini";
  std::ofstream(cfg) << "[data]\npairs = pairs.csv\nimages = images\nkeypoints = keypoints.csv\ncache = cache\n"
                        "height = 32\nwidth = 24\n"
                     << extra << kTinyModel;
  return cfg;
}

std::size_t count_files(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) ++n;
  return n;
}

std::map<fs::path, fs::file_time_type> mtimes(const fs::path& dir) {
  std::map<fs::path, fs::file_time_type> m;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".tensor") m[e.path()] = e.last_write_time();
  return m;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

struct QuietLogs {
  QuietLogs() { set_log_level(LogLevel::Quiet); }
  ~QuietLogs() { set_log_level(LogLevel::Warning); }
};

}  // namespace

TEST_CASE("config: sections, defaults, relative paths and errors") {
  testing::TempDir dir;
  const fs::path cfg = dir.path() / "run.ini";
  std::ofstream(cfg) << "[data]\nimages = imgs\nheight = 128\nwidth = 96\nxdog_sigma = 1.2\n"
                        "[train]\nphase = is\nlr = 2e-4\n[loss]\ncx = 0.5\n[ablation]\nname = spade-resblk\n";
  const RunConfig c = load_config(cfg);
  CHECK(c.paths.images == fs::absolute(dir.path()) / "imgs");
  CHECK(c.data.height == 128);
  CHECK(c.data.xdog.sigma == 1.2);
  CHECK(c.train.phase == Phase::Is);
  CHECK(c.train.lr == 2e-4);
  CHECK(c.train.weights.cx == 0.5);
  CHECK(c.train.weights.adv == 5.0);
  CHECK(c.train.adam.beta1 == 0.5);
  CHECK(c.models.is.decoder == DecoderKind::SpadeResblk);

  const RunConfig back = parse_config(format_config(c));
  CHECK(back.to_json() == c.to_json());

  CHECK_THROWS_AS(parse_config("[data]\nheigth = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[dataa]\nheight = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[data]\nheight = tall\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[ablation]\nname = w/o-everything\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nepochs = 10\ndecay_start = 20\n"), ConfigError);
  CHECK_THROWS_AS(load_config(dir.path() / "absent.ini"), ConfigError);
}

TEST_CASE("ablation names map onto generator switches") {
  ModelConfig m;
  apply_ablation("w/o-prior-transfer", m);
  CHECK(m.is.content == ContentSource::SourceEdge);
  apply_ablation("w/o-content-branch", m);
  CHECK(m.is.content == ContentSource::None);
  apply_ablation("spade-resblk", m);
  CHECK(m.is.decoder == DecoderKind::SpadeResblk);
  CHECK(m.is.content == ContentSource::PriorEdge);
  apply_ablation("encoder-batch-norm", m);
  CHECK(m.is.encoder_norm == EncoderNorm::Batch);
  apply_ablation("encoder-instance-norm", m);
  CHECK(m.is.encoder_norm == EncoderNorm::Instance);
  apply_ablation("semantic-content", m);
  CHECK(m.is.content == ContentSource::Semantic);
  apply_ablation("none", m);
  CHECK(m.is.content == ContentSource::PriorEdge);
  CHECK(m.is.encoder_norm == EncoderNorm::None);
}

TEST_CASE("prepare: counts, rejects, idempotence and cache keys") {
  QuietLogs quiet;
  testing::TempDir dir;
  const fs::path cfg = make_dataset(dir.path(), 1, 2);
  std::ofstream(dir.path() / "keypoints.csv", std::ios::app) << "broken.png,\"[1, 2]\",\"[3]\"\n";
  RunConfig c = load_config(cfg);

  const auto first = app::cmd_prepare(c, {"prepare", {}});
  CHECK(first.images == 2);
  CHECK(first.edges_written == 2);
  CHECK(first.heatmaps_written == 2);
  CHECK(count_files(c.data.cache_dir / "edges") == 2);
  CHECK(count_files(c.data.cache_dir / "heatmaps") == 2);
  CHECK(first.rejects == 1);
  std::ifstream rej(first.rejects_file);
  const std::string rejects((std::istreambuf_iterator<char>(rej)), std::istreambuf_iterator<char>());
  CHECK(rejects.find("line") != std::string::npos);
  CHECK(fs::exists(first.manifest));

  const auto before = mtimes(c.data.cache_dir);
  const auto second = app::cmd_prepare(c, {"prepare", {}});
  CHECK(second.edges_written == 0);
  CHECK(second.heatmaps_written == 0);
  CHECK(second.up_to_date == 4);
  CHECK(mtimes(c.data.cache_dir) == before);

  c.data.xdog.sigma = 1.0;
  const auto third = app::cmd_prepare(c, {"prepare", {}});
  CHECK(third.edges_written == 2);
  CHECK(third.heatmaps_written == 0);
  CHECK(count_files(c.data.cache_dir / "edges") == 4);

  // The dataset reads what prepare cached.
  const PairIndex index = load_pair_index(c.paths.pairs, c.paths.images, c.paths.keypoints, false);
  const FileDataset cached(index, c.data);
  DataConfig uncached_cfg = c.data;
  uncached_cfg.cache_dir.clear();
  const FileDataset uncached(index, uncached_cfg);
  const TrainingPair a = cached.get(0), b = uncached.get(0);
  CHECK(std::ranges::equal(a.source_edge.values.data(), b.source_edge.values.data()));
  CHECK(std::ranges::equal(a.target_pose.channels.data(), b.target_pose.channels.data()));
}

TEST_CASE("train, infer and eval chain through checkpoints") {
  QuietLogs quiet;
  testing::TempDir dir;
  const RunConfig base = load_config(make_dataset(dir.path(), 2, 2));
  const fs::path run = dir.path() / "run";

  RunConfig pct_cfg = base;
  pct_cfg.train.phase = Phase::Pct;
  const auto pct = app::cmd_train(pct_cfg, {run, {}, {}, 1}, {"train", {"--phase", "pct"}});
  REQUIRE(pct.summary.checkpoints.size() == 1);
  CHECK(pct.summary.steps == 4);

  RunConfig is_cfg = base;
  is_cfg.train.phase = Phase::Is;
  CHECK_THROWS_WITH_AS(app::cmd_train(is_cfg, {run, {}, {}, 1}, {"train", {}}), doctest::Contains("pct"), TrainError);
  const auto is = app::cmd_train(is_cfg, {run, {}, pct.summary.checkpoints[0], 1}, {"train", {"--phase", "is"}});
  REQUIRE(is.summary.checkpoints.size() == 1);

  app::InferOptions io;
  io.pct_checkpoint = pct.summary.checkpoints[0];
  io.is_checkpoint = is.summary.checkpoints[0];
  io.out_dir = dir.path() / "infer";
  io.limit = 3;
  const auto inf = app::cmd_infer(base, io, {"infer", {}});
  CHECK(inf.pairs == 3);
  CHECK(count_files(inf.images_dir) == 3);
  CHECK(count_files(inf.edges_dir) == 3);
  CHECK(count_files(inf.targets_dir) == 3);
  const ImageU8 edge = read_image(inf.edges_dir / "person0_pose0___person0_pose1.png", 1);
  CHECK(edge.channels == 1);
  CHECK(edge.height == 32);

  app::EvalOptions eo;
  eo.generated_dir = inf.targets_dir;
  eo.truth_dir = inf.targets_dir;
  eo.metrics = {"ssim", "l1", "lpips"};
  eo.out_dir = dir.path() / "eval";
  const auto ev = app::cmd_eval(eo, {"eval", {}});
  CHECK(ev.report.summary.at("ssim") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev.report.summary.at("l1") == 0.0);
  CHECK(ev.report.skipped.at("lpips") == "extractor missing");
  CHECK(fs::exists(ev.csv));

  app::InferOptions missing = io;
  missing.is_checkpoint = dir.path() / "nope.ckpt";
  CHECK_THROWS_WITH_AS(app::cmd_infer(base, missing, {"infer", {}}), doctest::Contains("missing is checkpoint"),
                       TrainError);
  missing = io;
  missing.pct_checkpoint = dir.path() / "nope.ckpt";
  CHECK_THROWS_WITH_AS(app::cmd_infer(base, missing, {"infer", {}}), doctest::Contains("missing pct checkpoint"),
                       TrainError);
  missing = io;
  missing.pct_checkpoint.reset();
  CHECK_THROWS_WITH_AS(app::cmd_infer(base, missing, {"infer", {}}), doctest::Contains("pct"), TrainError);
  // Checkpoints of the wrong phase are refused.
  missing = io;
  missing.is_checkpoint = *io.pct_checkpoint;
  CHECK_THROWS_AS(app::cmd_infer(base, missing, {"infer", {}}), TrainError);
}

TEST_CASE("train records the ablation and config snapshot in its manifest") {
  QuietLogs quiet;
  testing::TempDir dir;
  RunConfig c = load_config(make_dataset(dir.path(), 1, 2));
  c.train.phase = Phase::Is;
  c.ablation = "w/o-content-branch";
  apply_ablation(c.ablation, c.models);
  const std::vector<std::string> args{"--phase", "is", "--ablation", "w/o-content-branch"};
  const auto r = app::cmd_train(c, {dir.path() / "run", {}, {}, 1}, {"train", args});
  CHECK(r.summary.steps == 2);
  const nlohmann::json m = read_json(r.manifest);
  CHECK(m["command"] == "train");
  CHECK(m["args"] == args);
  CHECK(m["ablation"] == "w/o-content-branch");
  CHECK(m["config"]["model"]["ablation"]["content_source"] == "none");
  CHECK(m["seed"] == 5);
  CHECK(m["source_hash"].get<std::string>().size() == 40);
  CHECK(m["steps"] == 2);
  const RunConfig replay = parse_config(m["config_ini"].get<std::string>());
  CHECK(replay.to_json() == c.to_json());
}

TEST_CASE("synth writes a loadable config") {
  QuietLogs quiet;
  testing::TempDir dir;
  app::SynthOptions o;
  o.out_dir = dir.path();
  o.people = 2;
  o.poses = 2;
  o.height = 32;
  o.width = 24;
  const fs::path cfg = app::cmd_synth(o, {"synth", {}});
  const RunConfig c = load_config(cfg);
  CHECK(fs::exists(c.paths.pairs));
  CHECK(c.data.height == 32);
  CHECK(app::split_list("ssim, l1,,fid") == std::vector<std::string>{"ssim", "l1", "fid"});
}
