#include <cstddef>
#include <cstdio>

#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "doctest.h"
#include "scagan/data.hpp"
#include "scagan/dataset.hpp"
#include "scagan/log.hpp"
#include "scagan/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace scagan;
namespace fs = std::filesystem;

namespace {

Keypoints all_invisible() { return Keypoints{}; }

ImageMap solid(double r, double g, double b, int h = 4, int w = 4, int channels = 3) {
  Tensor t({channels, h, w});
  const double rgb[4] = {r, g, b, -1.0};
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < h * w; ++i) t[static_cast<std::size_t>(c) * h * w + i] = rgb[c];
  return ImageMap{t};
}

// Brute-force 2-D Gaussian with the same radius and mirror border as the blur under test.
Tensor blur_oracle(const Tensor& g, double sigma) {
  const int h = g.dim(1), w = g.dim(2);
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  auto mirror = [](int i, int n) {
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  };
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) total += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
  Tensor out(g.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          s += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / total *
               g[static_cast<std::size_t>(mirror(y + dy, h)) * w + mirror(x + dx, w)];
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string kp_row(const std::string& name, int base) {
  std::string ys = "[", xs = "[";
  for (int j = 0; j < kNumJoints; ++j) {
    ys += (j ? ", " : "") + std::to_string(j == 3 ? -1 : base + j);
    xs += (j ? ", " : "") + std::to_string(j == 3 ? -1 : 2 + j);
  }
  return name + ",\"" + ys + "]\",\"" + xs + "]\"\n";
}

}  // namespace

TEST_CASE("pose heatmap: peak, invisible joints and the Gaussian profile") {
  Keypoints kp;
  kp.joints[0] = Joint{5.0, 7.0, true};
  kp.joints[3] = Joint{-1, -1, false};
  const PoseHeatmap hm = rasterize_pose_heatmap(kp, 32, 24, 6.0);
  REQUIRE(hm.channels.shape() == Shape{18, 32, 24});
  auto at = [&](int c, int y, int x) { return hm.channels[(static_cast<std::size_t>(c) * 32 + y) * 24 + x]; };
  CHECK(at(0, 7, 5) == 1.0);
  CHECK(at(0, 7, 11) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(at(0, 7, 11) == doctest::Approx(0.60653).epsilon(1e-5));
  CHECK(at(0, 13, 5) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  for (int i = 0; i < 32 * 24; ++i) CHECK(hm.channels[3 * 32 * 24 + i] == 0.0);
}

TEST_CASE("pose heatmap rejects visible joints outside the frame") {
  Keypoints kp;
  kp.joints[2] = Joint{24.0, 3.0, true};
  CHECK_THROWS_AS(rasterize_pose_heatmap(kp, 32, 24, 2.0), DataError);
  kp.joints[2] = Joint{3.0, -0.5, true};
  CHECK_THROWS_AS(rasterize_pose_heatmap(kp, 32, 24, 2.0), DataError);
  kp.joints[2].visible = false;
  CHECK_NOTHROW(rasterize_pose_heatmap(kp, 32, 24, 2.0));
  CHECK_THROWS_AS(rasterize_pose_heatmap(kp, 32, 24, 0.0), DataError);
}

TEST_CASE("property: each visible integer joint yields exactly one unit peak") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> ys(0, 39), xs(0, 29);
  std::uniform_real_distribution<double> sig(0.5, 8.0);
  for (int trial = 0; trial < 25; ++trial) {
    Keypoints kp;
    for (auto& j : kp.joints) j = Joint{static_cast<double>(xs(rng)), static_cast<double>(ys(rng)), rng() % 4 != 0};
    const PoseHeatmap hm = rasterize_pose_heatmap(kp, 40, 30, sig(rng));
    for (int c = 0; c < kNumJoints; ++c) {
      const double* ch = hm.channels.ptr() + c * 40 * 30;
      const auto& joint = kp.joints[static_cast<std::size_t>(c)];
      int ones = 0;
      for (int i = 0; i < 40 * 30; ++i) {
        REQUIRE(ch[i] >= 0.0);
        REQUIRE(ch[i] <= 1.0);
        ones += ch[i] == 1.0;
      }
      if (joint.visible) {
        REQUIRE(ones == 1);
        REQUIRE(ch[static_cast<int>(joint.y) * 30 + static_cast<int>(joint.x)] == 1.0);
      } else {
        REQUIRE(*std::max_element(ch, ch + 40 * 30) == 0.0);
      }
    }
  }
}

TEST_CASE("default heatmap sigma scales with height") {
  CHECK(default_heatmap_sigma(256) == 6.0);
  CHECK(default_heatmap_sigma(64) == 1.5);
}

TEST_CASE("luminance uses fixed luma weights on [0,1]") {
  CHECK(rgb_to_luminance(solid(1, 1, 1))[0] == doctest::Approx(1.0));
  CHECK(rgb_to_luminance(solid(-1, -1, -1))[0] == 0.0);
  CHECK(rgb_to_luminance(solid(1, -1, -1))[0] == doctest::Approx(0.299).epsilon(1e-15));
  CHECK_THROWS_AS(rgb_to_luminance(ImageMap{Tensor({1, 2, 2})}), DataError);
  CHECK_THROWS_AS(rgb_to_luminance(ImageMap{Tensor({2, 2, 2})}), DataError);
}

TEST_CASE("xdog of a constant image above epsilon is all ones") {
  Tensor gray({1, 12, 10}, 0.5);
  const EdgeMap e = xdog_edge(gray, XdogParams{});
  for (double v : e.values.data()) CHECK(v == 1.0);
}

TEST_CASE("xdog is deterministic and bounded") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor gray({1, 20, 16});
  for (double& v : gray.data()) v = u(rng);
  const EdgeMap a = xdog_edge(gray, XdogParams{});
  const EdgeMap b = xdog_edge(gray, XdogParams{});
  CHECK(std::equal(a.values.data().begin(), a.values.data().end(), b.values.data().begin()));
  for (double v : a.values.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("xdog of a vertical line matches a 2-D convolution oracle and is symmetric") {
  const int n = 16;
  Tensor gray({1, n, n}, 0.0);
  for (int y = 0; y < n; ++y) gray[static_cast<std::size_t>(y) * n + 7] = 1.0;
  XdogParams p;
  p.sigma = 1.0;
  const EdgeMap e = xdog_edge(gray, p);
  const Tensor fine = blur_oracle(gray, p.sigma), coarse = blur_oracle(gray, p.k * p.sigma);
  for (int i = 0; i < n * n; ++i) {
    const double s = (1 + p.p) * fine[i] - p.p * coarse[i];
    const double expected = std::clamp(s >= p.epsilon ? 1.0 : 1.0 + std::tanh(p.phi * (s - p.epsilon)), 0.0, 1.0);
    CHECK(e.values[i] == doctest::Approx(expected).epsilon(1e-12));
  }
  // Mirror about column 7 within the range unaffected by the borders.
  for (int y = 0; y < n; ++y)
    for (int d = 1; d <= 6; ++d)
      CHECK(e.values[static_cast<std::size_t>(y) * n + 7 - d] ==
            doctest::Approx(e.values[static_cast<std::size_t>(y) * n + 7 + d]).epsilon(1e-12));
  // The line itself is bright; its flanks are darkened.
  CHECK(e.values[7] == 1.0);
  CHECK(e.values[5] < 1.0);
}

TEST_CASE("xdog errors on bad input") {
  Tensor gray({1, 4, 4}, 0.5);
  gray[5] = std::nan("");
  CHECK_THROWS_AS(xdog_edge(gray, XdogParams{}), DataError);
  CHECK_THROWS_AS(xdog_edge(Tensor({3, 4, 4}), XdogParams{}), DataError);
  XdogParams bad;
  bad.k = 1.0;
  CHECK_THROWS_AS(xdog_edge(Tensor({1, 4, 4}), bad), DataError);
}

TEST_CASE("property: xdog never reads an alpha channel") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor rgb({3, 10, 9}), rgba({4, 10, 9});
    for (std::size_t i = 0; i < rgb.size(); ++i) rgba[i] = rgb[i] = u(rng);
    for (std::size_t i = rgb.size(); i < rgba.size(); ++i) rgba[i] = -1.0;  // fully transparent
    const EdgeMap a = xdog_edge(rgb_to_luminance(ImageMap{rgb}), XdogParams{});
    const EdgeMap b = xdog_edge(rgb_to_luminance(ImageMap{rgba}), XdogParams{});
    CHECK(std::equal(a.values.data().begin(), a.values.data().end(), b.values.data().begin()));
  }
}

TEST_CASE("property: normalize/denormalize round-trips within 1/255") {
  std::mt19937_64 rng(8);
  ImageU8 img(7, 5, 3);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xFF);
  const ImageU8 back = denormalize_image(normalize_image(img));
  CHECK(back.data == img.data);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t({3, 7, 5});
  for (double& v : t.data()) v = u(rng);
  const ImageMap again = normalize_image(denormalize_image(ImageMap{t}));
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::fabs(again.pixels[i] - t[i]) <= 1.0 / 255.0);
}

TEST_CASE("png round trip and jpeg decoding") {
  testing::TempDir dir;
  ImageU8 img(6, 4, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 7);
  write_png(dir.path() / "a.png", img);
  const ImageU8 back = read_image(dir.path() / "a.png", 3);
  CHECK(back.data == img.data);
  CHECK(read_image(dir.path() / "a.png", 1).channels == 1);

  // Encode a flat-colour JPEG with libjpeg and decode it through read_image.
  const fs::path jpg = dir.path() / "b.jpg";
  FILE* f = std::fopen(jpg.c_str(), "wb");
  REQUIRE(f);
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f);
  cinfo.image_width = 16;
  cinfo.image_height = 8;
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, 95, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<unsigned char> row(16 * 3);
  for (int x = 0; x < 16; ++x) row[x * 3] = 200, row[x * 3 + 1] = 40, row[x * 3 + 2] = 90;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW r = row.data();
    jpeg_write_scanlines(&cinfo, &r, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(f);
  const ImageU8 decoded = read_image(jpg, 3);
  CHECK(decoded.height == 8);
  CHECK(decoded.width == 16);
  CHECK(std::abs(decoded.at(4, 8, 0) - 200) < 6);
  CHECK(std::abs(decoded.at(4, 8, 1) - 40) < 6);
  CHECK_THROWS_AS(read_image(dir.path() / "missing.png"), ImageIoError);
  write_text(dir.path() / "junk.png", "not an image");
  CHECK_THROWS_AS(read_image(dir.path() / "junk.png"), ImageIoError);
}

TEST_CASE("keypoint CSV parsing, rejects and the colon variant") {
  testing::TempDir dir;
  write_text(dir.path() / "kp.csv", "name,keypoints_y,keypoints_x\n" + kp_row("a.png", 10) +
                                        "b.png,\"[1, 2]\",\"[3, 4]\"\n" + "c.png,\"[x]\",\"[1]\"\n");
  const KeypointTable t = load_keypoints_csv(dir.path() / "kp.csv");
  REQUIRE(t.records.size() == 1);
  CHECK(t.rejects.size() == 2);
  const Keypoints& kp = t.records.at("a.png");
  CHECK(kp.joints[0].visible);
  CHECK(kp.joints[0].y == 10);
  CHECK(kp.joints[0].x == 2);
  CHECK_FALSE(kp.joints[3].visible);

  std::string colon = "name:keypoints_y:keypoints_x\nd.png:[";
  for (int j = 0; j < kNumJoints; ++j) colon += (j ? ", " : "") + std::to_string(j);
  colon += "]:[";
  for (int j = 0; j < kNumJoints; ++j) colon += (j ? ", " : "") + std::string("-1");
  colon += "]\n";
  write_text(dir.path() / "kp2.csv", colon);
  const KeypointTable t2 = load_keypoints_csv(dir.path() / "kp2.csv");
  REQUIRE(t2.records.count("d.png"));
  CHECK_FALSE(t2.records.at("d.png").joints[5].visible);

  write_text(dir.path() / "bad.csv", "file,y,x\n");
  CHECK_THROWS_AS(load_keypoints_csv(dir.path() / "bad.csv"), DataError);
}

TEST_CASE("pair index: order, skips, strict mode and determinism") {
  set_log_level(LogLevel::Quiet);
  testing::TempDir dir;
  fs::create_directories(dir.path() / "img");
  for (const char* n : {"a.png", "b.png", "c.png"}) write_png(dir.path() / "img" / n, ImageU8(8, 6, 3, 100));
  write_text(dir.path() / "kp.csv", "name,keypoints_y,keypoints_x\n" + kp_row("a.png", 0) + kp_row("b.png", 1) +
                                        kp_row("c.png", 0) + kp_row("ghost.png", 0));
  write_text(dir.path() / "pairs.csv", "from,to\nb.png,a.png\na.png,c.png\n");
  const auto idx = load_pair_index(dir.path() / "pairs.csv", dir.path() / "img", dir.path() / "kp.csv", false);
  REQUIRE(idx.pairs.size() == 2);
  CHECK(idx.pairs[0].from == "b.png");
  CHECK(idx.pairs[1].to == "c.png");
  CHECK(idx.skipped.empty());
  CHECK(idx.pairs[0].id() == "b___a");

  write_text(dir.path() / "pairs2.csv", "from,to\na.png,b.png\nghost.png,a.png\n");
  const auto idx2 = load_pair_index(dir.path() / "pairs2.csv", dir.path() / "img", dir.path() / "kp.csv", false);
  CHECK(idx2.pairs.size() == 1);
  CHECK(idx2.skipped.size() == 1);
  CHECK_THROWS_AS(load_pair_index(dir.path() / "pairs2.csv", dir.path() / "img", dir.path() / "kp.csv", true),
                  DataError);

  const auto again = load_pair_index(dir.path() / "pairs.csv", dir.path() / "img", dir.path() / "kp.csv", false);
  REQUIRE(again.pairs.size() == idx.pairs.size());
  for (std::size_t i = 0; i < idx.pairs.size(); ++i) {
    CHECK(again.pairs[i].from == idx.pairs[i].from);
    CHECK(again.pairs[i].to == idx.pairs[i].to);
  }
  set_log_level(LogLevel::Warning);
}

TEST_CASE("file dataset resolves pairs lazily with rescaled keypoints") {
  set_log_level(LogLevel::Quiet);
  testing::TempDir dir;
  synthetic::write_dataset(dir.path(), 1, 2, 128, 96, 5);
  const auto idx = load_pair_index(dir.path() / "pairs.csv", dir.path() / "images", dir.path() / "keypoints.csv", true);
  REQUIRE(idx.pairs.size() == 2);
  DataConfig cfg;
  FileDataset ds(idx, cfg);
  const TrainingPair p = ds.get(0);
  CHECK(p.source_image.pixels.shape() == Shape{3, 64, 48});
  CHECK(p.target_pose.channels.shape() == Shape{18, 64, 48});
  CHECK(p.source_edge.values.shape() == Shape{1, 64, 48});
  CHECK(p.target_pose.sigma == 1.5);
  // Neck keypoint halves with the 2x downscale.
  const Joint neck = idx.pairs[0].to_keypoints.joints[1];
  const double* ch = p.target_pose.channels.ptr() + 1 * 64 * 48;
  const int peak = static_cast<int>(std::max_element(ch, ch + 64 * 48) - ch);
  CHECK(std::abs(peak / 48 - neck.y / 2) <= 1);
  CHECK(std::abs(peak % 48 - neck.x / 2) <= 1);
  set_log_level(LogLevel::Warning);
}

TEST_CASE("batch iterator: sizes, reproducibility and manifest order") {
  std::vector<TrainingPair> pairs(10);
  for (int i = 0; i < 10; ++i) pairs[static_cast<std::size_t>(i)].id = std::to_string(i);
  InMemoryDataset ds(pairs);
  BatchIterator it(ds, 4, false, 0);
  std::vector<std::size_t> sizes;
  std::vector<std::string> order;
  while (auto b = it.next()) {
    sizes.push_back(b->size());
    for (auto& p : *b) order.push_back(p.id);
  }
  CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
  for (int i = 0; i < 10; ++i) CHECK(order[static_cast<std::size_t>(i)] == std::to_string(i));

  BatchIterator a(ds, 3, true, 7), b(ds, 3, true, 7);
  CHECK(a.plan() == b.plan());
  InMemoryDataset empty({});
  CHECK_THROWS_AS(BatchIterator(empty, 2, false, 0), DataError);
  CHECK_THROWS_AS(BatchIterator(ds, 0, false, 0), DataError);
}

TEST_CASE("shuffle permutations are uniform over the enumerated 3-element permutations") {
  // Oracle: all 3! orderings.
  std::vector<std::vector<std::size_t>> all;
  std::vector<std::size_t> p{0, 1, 2};
  do all.push_back(p); while (std::next_permutation(p.begin(), p.end()));
  REQUIRE(all.size() == 6);

  auto perm_for = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return permutation(3, rng);
  };
  const auto p7 = perm_for(7), p8 = perm_for(8);
  CHECK(std::find(all.begin(), all.end(), p7) != all.end());
  CHECK(std::find(all.begin(), all.end(), p8) != all.end());
  CHECK(p7 != p8);

  // Independent uniform permutations coincide with probability 1/6.
  std::map<std::vector<std::size_t>, int> freq;
  int same = 0;
  const int trials = 6000;
  for (int s = 0; s < trials; ++s) {
    const auto a = perm_for(static_cast<std::uint64_t>(s)), b = perm_for(static_cast<std::uint64_t>(s) + 1);
    ++freq[a];
    same += a == b;
  }
  CHECK(freq.size() == 6);
  for (const auto& [perm, count] : freq) CHECK(std::abs(count - trials / 6) < 120);
  CHECK(std::fabs(static_cast<double>(same) / trials - 1.0 / 6.0) < 0.02);
}

TEST_CASE("collate stacks pairs along the batch axis") {
  DataConfig cfg;
  cfg.height = 32;
  cfg.width = 24;
  std::vector<TrainingPair> pairs{synthetic::training_pair(32, 24, 1, cfg), synthetic::training_pair(32, 24, 2, cfg)};
  const Batch b = collate(pairs);
  CHECK(b.size() == 2);
  CHECK(b.target_pose.shape() == Shape{2, 18, 32, 24});
  CHECK(b.source_edge.shape() == Shape{2, 1, 32, 24});
  CHECK(b.target_image.value()[3 * 32 * 24] == pairs[1].target_image.pixels[0]);
  CHECK_FALSE(b.target_labels.defined());
}
