#include <algorithm>
#include <numeric>

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "scagan/metrics.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace scagan;
using testing::ssim_oracle;

namespace {

ImageMap random_image(int c, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ImageMap m{Tensor({c, h, w})};
  for (double& v : m.pixels.data()) v = u(rng);
  return m;
}

ImageMap constant_image(int c, int h, int w, double v) {
  ImageMap m{Tensor({c, h, w})};
  for (double& x : m.pixels.data()) x = v;
  return m;
}

Eigen::MatrixXd gaussian_samples(int n, int d, double mean, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(mean, 1.0);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = nd(rng);
  return m;
}

}  // namespace

TEST_CASE("ssim matches the direct window oracle and its fixed points") {
  std::mt19937_64 rng(3);
  const ImageMap x = random_image(3, 24, 20, rng);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));

  ImageMap noisy = x, inverted = x;
  std::normal_distribution<double> nd(0.0, 0.1);
  for (double& v : noisy.pixels.data()) v = std::clamp(v + nd(rng), -1.0, 1.0);
  for (double& v : inverted.pixels.data()) v = -v;  // 1 - x on [0,1]
  CHECK(ssim(x, inverted) < ssim(x, noisy));

  CHECK(ssim(x, noisy) == doctest::Approx(ssim_oracle(x, noisy)).epsilon(1e-10));
  CHECK(ssim(x, inverted) == doctest::Approx(ssim_oracle(x, inverted)).epsilon(1e-10));
}

TEST_CASE("ssim of two constant images reduces to the luminance term") {
  const ImageMap a = constant_image(1, 16, 16, 2 * 0.2 - 1), b = constant_image(1, 16, 16, 2 * 0.8 - 1);
  CHECK(ssim(a, b) == doctest::Approx((0.32 + 1e-4) / (0.68 + 1e-4)).epsilon(1e-12));
}

TEST_CASE("ssim rejects mismatched or too-small inputs") {
  CHECK_THROWS_AS(ssim(constant_image(3, 16, 16, 0), constant_image(3, 16, 12, 0)), MetricError);
  CHECK_THROWS_AS(ssim(constant_image(3, 10, 16, 0), constant_image(3, 10, 16, 0)), MetricError);
}

TEST_CASE("fid: identical sets, pure shift, permutation invariance") {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd a = gaussian_samples(400, 4, 0.0, rng);
  CHECK(fid(a, a) == doctest::Approx(0.0).epsilon(1e-8).scale(1.0));

  // 1-D: the same draws shifted by 3 differ only in the mean.
  const Eigen::MatrixXd x = gaussian_samples(1000, 1, 0.0, rng);
  const Eigen::MatrixXd y = x.array() + 3.0;
  CHECK(fid(x, y) == doctest::Approx(9.0).epsilon(1e-10));

  const Eigen::MatrixXd b = gaussian_samples(300, 4, 0.5, rng);
  Eigen::MatrixXd perm = b;
  std::vector<int> idx(300);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (int i = 0; i < 300; ++i) perm.row(i) = b.row(idx[static_cast<std::size_t>(i)]);
  CHECK(fid(a, perm) == doctest::Approx(fid(a, b)).epsilon(1e-10));
  CHECK(fid(a, b) == doctest::Approx(fid(b, a)).epsilon(1e-8));
}

TEST_CASE("frechet distance of diagonal Gaussians matches the closed form") {
  GaussianStats s1{Eigen::Vector3d(0, 1, 2), Eigen::Vector3d(1.0, 4.0, 0.25).asDiagonal()};
  GaussianStats s2{Eigen::Vector3d(1, 1, 0), Eigen::Vector3d(9.0, 1.0, 0.25).asDiagonal()};
  const double expected = 1 + 0 + 4 + std::pow(1 - 3, 2) + std::pow(2 - 1, 2) + 0;
  CHECK(frechet_distance(s1, s2) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("fid falls back to a regularized square root on singular covariances") {
  // Two features that are exact copies: rank-1 covariance.
  std::mt19937_64 rng(5);
  Eigen::MatrixXd a = gaussian_samples(50, 2, 0.0, rng), b = gaussian_samples(50, 2, 1.0, rng);
  a.col(1) = a.col(0);
  b.col(1) = -b.col(0);
  const double d = fid(a, b);
  CHECK(std::isfinite(d));
  CHECK(d >= 0.0);
  CHECK_THROWS_AS(fid(a, Eigen::MatrixXd::Zero(1, 2)), MetricError);
}

TEST_CASE("inception score extremes") {
  Eigen::MatrixXd certain = Eigen::MatrixXd::Identity(4, 4);
  CHECK(inception_score(certain) == doctest::Approx(4.0).epsilon(1e-12));
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(5, 4, 0.25);
  CHECK(inception_score(same) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluate writes per-pair rows and skips missing extractors") {
  std::mt19937_64 rng(9);
  std::vector<std::string> ids{"a", "b", "c"};
  std::vector<ImageMap> gen, truth;
  for (int i = 0; i < 3; ++i) {
    truth.push_back(random_image(3, 16, 12, rng));
    gen.push_back(random_image(3, 16, 12, rng));
  }
  const EvalReport r = evaluate(ids, gen, truth, {"ssim", "l1", "fid", "is", "lpips"}, {});
  CHECK(r.columns == std::vector<std::string>{"ssim", "l1"});
  CHECK(r.skipped.count("fid") == 1);
  CHECK(r.skipped.count("is") == 1);
  CHECK(r.skipped.count("lpips") == 1);
  CHECK(r.per_pair.at("ssim")[1] == doctest::Approx(ssim_oracle(gen[1], truth[1])).epsilon(1e-10));
  CHECK(r.summary.at("l1") == doctest::Approx((mean_l1(gen[0], truth[0]) + mean_l1(gen[1], truth[1]) +
                                               mean_l1(gen[2], truth[2])) / 3));
  CHECK(r.table().find("skipped") != std::string::npos);

  Extractors ex;
  ex.fid = std::make_shared<ToyStatsEmbedder>();
  const EvalReport with_fid = evaluate(ids, gen, truth, {"fid"}, ex);
  CHECK(with_fid.summary.count("fid") == 1);
  CHECK(evaluate(ids, truth, truth, {"fid"}, ex).summary.at("fid") == doctest::Approx(0.0).scale(1.0));

  testing::TempDir dir;
  r.write_csv(dir.path() / "eval.csv");
  std::ifstream in(dir.path() / "eval.csv");
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "pair_id,ssim,l1");
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  CHECK(rows == 3);

  CHECK_THROWS_AS(evaluate(ids, gen, truth, {"psnr"}, {}), MetricError);
}

TEST_CASE("evaluate_directories matches files by name") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir.path() / "gen");
  std::filesystem::create_directories(dir.path() / "gt");
  std::mt19937_64 rng(2);
  for (const char* id : {"p1", "p2"}) {
    const ImageMap im = random_image(3, 16, 16, rng);
    write_png(dir.path() / "gen" / (std::string(id) + ".png"), denormalize_image(im));
    write_png(dir.path() / "gt" / (std::string(id) + ".png"), denormalize_image(im));
  }
  write_png(dir.path() / "gen" / "orphan.png", denormalize_image(random_image(3, 16, 16, rng)));
  const EvalReport r = evaluate_directories(dir.path() / "gen", dir.path() / "gt", {"ssim", "l1"}, {});
  CHECK(r.pair_ids == std::vector<std::string>{"p1", "p2"});
  CHECK(r.summary.at("ssim") == doctest::Approx(1.0));
  CHECK(r.summary.at("l1") == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(evaluate_directories(dir.path() / "none", dir.path() / "gt", {"ssim"}, {}), MetricError);
}
