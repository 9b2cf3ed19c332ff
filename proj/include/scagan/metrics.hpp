#pragma once

// Image-quality metrics and the evaluation report.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scagan/image.hpp"

namespace scagan {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;  // images are rescaled from [-1,1] to [0,1]
};

/// Mean SSIM over channels and all valid window positions.
double ssim(const ImageMap& a, const ImageMap& b, const SsimParams& params = {});
/// Mean absolute difference in [-1,1] units.
double mean_l1(const ImageMap& a, const ImageMap& b);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased (n - 1)
};
/// Rows of `features` are samples.
GaussianStats gaussian_stats(const Eigen::MatrixXd& features);

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)). The square root is taken as
/// Tr sqrt(sqrt(S1) S2 sqrt(S1)); if that matrix is numerically indefinite,
/// eps * I is added to both covariances and a warning is logged.
double frechet_distance(const GaussianStats& a, const GaussianStats& b, double eps = 1e-6);
/// FID between two feature sets (>= 2 rows each, equal columns).
double fid(const Eigen::MatrixXd& real, const Eigen::MatrixXd& fake);

/// Image -> feature vector; used for FID. Pretrained Inception weights are external.
class ImageEmbedder {
 public:
  virtual ~ImageEmbedder() = default;
  virtual std::string name() const = 0;
  virtual Eigen::VectorXd embed(const ImageMap& image) const = 0;
};

/// Image -> class probabilities; used for the Inception Score.
class ImageClassifier {
 public:
  virtual ~ImageClassifier() = default;
  virtual std::string name() const = 0;
  virtual Eigen::VectorXd probabilities(const ImageMap& image) const = 0;
};

/// Learned perceptual distance between two images (LPIPS).
class PerceptualDistance {
 public:
  virtual ~PerceptualDistance() = default;
  virtual std::string name() const = 0;
  virtual double distance(const ImageMap& a, const ImageMap& b) const = 0;
};

/// exp(E_x KL(p(y|x) || p(y))) over the rows of a probability matrix.
double inception_score(const Eigen::MatrixXd& probabilities);

/// Per-channel mean, std and 2x2-block means: a small deterministic embedder
/// for exercising FID without pretrained weights. Never used unless requested.
class ToyStatsEmbedder final : public ImageEmbedder {
 public:
  std::string name() const override { return "toy-stats"; }
  Eigen::VectorXd embed(const ImageMap& image) const override;
};

struct Extractors {
  std::shared_ptr<const ImageEmbedder> fid;
  std::shared_ptr<const ImageClassifier> is;
  std::shared_ptr<const PerceptualDistance> lpips;
};

struct EvalReport {
  std::vector<std::string> pair_ids;
  std::vector<std::string> columns;                      // per-pair metric columns, in order
  std::map<std::string, std::vector<double>> per_pair;   // column -> value per pair
  std::map<std::string, double> summary;                 // metric -> aggregate
  std::vector<std::string> order;                        // metrics in requested order
  std::map<std::string, std::string> skipped;            // metric -> reason

  void write_csv(const std::filesystem::path& path) const;
  std::string table() const;
};

/// Metrics over matched (generated, ground truth) images. Known metrics: ssim,
/// l1, fid, is, lpips; the last three are skipped when their extractor is absent.
EvalReport evaluate(const std::vector<std::string>& ids, const std::vector<ImageMap>& generated,
                    const std::vector<ImageMap>& ground_truth, const std::vector<std::string>& metrics,
                    const Extractors& extractors);

/// Loads every <id>.png in `generated_dir` that has a same-named file in `truth_dir`.
EvalReport evaluate_directories(const std::filesystem::path& generated_dir, const std::filesystem::path& truth_dir,
                                const std::vector<std::string>& metrics, const Extractors& extractors);

/// Reference scores reported for the full-scale model; not reproducible at desk scale.
struct PaperReference {
  static constexpr double is = 3.497;
  static constexpr double ssim = 0.775;
  static constexpr double fid = 11.676;
  static constexpr double lpips = 0.167;
};

}  // namespace scagan
