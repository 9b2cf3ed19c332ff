#pragma once

// Pose and edge conditioning maps derived from images and keypoints.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "scagan/image.hpp"

namespace scagan {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kNumJoints = 18;

/// Joint order of the 18-keypoint body model (OpenPose/COCO-18).
inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "nose",       "neck",      "r_shoulder", "r_elbow", "r_wrist", "l_shoulder",
    "l_elbow",    "l_wrist",   "r_hip",      "r_knee",  "r_ankle", "l_hip",
    "l_knee",     "l_ankle",   "r_eye",      "l_eye",   "r_ear",   "l_ear"};

struct Joint {
  double x = -1.0;
  double y = -1.0;
  bool visible = false;
};

struct Keypoints {
  std::array<Joint, kNumJoints> joints{};

  /// Rescales visible joints from a (from_h, from_w) frame to (to_h, to_w).
  Keypoints rescaled(int from_h, int from_w, int to_h, int to_w) const;
  /// Throws DataError naming the first visible joint outside [0,W) x [0,H).
  void check_bounds(int height, int width) const;
  std::uint64_t hash() const;
};

/// 18 x H x W Gaussian joint encoding.
struct PoseHeatmap {
  Tensor channels;
  double sigma = 0.0;

  int height() const { return channels.dim(1); }
  int width() const { return channels.dim(2); }
};

/// 6 px at a height of 256, scaled proportionally with height.
double default_heatmap_sigma(int height);

/// channel j (h, w) = exp(-((h - y_j)^2 + (w - x_j)^2) / (2 sigma^2)) for visible joints, else 0.
PoseHeatmap rasterize_pose_heatmap(const Keypoints& kp, int height, int width, double sigma);

struct XdogParams {
  double sigma = 0.8;
  double k = 1.6;
  double p = 19.0;
  double epsilon = 0.01;
  double phi = 10.0;

  void validate() const;
  std::uint64_t hash() const;
};

/// [-1,1] RGB (optionally with a 4th alpha channel, which is ignored) -> 1 x H x W luminance in [0,1].
Tensor rgb_to_luminance(const ImageMap& image);

/// Separable Gaussian blur of a 1 x H x W array; kernel radius ceil(3 sigma), mirror borders.
Tensor gaussian_blur(const Tensor& gray, double sigma);

/// Extended difference of Gaussians on a 1 x H x W luminance array in [0,1].
EdgeMap xdog_edge(const Tensor& gray, const XdogParams& params);

}  // namespace scagan
