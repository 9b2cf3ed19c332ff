#include "scagan/data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "scagan/archive.hpp"

namespace scagan {

Keypoints Keypoints::rescaled(int from_h, int from_w, int to_h, int to_w) const {
  Keypoints out = *this;
  const double sy = static_cast<double>(to_h) / from_h;
  const double sx = static_cast<double>(to_w) / from_w;
  for (Joint& j : out.joints) {
    if (!j.visible) continue;
    j.x *= sx;
    j.y *= sy;
  }
  return out;
}

void Keypoints::check_bounds(int height, int width) const {
  for (int i = 0; i < kNumJoints; ++i) {
    const Joint& j = joints[static_cast<std::size_t>(i)];
    if (!j.visible) continue;
    if (!(j.x >= 0.0 && j.x < width && j.y >= 0.0 && j.y < height)) {
      std::ostringstream os;
      os << "joint " << i << " (" << kJointNames[static_cast<std::size_t>(i)] << ") at (x=" << j.x
         << ", y=" << j.y << ") lies outside the " << width << "x" << height << " frame";
      throw DataError(os.str());
    }
  }
}

std::uint64_t Keypoints::hash() const {
  std::ostringstream os;
  os.precision(17);
  for (const Joint& j : joints) os << j.visible << ':' << j.x << ',' << j.y << ';';
  return fnv1a64(os.str());
}

double default_heatmap_sigma(int height) { return 6.0 * height / 256.0; }

PoseHeatmap rasterize_pose_heatmap(const Keypoints& kp, int height, int width, double sigma) {
  if (height <= 0 || width <= 0) throw DataError("heatmap size must be positive");
  if (!(sigma > 0.0)) throw DataError("heatmap sigma must be positive");
  kp.check_bounds(height, width);
  Tensor t({kNumJoints, height, width});
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int j = 0; j < kNumJoints; ++j) {
    const Joint& joint = kp.joints[static_cast<std::size_t>(j)];
    if (!joint.visible) continue;
    double* ch = t.ptr() + static_cast<std::size_t>(j) * height * width;
    for (int h = 0; h < height; ++h) {
      const double dy = h - joint.y;
      for (int w = 0; w < width; ++w) {
        const double dx = w - joint.x;
        ch[h * width + w] = std::exp(-(dy * dy + dx * dx) * inv);
      }
    }
  }
  return PoseHeatmap{std::move(t), sigma};
}

void XdogParams::validate() const {
  if (!(sigma > 0.0)) throw DataError("xdog: sigma must be > 0");
  if (!(k > 1.0)) throw DataError("xdog: k must be > 1");
  if (!(phi > 0.0)) throw DataError("xdog: phi must be > 0");
}

std::uint64_t XdogParams::hash() const {
  std::ostringstream os;
  os.precision(17);
  os << "xdog:" << sigma << ',' << k << ',' << p << ',' << epsilon << ',' << phi;
  return fnv1a64(os.str());
}

Tensor rgb_to_luminance(const ImageMap& image) {
  const Tensor& px = image.pixels;
  if (px.rank() != 3 || (px.dim(0) != 3 && px.dim(0) != 4)) {
    throw DataError("rgb_to_luminance: expected a 3-channel image (alpha allowed), got " +
                    shape_string(px.shape()));
  }
  const int h = px.dim(1), w = px.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({1, h, w});
  for (std::size_t i = 0; i < plane; ++i) {
    const double r = (px[i] + 1.0) * 0.5;
    const double g = (px[plane + i] + 1.0) * 0.5;
    const double b = (px[2 * plane + i] + 1.0) * 0.5;
    out[i] = 0.299 * r + 0.587 * g + 0.114 * b;
  }
  return out;
}

namespace {

int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

}  // namespace

Tensor gaussian_blur(const Tensor& gray, double sigma) {
  if (gray.rank() != 3 || gray.dim(0) != 1) {
    throw DataError("gaussian_blur: expected 1 x H x W, got " + shape_string(gray.shape()));
  }
  if (!(sigma > 0.0)) throw DataError("gaussian_blur: sigma must be > 0");
  const int h = gray.dim(1), w = gray.dim(2);
  const std::vector<double> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Tensor tmp({1, h, w});
  Tensor out({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * gray[static_cast<std::size_t>(y) * w + mirror(x + i, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(mirror(y + i, h)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

EdgeMap xdog_edge(const Tensor& gray, const XdogParams& params) {
  params.validate();
  if (gray.rank() != 3 || gray.dim(0) != 1) {
    throw DataError("xdog_edge: expected single-channel 1 x H x W input, got " +
                    shape_string(gray.shape()));
  }
  if (!gray.all_finite()) throw DataError("xdog_edge: input contains non-finite values");
  const Tensor fine = gaussian_blur(gray, params.sigma);
  const Tensor coarse = gaussian_blur(gray, params.k * params.sigma);
  Tensor out(gray.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = (1.0 + params.p) * fine[i] - params.p * coarse[i];
    const double v = s >= params.epsilon ? 1.0 : 1.0 + std::tanh(params.phi * (s - params.epsilon));
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return EdgeMap{std::move(out)};
}

}  // namespace scagan
