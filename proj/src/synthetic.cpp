#include "scagan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace scagan::synthetic {
namespace {

using Rgb = std::array<std::uint8_t, 3>;

// Standing figure in unit coordinates (u across, v down), COCO-18 order.
constexpr std::array<std::array<double, 2>, kNumJoints> kRestPose = {{
    {0.50, 0.12}, {0.50, 0.21}, {0.37, 0.23}, {0.32, 0.38}, {0.30, 0.52}, {0.63, 0.23},
    {0.68, 0.38}, {0.70, 0.52}, {0.43, 0.53}, {0.42, 0.71}, {0.42, 0.89}, {0.57, 0.53},
    {0.58, 0.71}, {0.58, 0.89}, {0.47, 0.10}, {0.53, 0.10}, {0.44, 0.11}, {0.56, 0.11},
}};

Rgb random_color(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return {static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)),
          static_cast<std::uint8_t>(d(rng))};
}

void rotate_about(Joint& j, const Joint& pivot, double angle) {
  const double dx = j.x - pivot.x, dy = j.y - pivot.y;
  const double c = std::cos(angle), s = std::sin(angle);
  j.x = pivot.x + c * dx - s * dy;
  j.y = pivot.y + s * dx + c * dy;
}

double segment_distance(double px, double py, const Joint& a, const Joint& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

bool inside_quad(double px, double py, const std::array<Joint, 4>& q) {
  bool inside = false;
  for (std::size_t i = 0, j = 3; i < 4; j = i++) {
    if ((q[i].y > py) != (q[j].y > py) &&
        px < (q[j].x - q[i].x) * (py - q[i].y) / (q[j].y - q[i].y) + q[i].x) {
      inside = !inside;
    }
  }
  return inside;
}

}  // namespace

Appearance random_appearance(std::mt19937_64& rng) {
  Appearance a;
  a.background = random_color(rng, 170, 240);
  a.shirt = random_color(rng, 20, 230);
  a.pants = random_color(rng, 10, 160);
  std::uniform_int_distribution<int> tone(150, 225);
  const int t = tone(rng);
  a.skin = {static_cast<std::uint8_t>(t), static_cast<std::uint8_t>(t * 0.8),
            static_cast<std::uint8_t>(t * 0.65)};
  a.hair = random_color(rng, 10, 90);
  std::uniform_real_distribution<double> period(3.0, 7.0);
  a.stripe_period = period(rng);
  return a;
}

Keypoints random_pose(int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> arm(-0.9, 0.9), forearm(-0.7, 0.7), leg(-0.3, 0.3),
      shift(-0.06, 0.06), coin(0.0, 1.0);
  Keypoints kp;
  const double dx = shift(rng) * width;
  for (int j = 0; j < kNumJoints; ++j) {
    kp.joints[static_cast<std::size_t>(j)] =
        Joint{kRestPose[static_cast<std::size_t>(j)][0] * width + dx,
              kRestPose[static_cast<std::size_t>(j)][1] * height, true};
  }
  auto& J = kp.joints;
  // Right arm (2-3-4), left arm (5-6-7), right leg (8-9-10), left leg (11-12-13).
  const double ra = arm(rng), la = arm(rng);
  rotate_about(J[3], J[2], ra);
  rotate_about(J[4], J[2], ra);
  rotate_about(J[4], J[3], forearm(rng));
  rotate_about(J[6], J[5], la);
  rotate_about(J[7], J[5], la);
  rotate_about(J[7], J[6], forearm(rng));
  const double rl = leg(rng), ll = leg(rng);
  rotate_about(J[9], J[8], rl);
  rotate_about(J[10], J[8], rl);
  rotate_about(J[12], J[11], ll);
  rotate_about(J[13], J[11], ll);
  for (Joint& j : J) {
    j.x = std::clamp(std::round(j.x), 0.0, width - 1.0);
    j.y = std::clamp(std::round(j.y), 0.0, height - 1.0);
  }
  for (std::size_t ear : {16u, 17u}) {
    if (coin(rng) < 0.3) J[ear] = Joint{};
  }
  return kp;
}

Person render(const Appearance& look, const Keypoints& pose, int height, int width) {
  ImageU8 img(height, width, 3);
  const auto& J = pose.joints;
  const double scale = height / 64.0;
  const double limb = 2.6 * scale, leg_r = 3.0 * scale, head_r = 5.0 * scale;
  const std::array<Joint, 4> torso = {J[2], J[5], J[11], J[8]};
  const double period = look.stripe_period * scale;
  auto put = [&](int y, int x, const Rgb& c, double shade = 1.0) {
    for (int ch = 0; ch < 3; ++ch) {
      img.at(y, x, ch) = static_cast<std::uint8_t>(std::clamp(c[static_cast<std::size_t>(ch)] * shade, 0.0, 255.0));
    }
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double px = x, py = y;
      // Soft vertical gradient on the background.
      put(y, x, look.background, 0.9 + 0.1 * y / height);
      const bool legs = segment_distance(px, py, J[8], J[9]) < leg_r ||
                        segment_distance(px, py, J[9], J[10]) < leg_r ||
                        segment_distance(px, py, J[11], J[12]) < leg_r ||
                        segment_distance(px, py, J[12], J[13]) < leg_r;
      if (legs) put(y, x, look.pants, 0.85 + 0.15 * std::sin(px * 0.9));
      const double stripe = std::sin(2.0 * std::numbers::pi * py / period) > 0.0 ? 1.0 : 0.6;
      if (inside_quad(px, py, torso) || segment_distance(px, py, J[2], J[5]) < limb) {
        put(y, x, look.shirt, stripe);
      }
      if (segment_distance(px, py, J[2], J[3]) < limb || segment_distance(px, py, J[5], J[6]) < limb) {
        put(y, x, look.shirt, stripe);
      }
      if (segment_distance(px, py, J[3], J[4]) < limb * 0.8 ||
          segment_distance(px, py, J[6], J[7]) < limb * 0.8 ||
          segment_distance(px, py, J[1], J[0]) < limb * 0.8) {
        put(y, x, look.skin);
      }
      const double hx = px - J[0].x, hy = py - J[0].y;
      if (hx * hx + hy * hy < head_r * head_r) {
        put(y, x, hy < -head_r * 0.2 ? look.hair : look.skin);
      }
    }
  }
  return Person{std::move(img), pose};
}

std::pair<Person, Person> person_pair(int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Appearance look = random_appearance(rng);
  const Keypoints a = random_pose(height, width, rng);
  const Keypoints b = random_pose(height, width, rng);
  return {render(look, a, height, width), render(look, b, height, width)};
}

TrainingPair training_pair(int height, int width, std::uint64_t seed, const DataConfig& config) {
  auto [src, tgt] = person_pair(height, width, seed);
  return make_training_pair("synthetic_" + std::to_string(seed), src.image, tgt.image,
                            src.keypoints, tgt.keypoints, config);
}

void write_dataset(const std::filesystem::path& dir, int people, int poses_per_person, int height,
                   int width, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  std::ofstream kp_out(dir / "keypoints.csv");
  std::ofstream pairs_out(dir / "pairs.csv");
  kp_out << "name,keypoints_y,keypoints_x\n";
  pairs_out << "from,to\n";
  std::mt19937_64 rng(seed);
  for (int p = 0; p < people; ++p) {
    const Appearance look = random_appearance(rng);
    std::vector<std::string> names;
    for (int k = 0; k < poses_per_person; ++k) {
      const Person person = render(look, random_pose(height, width, rng), height, width);
      const std::string name = "person" + std::to_string(p) + "_pose" + std::to_string(k) + ".png";
      write_png(dir / "images" / name, person.image);
      std::string ys = "[", xs = "[";
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        const Joint& jt = person.keypoints.joints[j];
        const std::string sep = j ? ", " : "";
        ys += sep + std::to_string(jt.visible ? static_cast<int>(jt.y) : -1);
        xs += sep + std::to_string(jt.visible ? static_cast<int>(jt.x) : -1);
      }
      kp_out << name << ",\"" << ys << "]\",\"" << xs << "]\"\n";
      names.push_back(name);
    }
    for (std::size_t a = 0; a < names.size(); ++a)
      for (std::size_t b = 0; b < names.size(); ++b)
        if (a != b) pairs_out << names[a] << ',' << names[b] << '\n';
  }
}

}  // namespace scagan::synthetic
