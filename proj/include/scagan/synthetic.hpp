#pragma once

// Procedural stand-in for a person-image dataset: a textured figure drawn
// over an 18-joint skeleton. Used by tests, the smoke runs and `scagan synth`.

#include <cstdint>
#include <filesystem>
#include <random>
#include <utility>

#include "scagan/data.hpp"
#include "scagan/dataset.hpp"

namespace scagan::synthetic {

struct Appearance {
  std::array<std::uint8_t, 3> background{};
  std::array<std::uint8_t, 3> shirt{};
  std::array<std::uint8_t, 3> pants{};
  std::array<std::uint8_t, 3> skin{};
  std::array<std::uint8_t, 3> hair{};
  double stripe_period = 4.0;  // pixels at 64 rows
};

struct Person {
  ImageU8 image;
  Keypoints keypoints;  // integer pixel coordinates
};

Appearance random_appearance(std::mt19937_64& rng);
/// Random pose in pixel coordinates; ears may be marked invisible.
Keypoints random_pose(int height, int width, std::mt19937_64& rng);
Person render(const Appearance& look, const Keypoints& pose, int height, int width);

/// Same person in two different poses.
std::pair<Person, Person> person_pair(int height, int width, std::uint64_t seed);
TrainingPair training_pair(int height, int width, std::uint64_t seed, const DataConfig& config);

/// Writes images/, keypoints.csv and pairs.csv (all ordered pose pairs per person).
void write_dataset(const std::filesystem::path& dir, int people, int poses_per_person, int height,
                   int width, std::uint64_t seed);

}  // namespace scagan::synthetic
