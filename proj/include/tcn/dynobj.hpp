#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tcn/common.hpp"

namespace tcn::dynobj {

// Dynamic object prediction task: sequences of grayscale frames showing a
// white square that smoothly moves and resizes. Training uses small sizes,
// evaluation large ones.

inline constexpr int kFrameSize = 64;
inline constexpr double kCenterMin = 16.0, kCenterMax = 48.0;
inline constexpr double kTrainSizeMin = 3.0, kTrainSizeMax = 13.0;
inline constexpr double kTestSizeMin = 13.0, kTestSizeMax = 31.0;

enum class Split { train, test };

inline const char* split_name(Split s) { return s == Split::train ? "train" : "test"; }
Split parse_split(const std::string& s);

struct SequenceSpec {
  int t = 20;
  // (size, x, y) endpoints; frames linearly interpolate between them.
  std::array<double, 3> start{}, end{};
  Split split = Split::train;
  bool operator==(const SequenceSpec&) const = default;
};

// Endpoints drawn uniformly and independently per dimension from the split's
// ranges; deterministic given seed.
SequenceSpec sample_sequence(Split split, int t, uint64_t seed);

// Affine interpolant at frame index: start + (end-start) * frame/(t-1).
std::array<double, 3> interpolate(const SequenceSpec& spec, int frame);

// One frame: continuous size/center rounded to the nearest integer, square
// pixels 1.0 on a 0.0 background, clipped at the borders.
std::vector<float> render_frame(double size, double cx, double cy);
std::vector<std::vector<float>> render_sequence(const SequenceSpec& spec);

void export_manifest(const std::vector<SequenceSpec>& specs, const std::string& path);
std::vector<SequenceSpec> import_manifest(const std::string& path);

}  // namespace tcn::dynobj
