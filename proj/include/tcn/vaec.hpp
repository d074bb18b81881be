#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tcn/common.hpp"

namespace tcn::vaec {

// Procedural regeneration of the visual analogy extrapolation dataset:
// objects on a 4-d grid of 42 discrete levels (brightness, size, x, y),
// proportional analogies A:B::C:D with six foils, two generalization regimes.

inline constexpr int kNumLevels = 42;
inline constexpr int kRegimeLevels = 7;  // levels per region/scale palette
inline constexpr int kNumFoils = 6;
inline constexpr int kNumCandidates = 7;
inline constexpr int kImageSize = 128;

enum class Dim { brightness = 0, size = 1, x = 2, y = 3 };

inline const char* dim_name(Dim d) {
  switch (d) {
    case Dim::brightness: return "brightness";
    case Dim::size: return "size";
    case Dim::x: return "x";
    case Dim::y: return "y";
  }
  fail("dim_name: unreachable");
}

Dim parse_dim(const std::string& s);

struct ObjectSpec {
  // Levels in [0, 41], indexed by Dim.
  std::array<int, 4> levels{};
  bool operator==(const ObjectSpec&) const = default;
};

struct AnalogyProblem {
  ObjectSpec a, b, c, d;
  std::array<ObjectSpec, kNumFoils> foils;
  Dim relevant_dim = Dim::brightness;
  std::string regime_tag;
};

enum class RegimeKind { translation, scale };

struct RegimeSpec {
  RegimeKind kind = RegimeKind::translation;
  int index = 1;  // 1..6

  static RegimeSpec translation(int region);
  static RegimeSpec scale(int scale);
  static RegimeSpec from_tag(const std::string& tag);

  // The 7 allowed levels (ascending, same palette on every dim). Translation
  // region r occupies the contiguous block [7(r-1), 7r-1]; scale s multiplies
  // the 1-based level values of the first block by s.
  std::array<int, kRegimeLevels> palette() const;
  std::string tag() const;        // e.g. "translation:1"
  std::string file_tag() const;   // filesystem-safe, e.g. "translation_1"
};

// Linear tiling of the physical ranges across the 42 levels: brightness
// 0.4..1.0, width 3..85 (odd integers), center 43..84.
double level_to_value(Dim dim, int level);

// Grayscale-free CHW float image.
struct Image {
  int channels = 0, height = 0, width = 0;
  std::vector<float> data;
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

// Green square on the mid-gray background; borders clip. Pure: identical
// specs give bit-identical images.
Image render_object(const ObjectSpec& spec);

// Box-average downsampling by an integer factor (the desk-scale path).
Image downsample(const Image& img, int factor);
Image render_object_scaled(const ObjectSpec& spec, int image_scale);

// Compact enumeration element: palette indices, not raw levels.
struct ProblemCore {
  Dim relevant_dim;
  std::array<int, 3> irrelevant;  // palette indices of the non-relevant dims, in Dim order
  int a, b, c, d;                 // palette indices on the relevant dim
};

// Every valid (relevant dim, irrelevant triple, a, b, c, d) with
// b - a == d - c != 0 and a != c, in deterministic lexicographic order.
std::vector<ProblemCore> enumerate_analogies(const RegimeSpec& regime);
int64_t enumerate_count(const RegimeSpec& regime);

AnalogyProblem materialize(const RegimeSpec& regime, const ProblemCore& core);

// n distinct problems drawn without replacement via a seeded shuffle of the
// enumeration order; foils attached, relevant dimension annotated.
std::vector<AnalogyProblem> sample_problems(const RegimeSpec& regime, int n, uint64_t seed);

struct CandidateSet {
  std::array<ObjectSpec, kNumCandidates> candidates;
  int answer_index = 0;
};

// D plus the six foils in a seeded random order.
CandidateSet make_candidates(const AnalogyProblem& problem, uint64_t seed);

// One manifest entry: a problem with its candidates already ordered. The
// manifest stores level indices only; images are re-rendered on demand.
struct ManifestEntry {
  std::string regime_tag;
  Dim relevant_dim = Dim::brightness;
  ObjectSpec a, b, c;
  std::array<ObjectSpec, kNumCandidates> candidates;
  int answer_index = 0;
  bool operator==(const ManifestEntry&) const = default;
};

std::vector<ManifestEntry> build_manifest(const RegimeSpec& regime, int n, uint64_t seed);
ManifestEntry to_entry(const AnalogyProblem& problem, uint64_t seed);
AnalogyProblem entry_to_problem(const ManifestEntry& entry);

void export_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> import_manifest(const std::string& path);

}  // namespace tcn::vaec
