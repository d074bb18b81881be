#include "tcn/dynobj.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tcn/rng.hpp"

namespace tcn::dynobj {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  fail("unknown split '" + s + "'");
}

SequenceSpec sample_sequence(Split split, int t, uint64_t seed) {
  check(t >= 2, "sample_sequence: sequence length must be >= 2, got " + std::to_string(t));
  double size_min = split == Split::train ? kTrainSizeMin : kTestSizeMin;
  double size_max = split == Split::train ? kTrainSizeMax : kTestSizeMax;
  Rng rng(derive_seed(seed, "dynobj-sequence"));
  SequenceSpec spec;
  spec.t = t;
  spec.split = split;
  spec.start = {rng.uniform(size_min, size_max), rng.uniform(kCenterMin, kCenterMax),
                rng.uniform(kCenterMin, kCenterMax)};
  spec.end = {rng.uniform(size_min, size_max), rng.uniform(kCenterMin, kCenterMax),
              rng.uniform(kCenterMin, kCenterMax)};
  return spec;
}

std::array<double, 3> interpolate(const SequenceSpec& spec, int frame) {
  check(frame >= 0 && frame < spec.t,
        "interpolate: frame " + std::to_string(frame) + " outside [0, " + std::to_string(spec.t) + ")");
  double f = spec.t == 1 ? 0.0 : static_cast<double>(frame) / (spec.t - 1);
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i)
    out[static_cast<size_t>(i)] =
        spec.start[static_cast<size_t>(i)] +
        (spec.end[static_cast<size_t>(i)] - spec.start[static_cast<size_t>(i)]) * f;
  return out;
}

std::vector<float> render_frame(double size, double cx, double cy) {
  std::vector<float> img(static_cast<size_t>(kFrameSize) * kFrameSize, 0.0f);
  int w = static_cast<int>(std::lround(size));
  int icx = static_cast<int>(std::lround(cx));
  int icy = static_cast<int>(std::lround(cy));
  if (w <= 0) return img;
  int left = icx - w / 2;
  int top = icy - w / 2;
  int x0 = std::max(0, left), x1 = std::min(kFrameSize, left + w);
  int y0 = std::max(0, top), y1 = std::min(kFrameSize, top + w);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img[static_cast<size_t>(y) * kFrameSize + x] = 1.0f;
  return img;
}

std::vector<std::vector<float>> render_sequence(const SequenceSpec& spec) {
  std::vector<std::vector<float>> frames;
  frames.reserve(static_cast<size_t>(spec.t));
  for (int f = 0; f < spec.t; ++f) {
    auto [size, cx, cy] = interpolate(spec, f);
    frames.push_back(render_frame(size, cx, cy));
  }
  return frames;
}

void export_manifest(const std::vector<SequenceSpec>& specs, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "export_manifest: cannot open '" + path + "' for writing");
  out << "# dynobj-manifest v1 sequences=" << specs.size() << "\n";
  char buf[32];
  for (const auto& s : specs) {
    out << split_name(s.split) << ' ' << s.t;
    for (const auto& triple : {s.start, s.end})
      for (double v : triple) {
        std::snprintf(buf, sizeof buf, " %.6f", v);
        out << buf;
      }
    out << '\n';
  }
  check(out.good(), "export_manifest: write to '" + path + "' failed");
}

std::vector<SequenceSpec> import_manifest(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "import_manifest: cannot open '" + path + "'");
  std::vector<SequenceSpec> out;
  std::string line;
  int line_no = 0;
  auto parse_error = [&](const std::string& why) {
    fail("import_manifest: " + path + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    SequenceSpec s;
    std::string split;
    if (!(is >> split >> s.t)) parse_error("expected split and sequence length");
    try {
      s.split = parse_split(split);
    } catch (const std::invalid_argument& ex) {
      parse_error(ex.what());
    }
    if (s.t < 2) parse_error("sequence length must be >= 2");
    for (auto* triple : {&s.start, &s.end})
      for (auto& v : *triple)
        if (!(is >> v)) parse_error("truncated endpoint values");
    std::string extra;
    if (is >> extra) parse_error("trailing token '" + extra + "'");
    out.push_back(s);
  }
  return out;
}

}  // namespace tcn::dynobj
