#include "tcn/vaec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tcn/rng.hpp"

namespace tcn::vaec {

Dim parse_dim(const std::string& s) {
  if (s == "brightness") return Dim::brightness;
  if (s == "size") return Dim::size;
  if (s == "x") return Dim::x;
  if (s == "y") return Dim::y;
  fail("unknown dimension '" + s + "'");
}

RegimeSpec RegimeSpec::translation(int region) {
  check(region >= 1 && region <= 6, "translation region must be in 1..6, got " +
                                        std::to_string(region));
  return RegimeSpec{RegimeKind::translation, region};
}

RegimeSpec RegimeSpec::scale(int scale) {
  check(scale >= 1 && scale <= 6, "scale index must be in 1..6, got " + std::to_string(scale));
  return RegimeSpec{RegimeKind::scale, scale};
}

RegimeSpec RegimeSpec::from_tag(const std::string& tag) {
  auto sep = tag.find(':');
  check(sep != std::string::npos, "bad regime tag '" + tag + "'");
  std::string kind = tag.substr(0, sep);
  int index = 0;
  try {
    index = std::stoi(tag.substr(sep + 1));
  } catch (const std::exception&) {
    fail("bad regime tag '" + tag + "'");
  }
  if (kind == "translation") return translation(index);
  if (kind == "scale") return scale(index);
  fail("bad regime tag '" + tag + "'");
}

std::array<int, kRegimeLevels> RegimeSpec::palette() const {
  std::array<int, kRegimeLevels> out{};
  for (int i = 0; i < kRegimeLevels; ++i) {
    if (kind == RegimeKind::translation) {
      out[static_cast<size_t>(i)] = kRegimeLevels * (index - 1) + i;
    } else {
      // 1-based level values 1..7 multiplied by the scale, back to 0-based.
      out[static_cast<size_t>(i)] = (i + 1) * index - 1;
    }
  }
  return out;
}

std::string RegimeSpec::tag() const {
  return (kind == RegimeKind::translation ? "translation:" : "scale:") + std::to_string(index);
}

std::string RegimeSpec::file_tag() const {
  return (kind == RegimeKind::translation ? "translation_" : "scale_") + std::to_string(index);
}

double level_to_value(Dim dim, int level) {
  check(level >= 0 && level < kNumLevels,
        "level " + std::to_string(level) + " outside [0, 41] for " + dim_name(dim));
  switch (dim) {
    case Dim::brightness: return 0.4 + 0.6 * level / 41.0;
    case Dim::size: return 3.0 + 2.0 * level;
    case Dim::x:
    case Dim::y: return 43.0 + level;
  }
  fail("level_to_value: unreachable");
}

Image render_object(const ObjectSpec& spec) {
  Image img;
  img.channels = 3;
  img.height = kImageSize;
  img.width = kImageSize;
  img.data.assign(static_cast<size_t>(3) * kImageSize * kImageSize, 0.5f);
  float g = static_cast<float>(level_to_value(Dim::brightness, spec.levels[0]));
  int w = static_cast<int>(level_to_value(Dim::size, spec.levels[1]));
  int cx = static_cast<int>(level_to_value(Dim::x, spec.levels[2]));
  int cy = static_cast<int>(level_to_value(Dim::y, spec.levels[3]));
  int left = cx - w / 2;
  int top = cy - w / 2;
  int x0 = std::max(0, left), x1 = std::min(kImageSize, left + w);
  int y0 = std::max(0, top), y1 = std::min(kImageSize, top + w);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      size_t base = static_cast<size_t>(y) * kImageSize + x;
      img.data[base] = 0.0f;                                                  // R
      img.data[static_cast<size_t>(kImageSize) * kImageSize + base] = g;      // G
      img.data[2 * static_cast<size_t>(kImageSize) * kImageSize + base] = 0.0f;  // B
    }
  }
  return img;
}

Image downsample(const Image& img, int factor) {
  check(factor >= 1, "downsample: factor must be >= 1");
  if (factor == 1) return img;
  check(img.height % factor == 0 && img.width % factor == 0,
        "downsample: " + std::to_string(img.height) + "x" + std::to_string(img.width) +
            " not divisible by " + std::to_string(factor));
  Image out;
  out.channels = img.channels;
  out.height = img.height / factor;
  out.width = img.width / factor;
  out.data.assign(static_cast<size_t>(out.channels) * out.height * out.width, 0.f);
  float inv = 1.0f / static_cast<float>(factor * factor);
  for (int c = 0; c < out.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        float s = 0.f;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx)
            s += img.at(c, y * factor + dy, x * factor + dx);
        out.data[(static_cast<size_t>(c) * out.height + y) * out.width + x] = s * inv;
      }
  return out;
}

Image render_object_scaled(const ObjectSpec& spec, int image_scale) {
  return downsample(render_object(spec), image_scale);
}

std::vector<ProblemCore> enumerate_analogies(const RegimeSpec& regime) {
  (void)regime.palette();  // validates the index
  std::vector<ProblemCore> out;
  out.reserve(192080);
  constexpr int L = kRegimeLevels;
  for (int dim = 0; dim < 4; ++dim) {
    for (int i0 = 0; i0 < L; ++i0)
      for (int i1 = 0; i1 < L; ++i1)
        for (int i2 = 0; i2 < L; ++i2)
          for (int delta = -(L - 1); delta <= L - 1; ++delta) {
            if (delta == 0) continue;
            int lo = std::max(0, -delta), hi = std::min(L - 1, L - 1 - delta);
            for (int a = lo; a <= hi; ++a)
              for (int c = lo; c <= hi; ++c) {
                if (a == c) continue;
                out.push_back(ProblemCore{static_cast<Dim>(dim),
                                          {i0, i1, i2},
                                          a, a + delta, c, c + delta});
              }
          }
  }
  return out;
}

int64_t enumerate_count(const RegimeSpec& regime) {
  return static_cast<int64_t>(enumerate_analogies(regime).size());
}

AnalogyProblem materialize(const RegimeSpec& regime, const ProblemCore& core) {
  auto pal = regime.palette();
  int rd = static_cast<int>(core.relevant_dim);
  ObjectSpec base;
  int ir = 0;
  for (int d = 0; d < 4; ++d) {
    if (d == rd) continue;
    base.levels[static_cast<size_t>(d)] = pal[static_cast<size_t>(core.irrelevant[static_cast<size_t>(ir++)])];
  }
  auto with_level = [&](int palette_idx) {
    ObjectSpec o = base;
    o.levels[static_cast<size_t>(rd)] = pal[static_cast<size_t>(palette_idx)];
    return o;
  };
  AnalogyProblem p;
  p.a = with_level(core.a);
  p.b = with_level(core.b);
  p.c = with_level(core.c);
  p.d = with_level(core.d);
  int fi = 0;
  for (int lvl = 0; lvl < kRegimeLevels; ++lvl)
    if (lvl != core.d) p.foils[static_cast<size_t>(fi++)] = with_level(lvl);
  p.relevant_dim = core.relevant_dim;
  p.regime_tag = regime.tag();
  return p;
}

std::vector<AnalogyProblem> sample_problems(const RegimeSpec& regime, int n, uint64_t seed) {
  auto cores = enumerate_analogies(regime);
  check(n >= 0 && static_cast<size_t>(n) <= cores.size(),
        "sample_problems: requested " + std::to_string(n) + " problems but only " +
            std::to_string(cores.size()) + " exist");
  Rng rng(derive_seed(seed, "vaec-sample"));
  rng.shuffle(cores);
  std::vector<AnalogyProblem> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(materialize(regime, cores[static_cast<size_t>(i)]));
  return out;
}

CandidateSet make_candidates(const AnalogyProblem& problem, uint64_t seed) {
  CandidateSet set;
  set.candidates[0] = problem.d;
  for (int i = 0; i < kNumFoils; ++i) set.candidates[static_cast<size_t>(i + 1)] = problem.foils[static_cast<size_t>(i)];
  std::vector<int> order(kNumCandidates);
  for (int i = 0; i < kNumCandidates; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng(derive_seed(seed, "vaec-candidates"));
  rng.shuffle(order);
  std::array<ObjectSpec, kNumCandidates> shuffled;
  for (int i = 0; i < kNumCandidates; ++i) {
    shuffled[static_cast<size_t>(i)] = set.candidates[static_cast<size_t>(order[static_cast<size_t>(i)])];
    if (order[static_cast<size_t>(i)] == 0) set.answer_index = i;
  }
  set.candidates = shuffled;
  return set;
}

ManifestEntry to_entry(const AnalogyProblem& problem, uint64_t seed) {
  ManifestEntry e;
  e.regime_tag = problem.regime_tag;
  e.relevant_dim = problem.relevant_dim;
  e.a = problem.a;
  e.b = problem.b;
  e.c = problem.c;
  CandidateSet set = make_candidates(problem, seed);
  e.candidates = set.candidates;
  e.answer_index = set.answer_index;
  return e;
}

AnalogyProblem entry_to_problem(const ManifestEntry& entry) {
  AnalogyProblem p;
  p.regime_tag = entry.regime_tag;
  p.relevant_dim = entry.relevant_dim;
  p.a = entry.a;
  p.b = entry.b;
  p.c = entry.c;
  p.d = entry.candidates[static_cast<size_t>(entry.answer_index)];
  int fi = 0;
  for (int i = 0; i < kNumCandidates; ++i)
    if (i != entry.answer_index) p.foils[static_cast<size_t>(fi++)] = entry.candidates[static_cast<size_t>(i)];
  return p;
}

std::vector<ManifestEntry> build_manifest(const RegimeSpec& regime, int n, uint64_t seed) {
  auto problems = sample_problems(regime, n, seed);
  std::vector<ManifestEntry> out;
  out.reserve(problems.size());
  for (size_t i = 0; i < problems.size(); ++i)
    out.push_back(to_entry(problems[i], derive_seed(seed, "vaec-entry", i)));
  return out;
}

void export_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "export_manifest: cannot open '" + path + "' for writing");
  out << "# vaec-manifest v1 problems=" << entries.size() << "\n";
  for (const auto& e : entries) {
    out << e.regime_tag << ' ' << dim_name(e.relevant_dim);
    auto emit = [&](const ObjectSpec& o) {
      for (int lvl : o.levels) out << ' ' << lvl;
    };
    emit(e.a);
    emit(e.b);
    emit(e.c);
    for (const auto& c : e.candidates) emit(c);
    out << ' ' << e.answer_index << '\n';
  }
  check(out.good(), "export_manifest: write to '" + path + "' failed");
}

std::vector<ManifestEntry> import_manifest(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "import_manifest: cannot open '" + path + "'");
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  auto parse_error = [&](const std::string& why) {
    fail("import_manifest: " + path + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    ManifestEntry e;
    std::string dim;
    if (!(is >> e.regime_tag >> dim)) parse_error("expected regime tag and dimension");
    try {
      e.relevant_dim = parse_dim(dim);
      RegimeSpec::from_tag(e.regime_tag);
    } catch (const std::invalid_argument& ex) {
      parse_error(ex.what());
    }
    auto read_obj = [&](ObjectSpec& o) {
      for (auto& lvl : o.levels) {
        if (!(is >> lvl)) parse_error("truncated object levels");
        if (lvl < 0 || lvl >= kNumLevels)
          parse_error("level " + std::to_string(lvl) + " outside [0, 41]");
      }
    };
    read_obj(e.a);
    read_obj(e.b);
    read_obj(e.c);
    for (auto& c : e.candidates) read_obj(c);
    if (!(is >> e.answer_index)) parse_error("missing answer index");
    if (e.answer_index < 0 || e.answer_index >= kNumCandidates)
      parse_error("answer index " + std::to_string(e.answer_index) + " outside [0, 7)");
    std::string extra;
    if (is >> extra) parse_error("trailing token '" + extra + "'");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace tcn::vaec
