#include "tcn/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "tcn/csv.hpp"

namespace tcn {

PcaResult pca(const std::vector<double>& data, int rows, int cols) {
  check(rows >= 2, "pca: need at least 2 samples, got " + std::to_string(rows));
  check(static_cast<int64_t>(data.size()) == static_cast<int64_t>(rows) * cols,
        "pca: data length does not match rows*cols");
  PcaResult result;
  result.mean.assign(static_cast<size_t>(cols), 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      result.mean[static_cast<size_t>(c)] += data[static_cast<size_t>(r) * cols + c];
  for (double& m : result.mean) m /= rows;

  Eigen::MatrixXd centered(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      centered(r, c) = data[static_cast<size_t>(r) * cols + c] - result.mean[static_cast<size_t>(c)];
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(rows);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  check(solver.info() == Eigen::Success, "pca: eigendecomposition failed");
  Eigen::VectorXd eigenvalues = solver.eigenvalues();
  Eigen::MatrixXd eigenvectors = solver.eigenvectors();

  double total = 0.0;
  for (int i = 0; i < cols; ++i) total += std::max(0.0, eigenvalues(i));
  check(total >= 0.0, "pca: negative total variance");

  // Eigen returns ascending order; emit descending with a fixed sign rule.
  for (int i = cols - 1; i >= 0; --i) {
    Eigen::VectorXd v = eigenvectors.col(i);
    int arg = 0;
    for (int c = 1; c < cols; ++c)
      if (std::abs(v(c)) > std::abs(v(arg))) arg = c;
    if (v(arg) < 0) v = -v;
    result.components.emplace_back(v.data(), v.data() + cols);
    result.explained_variance_ratio.push_back(total == 0.0 ? 0.0
                                                           : std::max(0.0, eigenvalues(i)) / total);
  }
  result.projections.resize(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (int c = 0; c < cols; ++c)
      dot += centered(r, c) * result.components[0][static_cast<size_t>(c)];
    result.projections[static_cast<size_t>(r)] = dot;
  }
  return result;
}

DimGroupCounts group_by_dimension(const std::vector<vaec::ManifestEntry>& entries,
                                  const std::vector<uint8_t>& per_problem_correct) {
  check(entries.size() == per_problem_correct.size(),
        "group_by_dimension: correctness vector does not match entries");
  DimGroupCounts out;
  for (size_t i = 0; i < entries.size(); ++i) {
    auto& slot = out.by_dim[vaec::dim_name(entries[i].relevant_dim)];
    slot.second += 1;
    out.total += 1;
    if (per_problem_correct[i]) {
      slot.first += 1;
      out.correct += 1;
    }
  }
  return out;
}

std::vector<PerDimRow> per_dimension_accuracy(AnalogyScorer<float>& scorer,
                                              const ExperimentConfig& cfg, RenderCache& cache,
                                              const std::vector<int>& indices) {
  std::vector<PerDimRow> rows;
  for (int index : indices) {
    auto entries = eval_manifest(cfg, index);
    EvalOutcome outcome = evaluate_problems(scorer, entries, cfg, cache);
    DimGroupCounts groups = group_by_dimension(entries, outcome.per_problem_correct);
    // Partition identity: grouped counts must reaggregate exactly.
    int regroup_correct = 0, regroup_total = 0;
    for (const auto& [dim, counts] : groups.by_dim) {
      regroup_correct += counts.first;
      regroup_total += counts.second;
    }
    check(regroup_correct == outcome.correct && regroup_total == outcome.total,
          "per_dimension_accuracy: grouped counts do not reaggregate");
    for (const auto& [dim, counts] : groups.by_dim)
      rows.push_back({index, dim, counts.first, counts.second});
  }
  return rows;
}

double linear_fit_r2(const std::vector<std::pair<double, double>>& points) {
  size_t n = points.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return (sxy * sxy) / (sxx * syy);
}

namespace {

// The four term embeddings of each problem, normalized the way the trained
// model normalizes (candidate contexts for tcn-style methods, flat batches for
// batch-style methods), plus matching normalized level values per dimension.
struct TermData {
  std::vector<double> embeddings;            // (4P, E) normalized
  std::vector<std::array<double, 4>> values; // (4P) normalized level values per dim
  std::vector<vaec::Dim> problem_dim;        // (4P) relevant dim of the owning problem
};

TermData collect_term_data(AnalogyScorer<float>& scorer, const ExperimentConfig& cfg,
                           RenderCache& cache, const std::vector<vaec::ManifestEntry>& entries) {
  NoGradGuard guard;
  TermData data;
  int e_dim = scorer.config().embedding;
  int problem_count = static_cast<int>(entries.size());
  NormMethod method = scorer.norm_spec().method;
  bool context_style = method == NormMethod::tcn || method == NormMethod::tcn_plus_batch ||
                       method == NormMethod::misaligned_tcn ||
                       method == NormMethod::sliding_window_tcn || method == NormMethod::layer;
  bool batch_style = method == NormMethod::batch || method == NormMethod::sub_batch ||
                     method == NormMethod::batch_train_stats ||
                     method == NormMethod::batch_plus_dropout;

  int side = cache.side();
  int elems = cache.image_elems();
  for (int first = 0; first < problem_count; first += cfg.batch_size) {
    int count = std::min(cfg.batch_size, problem_count - first);
    // Terms A, B, C, D per problem.
    Tensor<float> images({count * 4, 3, side, side});
    std::vector<std::array<int, 4>> levels(static_cast<size_t>(count) * 4);
    for (int p = 0; p < count; ++p) {
      const auto& entry = entries[static_cast<size_t>(first + p)];
      const vaec::ObjectSpec d = entry.candidates[static_cast<size_t>(entry.answer_index)];
      const vaec::ObjectSpec* objs[4] = {&entry.a, &entry.b, &entry.c, &d};
      for (int o = 0; o < 4; ++o) {
        int idx = cache.index_of(*objs[o]);
        std::memcpy(images.values().data() + (static_cast<size_t>(p) * 4 + o) * elems,
                    cache.image(idx), static_cast<size_t>(elems) * sizeof(float));
        levels[static_cast<size_t>(p) * 4 + static_cast<size_t>(o)] = objs[o]->levels;
      }
    }
    Tensor<float> emb = scorer.encode(images);
    Tensor<float> normalized = emb;
    if (context_style) {
      ContextBatch<float> ctx{reshape(emb, {count, 4, e_dim}), {}};
      NormSpec<float> spec = scorer.norm_spec();
      if (method == NormMethod::misaligned_tcn || method == NormMethod::sliding_window_tcn ||
          method == NormMethod::tcn_plus_batch) {
        // Term-level analysis always uses the problem's own terms as context.
        spec.method = NormMethod::tcn;
      }
      auto [out, stats] = normalize(ctx, spec, NormEnv{false, nullptr});
      normalized = reshape(out.values, {count * 4, e_dim});
    } else if (batch_style) {
      ContextBatch<float> flat{reshape(emb, {count * 4, 1, e_dim}), {}};
      NormSpec<float> spec = scorer.norm_spec();
      if (method != NormMethod::batch_train_stats) spec.method = NormMethod::batch;
      auto [out, stats] = normalize(flat, spec, NormEnv{false, nullptr});
      normalized = reshape(out.values, {count * 4, e_dim});
    }
    for (float v : normalized.values()) data.embeddings.push_back(static_cast<double>(v));

    // Matching normalization of the underlying level values.
    for (int p = 0; p < count; ++p) {
      const auto& entry = entries[static_cast<size_t>(first + p)];
      for (int o = 0; o < 4; ++o) {
        std::array<double, 4> raw{};
        for (int d = 0; d < 4; ++d)
          raw[static_cast<size_t>(d)] = static_cast<double>(
              levels[static_cast<size_t>(p) * 4 + static_cast<size_t>(o)][static_cast<size_t>(d)]);
        data.values.push_back(raw);
        data.problem_dim.push_back(entry.relevant_dim);
      }
    }
    size_t base = data.values.size() - static_cast<size_t>(count) * 4;
    if (context_style) {
      // Per problem, per dim: normalize the 4 term values.
      for (int p = 0; p < count; ++p)
        for (int d = 0; d < 4; ++d) {
          double mu = 0;
          for (int o = 0; o < 4; ++o)
            mu += data.values[base + static_cast<size_t>(p) * 4 + o][static_cast<size_t>(d)];
          mu /= 4.0;
          double var = 0;
          for (int o = 0; o < 4; ++o) {
            double dv =
                data.values[base + static_cast<size_t>(p) * 4 + o][static_cast<size_t>(d)] - mu;
            var += dv * dv;
          }
          var /= 4.0;
          double sd = std::sqrt(var + cfg.norm.eps);
          for (int o = 0; o < 4; ++o) {
            auto& slot = data.values[base + static_cast<size_t>(p) * 4 + o][static_cast<size_t>(d)];
            slot = (slot - mu) / sd;
          }
        }
    } else if (batch_style) {
      // Per dim over the whole batch of 4*count values.
      for (int d = 0; d < 4; ++d) {
        double mu = 0;
        size_t m = static_cast<size_t>(count) * 4;
        for (size_t o = 0; o < m; ++o) mu += data.values[base + o][static_cast<size_t>(d)];
        mu /= static_cast<double>(m);
        double var = 0;
        for (size_t o = 0; o < m; ++o) {
          double dv = data.values[base + o][static_cast<size_t>(d)] - mu;
          var += dv * dv;
        }
        var /= static_cast<double>(m);
        double sd = std::sqrt(var + cfg.norm.eps);
        for (size_t o = 0; o < m; ++o) {
          auto& slot = data.values[base + o][static_cast<size_t>(d)];
          slot = (slot - mu) / sd;
        }
      }
    }
  }
  return data;
}

}  // namespace

EmbeddingReport embedding_report(AnalogyScorer<float>& scorer, const ExperimentConfig& cfg,
                                 RenderCache& cache,
                                 const std::vector<vaec::ManifestEntry>& entries) {
  TermData data = collect_term_data(scorer, cfg, cache, entries);
  int e_dim = scorer.config().embedding;
  int rows = static_cast<int>(data.values.size());
  PcaResult pc = pca(data.embeddings, rows, e_dim);

  EmbeddingReport report;
  report.pc1_ratio = pc.explained_variance_ratio.empty() ? 0.0 : pc.explained_variance_ratio[0];
  bool restrict = scorer.norm_spec().method != NormMethod::none;
  for (int d = 0; d < 4; ++d) {
    EmbeddingReport::DimFit fit;
    fit.dim = vaec::dim_name(static_cast<vaec::Dim>(d));
    for (int r = 0; r < rows; ++r) {
      if (restrict && data.problem_dim[static_cast<size_t>(r)] != static_cast<vaec::Dim>(d))
        continue;
      fit.points.push_back({data.values[static_cast<size_t>(r)][static_cast<size_t>(d)],
                            pc.projections[static_cast<size_t>(r)]});
    }
    fit.pairs = static_cast<int>(fit.points.size());
    fit.r2 = linear_fit_r2(fit.points);
    report.fits.push_back(std::move(fit));
  }
  return report;
}

void write_curve_csv(const std::string& path, const std::vector<CurveInput>& inputs,
                     uint64_t config_hash) {
  check(!inputs.empty(), "write_curve_csv: no inputs");
  std::vector<std::string> labels;
  for (const auto& in : inputs)
    if (std::find(labels.begin(), labels.end(), in.label) == labels.end())
      labels.push_back(in.label);
  size_t max_len = 0;
  for (const auto& in : inputs) max_len = std::max(max_len, in.losses.size());
  std::string header = "iteration";
  for (const auto& label : labels) header += "," + label;
  CsvWriter csv(path, config_hash, header);
  for (size_t it = 0; it < max_len; ++it) {
    std::vector<std::string> row{std::to_string(it + 1)};
    for (const auto& label : labels) {
      double sum = 0;
      int n = 0;
      for (const auto& in : inputs)
        if (in.label == label && it < in.losses.size()) {
          sum += in.losses[it];
          ++n;
        }
      row.push_back(n == 0 ? "NA" : fmt_g9(sum / n));
    }
    csv.row(row);
  }
  csv.close();
}

std::vector<double> mean_curve(const std::vector<CurveInput>& inputs, const std::string& label) {
  size_t max_len = 0;
  for (const auto& in : inputs)
    if (in.label == label) max_len = std::max(max_len, in.losses.size());
  std::vector<double> out;
  for (size_t it = 0; it < max_len; ++it) {
    double sum = 0;
    int n = 0;
    for (const auto& in : inputs)
      if (in.label == label && it < in.losses.size()) {
        sum += in.losses[it];
        ++n;
      }
    if (n > 0) out.push_back(sum / n);
  }
  return out;
}

int64_t iterations_to_halve(const std::vector<double>& losses) {
  if (losses.empty()) return -1;
  double target = losses[0] / 2.0;
  for (size_t i = 0; i < losses.size(); ++i)
    if (losses[i] <= target) return static_cast<int64_t>(i) + 1;
  return -1;
}

}  // namespace tcn
