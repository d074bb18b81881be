#pragma once

#include <map>
#include <string>
#include <vector>

#include "tcn/training.hpp"

namespace tcn {

// Post-hoc analyses: PCA over learned embeddings, per-dimension accuracy
// breakdown, and training-curve comparison.

struct PcaResult {
  // Orthonormal components ordered by decreasing explained variance.
  std::vector<std::vector<double>> components;
  std::vector<double> explained_variance_ratio;
  std::vector<double> projections;  // inputs onto the first component
  std::vector<double> mean;
};

// Mean-centered eigendecomposition of the covariance matrix. Sign convention:
// each component's largest-magnitude loading is positive.
PcaResult pca(const std::vector<double>& data, int rows, int cols);

// Correctness counts grouped by the problems' relevant dimension. The grouped
// counts reaggregate exactly to the overall accuracy.
struct DimGroupCounts {
  std::map<std::string, std::pair<int, int>> by_dim;  // dim -> (correct, total)
  int correct = 0;
  int total = 0;
};

DimGroupCounts group_by_dimension(const std::vector<vaec::ManifestEntry>& entries,
                                  const std::vector<uint8_t>& per_problem_correct);

// Per-dimension accuracy sweep over regions/scales; one row per (index, dim).
struct PerDimRow {
  int index;
  std::string dim;
  int correct;
  int total;
};

std::vector<PerDimRow> per_dimension_accuracy(AnalogyScorer<float>& scorer,
                                              const ExperimentConfig& cfg, RenderCache& cache,
                                              const std::vector<int>& indices);

// PCA + linear-fit report for the learned embeddings of one region's
// problems. Embeddings (and the underlying level values) are normalized with
// the run's method before analysis; plots are restricted per dimension for
// normalized variants.
struct EmbeddingReport {
  double pc1_ratio = 0.0;
  struct DimFit {
    std::string dim;
    double r2 = 0.0;
    int pairs = 0;
    std::vector<std::pair<double, double>> points;  // (underlying, pc1)
  };
  std::vector<DimFit> fits;
};

EmbeddingReport embedding_report(AnalogyScorer<float>& scorer, const ExperimentConfig& cfg,
                                 RenderCache& cache,
                                 const std::vector<vaec::ManifestEntry>& entries);

// Squared Pearson correlation of a linear fit.
double linear_fit_r2(const std::vector<std::pair<double, double>>& points);

// Aligned loss curves: one column per label, averaging seeds within a label;
// rows where a label has no value carry the explicit marker "NA".
struct CurveInput {
  std::string label;
  std::vector<float> losses;
};

void write_curve_csv(const std::string& path, const std::vector<CurveInput>& inputs,
                     uint64_t config_hash);

// Mean loss curve across records sharing a label.
std::vector<double> mean_curve(const std::vector<CurveInput>& inputs, const std::string& label);

// First 1-based iteration whose loss is at most half of the first logged
// loss; -1 if the curve never halves.
int64_t iterations_to_halve(const std::vector<double>& losses);

}  // namespace tcn
