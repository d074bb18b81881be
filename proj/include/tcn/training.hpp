#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tcn/checkpoint.hpp"
#include "tcn/config.hpp"
#include "tcn/dynobj.hpp"
#include "tcn/models.hpp"
#include "tcn/vaec.hpp"

namespace tcn {

// Training loops, evaluation sweeps and run-directory management.

struct NormConfig {
  NormMethod method = NormMethod::tcn;
  double eps = 1e-8;
  int sub_batch_size = 4;
  int segment_len = 5;
  int window = 4;
  double dropout = 0.5;
  NormPlacement placement = NormPlacement::embedding;
};

// One record drives one reproducible run. Defaults follow the reference
// protocol: 10,000 iterations at lr 5e-4 for most analogy variants; layer and
// no-norm variants train 500,000 iterations, no-norm at lr 1e-4; the
// autoencoder runs 200,000 and the predictor 20,000 iterations at lr 5e-4.
struct ExperimentConfig {
  std::string task = "vaec_translation";  // vaec_translation | vaec_scale | dynobj
  uint64_t seed = 1;
  NormConfig norm;

  // vaec dataset
  int train_index = 1;
  int problems = 19040;
  int eval_problems = 1024;
  std::vector<int> eval_indices = {1, 2, 3, 4, 5, 6};
  int image_scale = 1;  // renders 128/image_scale

  // analogy model
  int conv_channels = 32;
  int fc_units = 256;
  int embedding = 256;
  int lstm_hidden = 256;

  // analogy training
  int64_t iterations = -1;      // -1: per-method default
  int batch_size = 32;
  double learning_rate = -1.0;  // -1: per-method default
  int64_t checkpoint_every = 0;
  int64_t log_every = 1;

  // dynamic object prediction
  int seq_len = 20;
  int64_t ae_iterations = 200000;
  int64_t pred_iterations = 20000;
  int pool_sequences = 2000;
  int test_sequences = 192;
  int dyn_embedding = 10;
  int dyn_lstm_hidden = 20;
  int train_stats_sample = 500;
  // Stage-two default trains the predictor on frozen embeddings; this flag
  // switches to joint end-to-end training on image-space MSE.
  bool fine_tune = false;

  static ExperimentConfig from(const Config& raw);
  Config to_config() const;
  uint64_t hash() const { return to_config().hash(); }

  int64_t effective_iterations() const;
  double effective_learning_rate() const;
  int render_size() const;
  vaec::RegimeSpec regime(int index) const;
  bool is_scale_task() const { return task == "vaec_scale"; }
};

struct RunRecord {
  std::vector<float> losses;
  std::vector<float> batch_accuracies;
  std::map<int, double> accuracy_by_index;  // region/scale -> accuracy
  double final_train_accuracy = -1.0;
  double wall_seconds = 0.0;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
};

// Run directory layout: config snapshot written before any computation,
// manifests/, checkpoints/, CSV outputs, DONE marker with the config hash.
struct RunDirectory {
  std::string root;

  static RunDirectory create(const std::string& root, const ExperimentConfig& cfg);
  static RunDirectory open(const std::string& root);

  std::string path(const std::string& name) const { return root + "/" + name; }
  std::string manifest_path(const std::string& name) const {
    return root + "/manifests/" + name;
  }
  std::string checkpoint_path(const std::string& name) const {
    return root + "/checkpoints/" + name;
  }
  bool is_done() const;
  void mark_done(uint64_t config_hash) const;
  ExperimentConfig config() const;
};

// Pre-rendered object images for one regime at one scale, deduplicated by
// level coordinates.
class RenderCache {
 public:
  explicit RenderCache(int image_scale) : scale_(image_scale) {}
  // Index of the object's image in the cache, rendering on first sight.
  int index_of(const vaec::ObjectSpec& spec);
  const float* image(int index) const { return images_[static_cast<size_t>(index)].data(); }
  int image_elems() const;
  int side() const { return vaec::kImageSize / scale_; }
  int count() const { return static_cast<int>(images_.size()); }

 private:
  int scale_;
  std::map<std::array<int, 4>, int> by_levels_;
  std::vector<std::vector<float>> images_;
};

AnalogyScorerConfig scorer_config_from(const ExperimentConfig& cfg);
NormSpec<float> norm_spec_from(const NormConfig& norm);

// Builds/loads the analogy scorer. Loading restores parameters and any stored
// train stats.
std::unique_ptr<AnalogyScorer<float>> build_scorer(const ExperimentConfig& cfg);
std::unique_ptr<AnalogyScorer<float>> load_scorer(const ExperimentConfig& cfg,
                                                  const Checkpoint& ckpt);

// Deterministic manifests for a run: the training set and one eval set per
// region/scale, generated from seeds derived from the run seed.
std::vector<vaec::ManifestEntry> train_manifest(const ExperimentConfig& cfg);
std::vector<vaec::ManifestEntry> eval_manifest(const ExperimentConfig& cfg, int index);

// Analogy training with resume support; writes loss.csv, checkpoints and the
// DONE marker into the run directory.
RunRecord train_analogy(const ExperimentConfig& cfg, const RunDirectory& run);

struct EvalOutcome {
  int correct = 0;
  int total = 0;
  std::vector<uint8_t> per_problem_correct;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

// Accuracy over a problem set, processed in training-sized batches so
// batch-coupled normalizers see the statistics they saw in training.
EvalOutcome evaluate_problems(AnalogyScorer<float>& scorer,
                              const std::vector<vaec::ManifestEntry>& entries,
                              const ExperimentConfig& cfg, RenderCache& cache);

// Fits per-feature train statistics from every image referenced by the
// training manifest (deduplicated, frequency-weighted) into the scorer's
// norm spec.
void prepare_train_stats(AnalogyScorer<float>& scorer,
                         const std::vector<vaec::ManifestEntry>& entries,
                         const ExperimentConfig& cfg, RenderCache& cache);

// Full evaluation sweep; writes accuracy.csv into the run directory.
RunRecord evaluate_analogy(const ExperimentConfig& cfg, const RunDirectory& run,
                           const std::vector<int>& indices);

// Dynamic object prediction: staged training (autoencoder, then predictor on
// frozen embeddings) plus image-space evaluation with a previous-frame copy
// baseline.
RunRecord train_autoencoder(const ExperimentConfig& cfg, const RunDirectory& run);
RunRecord train_predictor(const ExperimentConfig& cfg, const RunDirectory& run);

struct PredictionEval {
  double image_mse = 0.0;
  double copy_baseline_mse = 0.0;
  int sequences = 0;
};

PredictionEval evaluate_prediction(const ExperimentConfig& cfg, const RunDirectory& run,
                                   dynobj::Split split);

// Shared helpers for analysis tooling.
Tensor<float> images_for_entries(const std::vector<vaec::ManifestEntry>& entries,
                                 RenderCache& cache, int first, int count);
std::vector<float> read_loss_column(const std::string& loss_csv_path);

}  // namespace tcn
