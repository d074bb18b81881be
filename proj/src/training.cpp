#include "tcn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tcn/csv.hpp"
#include "tcn/dynobj.hpp"

namespace tcn {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

namespace {

std::vector<int> parse_index_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    auto dash = tok.find('-');
    if (dash != std::string::npos) {
      int lo = std::stoi(tok.substr(0, dash));
      int hi = std::stoi(tok.substr(dash + 1));
      check(lo <= hi, "bad index range '" + tok + "'");
      for (int i = lo; i <= hi; ++i) out.push_back(i);
    } else if (!tok.empty()) {
      out.push_back(std::stoi(tok));
    }
  }
  check(!out.empty(), "empty index list '" + s + "'");
  return out;
}

std::string index_list_to_string(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[static_cast<size_t>(i)]);
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const Config& raw) {
  ExperimentConfig cfg;
  cfg.task = raw.get("experiment.task", cfg.task);
  check(cfg.task == "vaec_translation" || cfg.task == "vaec_scale" || cfg.task == "dynobj",
        "experiment.task must be vaec_translation, vaec_scale or dynobj, got '" + cfg.task + "'");
  cfg.seed = raw.get_u64("experiment.seed", cfg.seed);

  cfg.norm.method = parse_norm_method(raw.get("norm.method", "tcn"));
  cfg.norm.eps = raw.get_double("norm.eps", cfg.norm.eps);
  cfg.norm.sub_batch_size = static_cast<int>(raw.get_int("norm.sub_batch_size", cfg.norm.sub_batch_size));
  cfg.norm.segment_len = static_cast<int>(raw.get_int("norm.segment_len", cfg.norm.segment_len));
  cfg.norm.window = static_cast<int>(raw.get_int("norm.window", cfg.norm.window));
  cfg.norm.dropout = raw.get_double("norm.dropout", cfg.norm.dropout);
  cfg.norm.placement = parse_norm_placement(raw.get("norm.placement", "embedding"));

  cfg.train_index = static_cast<int>(raw.get_int("dataset.train_index", cfg.train_index));
  cfg.problems = static_cast<int>(raw.get_int("dataset.problems", cfg.problems));
  cfg.eval_problems = static_cast<int>(raw.get_int("dataset.eval_problems", cfg.eval_problems));
  if (raw.has("dataset.eval_indices"))
    cfg.eval_indices = parse_index_list(raw.get_required("dataset.eval_indices"));
  cfg.image_scale = static_cast<int>(raw.get_int("dataset.image_scale", cfg.image_scale));
  check(vaec::kImageSize % cfg.image_scale == 0,
        "dataset.image_scale must divide " + std::to_string(vaec::kImageSize));

  cfg.conv_channels = static_cast<int>(raw.get_int("model.conv_channels", cfg.conv_channels));
  cfg.fc_units = static_cast<int>(raw.get_int("model.fc_units", cfg.fc_units));
  cfg.embedding = static_cast<int>(raw.get_int("model.embedding", cfg.embedding));
  cfg.lstm_hidden = static_cast<int>(raw.get_int("model.lstm_hidden", cfg.lstm_hidden));

  cfg.iterations = raw.get_int("train.iterations", cfg.iterations);
  cfg.batch_size = static_cast<int>(raw.get_int("train.batch_size", cfg.batch_size));
  cfg.learning_rate = raw.get_double("train.learning_rate", cfg.learning_rate);
  cfg.checkpoint_every = raw.get_int("train.checkpoint_every", cfg.checkpoint_every);
  cfg.log_every = raw.get_int("train.log_every", cfg.log_every);

  cfg.seq_len = static_cast<int>(raw.get_int("dynobj.seq_len", cfg.seq_len));
  cfg.ae_iterations = raw.get_int("dynobj.ae_iterations", cfg.ae_iterations);
  cfg.pred_iterations = raw.get_int("dynobj.pred_iterations", cfg.pred_iterations);
  cfg.pool_sequences = static_cast<int>(raw.get_int("dynobj.pool_sequences", cfg.pool_sequences));
  cfg.test_sequences = static_cast<int>(raw.get_int("dynobj.test_sequences", cfg.test_sequences));
  cfg.dyn_embedding = static_cast<int>(raw.get_int("dynobj.embedding", cfg.dyn_embedding));
  cfg.dyn_lstm_hidden = static_cast<int>(raw.get_int("dynobj.lstm_hidden", cfg.dyn_lstm_hidden));
  cfg.train_stats_sample =
      static_cast<int>(raw.get_int("dynobj.train_stats_sample", cfg.train_stats_sample));
  cfg.fine_tune = raw.get_bool("dynobj.fine_tune", cfg.fine_tune);
  return cfg;
}

Config ExperimentConfig::to_config() const {
  Config raw;
  raw.set("experiment.task", task);
  raw.set("experiment.seed", std::to_string(seed));
  raw.set("norm.method", norm_method_name(norm.method));
  raw.set("norm.eps", fmt_g9(norm.eps));
  raw.set("norm.sub_batch_size", std::to_string(norm.sub_batch_size));
  raw.set("norm.segment_len", std::to_string(norm.segment_len));
  raw.set("norm.window", std::to_string(norm.window));
  raw.set("norm.dropout", fmt_g9(norm.dropout));
  raw.set("norm.placement",
          norm.placement == NormPlacement::embedding ? "embedding" : "recurrent");
  raw.set("dataset.train_index", std::to_string(train_index));
  raw.set("dataset.problems", std::to_string(problems));
  raw.set("dataset.eval_problems", std::to_string(eval_problems));
  raw.set("dataset.eval_indices", index_list_to_string(eval_indices));
  raw.set("dataset.image_scale", std::to_string(image_scale));
  raw.set("model.conv_channels", std::to_string(conv_channels));
  raw.set("model.fc_units", std::to_string(fc_units));
  raw.set("model.embedding", std::to_string(embedding));
  raw.set("model.lstm_hidden", std::to_string(lstm_hidden));
  raw.set("train.iterations", std::to_string(iterations));
  raw.set("train.batch_size", std::to_string(batch_size));
  raw.set("train.learning_rate", fmt_g9(learning_rate));
  raw.set("train.checkpoint_every", std::to_string(checkpoint_every));
  raw.set("train.log_every", std::to_string(log_every));
  raw.set("dynobj.seq_len", std::to_string(seq_len));
  raw.set("dynobj.ae_iterations", std::to_string(ae_iterations));
  raw.set("dynobj.pred_iterations", std::to_string(pred_iterations));
  raw.set("dynobj.pool_sequences", std::to_string(pool_sequences));
  raw.set("dynobj.test_sequences", std::to_string(test_sequences));
  raw.set("dynobj.embedding", std::to_string(dyn_embedding));
  raw.set("dynobj.lstm_hidden", std::to_string(dyn_lstm_hidden));
  raw.set("dynobj.train_stats_sample", std::to_string(train_stats_sample));
  raw.set("dynobj.fine_tune", fine_tune ? "true" : "false");
  return raw;
}

int64_t ExperimentConfig::effective_iterations() const {
  if (iterations >= 0) return iterations;
  if (norm.method == NormMethod::layer || norm.method == NormMethod::none) return 500000;
  return 10000;
}

double ExperimentConfig::effective_learning_rate() const {
  if (learning_rate >= 0) return learning_rate;
  return norm.method == NormMethod::none ? 1e-4 : 5e-4;
}

int ExperimentConfig::render_size() const { return vaec::kImageSize / image_scale; }

vaec::RegimeSpec ExperimentConfig::regime(int index) const {
  return is_scale_task() ? vaec::RegimeSpec::scale(index) : vaec::RegimeSpec::translation(index);
}

// ---------------------------------------------------------------------------
// RunDirectory
// ---------------------------------------------------------------------------

RunDirectory RunDirectory::create(const std::string& root, const ExperimentConfig& cfg) {
  RunDirectory run{root};
  fs::create_directories(root);
  fs::create_directories(run.path("manifests"));
  fs::create_directories(run.path("checkpoints"));
  std::string snapshot = run.path("config.cfg");
  if (fs::exists(snapshot)) {
    Config existing = Config::from_file(snapshot);
    check(existing.hash() == cfg.to_config().hash(),
          "run directory '" + root + "' already holds a different config (hash " +
              hex64(existing.hash()) + " vs " + hex64(cfg.to_config().hash()) + ")");
  } else {
    // The snapshot lands before any computation.
    cfg.to_config().write(snapshot);
  }
  return run;
}

RunDirectory RunDirectory::open(const std::string& root) {
  RunDirectory run{root};
  if (!fs::exists(run.path("config.cfg")))
    throw MissingInput("run directory '" + root + "' has no config snapshot");
  return run;
}

bool RunDirectory::is_done() const { return fs::exists(path("DONE")); }

void RunDirectory::mark_done(uint64_t config_hash) const {
  std::ofstream out(path("DONE"));
  out << hex64(config_hash) << "\n";
}

ExperimentConfig RunDirectory::config() const {
  return ExperimentConfig::from(Config::from_file(path("config.cfg")));
}

// ---------------------------------------------------------------------------
// RenderCache
// ---------------------------------------------------------------------------

int RenderCache::index_of(const vaec::ObjectSpec& spec) {
  auto it = by_levels_.find(spec.levels);
  if (it != by_levels_.end()) return it->second;
  vaec::Image img = vaec::render_object_scaled(spec, scale_);
  int idx = static_cast<int>(images_.size());
  images_.push_back(std::move(img.data));
  by_levels_[spec.levels] = idx;
  return idx;
}

int RenderCache::image_elems() const {
  int s = side();
  return 3 * s * s;
}

// ---------------------------------------------------------------------------
// Model plumbing
// ---------------------------------------------------------------------------

AnalogyScorerConfig scorer_config_from(const ExperimentConfig& cfg) {
  AnalogyScorerConfig mc;
  mc.image_size = cfg.render_size();
  mc.conv_channels = cfg.conv_channels;
  mc.fc_units = cfg.fc_units;
  mc.embedding = cfg.embedding;
  mc.lstm_hidden = cfg.lstm_hidden;
  mc.norm_placement = cfg.norm.placement;
  return mc;
}

NormSpec<float> norm_spec_from(const NormConfig& norm) {
  NormSpec<float> spec;
  spec.method = norm.method;
  spec.eps = static_cast<float>(norm.eps);
  spec.sub_batch_size = norm.sub_batch_size;
  spec.segment_len = norm.segment_len;
  spec.window = norm.window;
  spec.dropout_rate = norm.dropout;
  return spec;
}

std::unique_ptr<AnalogyScorer<float>> build_scorer(const ExperimentConfig& cfg) {
  Rng init_rng(derive_seed(cfg.seed, "init"));
  auto scorer = std::make_unique<AnalogyScorer<float>>(scorer_config_from(cfg), cfg.norm.method,
                                                       init_rng);
  NormSpec<float> spec = norm_spec_from(cfg.norm);
  spec.gamma = scorer->norm_spec().gamma;
  spec.beta = scorer->norm_spec().beta;
  scorer->norm_spec() = spec;
  return scorer;
}

std::unique_ptr<AnalogyScorer<float>> load_scorer(const ExperimentConfig& cfg,
                                                  const Checkpoint& ckpt) {
  auto scorer = build_scorer(cfg);
  for (auto& [name, tensor] : scorer->named_params()) ckpt.load_into(name, *tensor);
  if (const Tensor<float>* mean = ckpt.find("norm.train_mean")) {
    TrainStats<float> ts;
    ts.mean = mean->values();
    const Tensor<float>* var = ckpt.find("norm.train_var");
    check(var != nullptr, "checkpoint has train_mean without train_var");
    ts.var = var->values();
    scorer->norm_spec().train_stats = std::move(ts);
  }
  return scorer;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

std::vector<vaec::ManifestEntry> train_manifest(const ExperimentConfig& cfg) {
  return vaec::build_manifest(cfg.regime(cfg.train_index), cfg.problems,
                              derive_seed(cfg.seed, "trainset"));
}

std::vector<vaec::ManifestEntry> eval_manifest(const ExperimentConfig& cfg, int index) {
  return vaec::build_manifest(cfg.regime(index), cfg.eval_problems,
                              derive_seed(cfg.seed, "evalset", static_cast<uint64_t>(index)));
}

namespace {

std::vector<vaec::ManifestEntry> ensure_manifest(const RunDirectory& run, const std::string& name,
                                                 std::vector<vaec::ManifestEntry> (*make)(
                                                     const ExperimentConfig&, int),
                                                 const ExperimentConfig& cfg, int index) {
  std::string path = run.manifest_path(name);
  if (fs::exists(path)) return vaec::import_manifest(path);
  auto entries = make(cfg, index);
  vaec::export_manifest(entries, path);
  return entries;
}

std::vector<vaec::ManifestEntry> make_train(const ExperimentConfig& cfg, int) {
  return train_manifest(cfg);
}
std::vector<vaec::ManifestEntry> make_eval(const ExperimentConfig& cfg, int index) {
  return eval_manifest(cfg, index);
}

// ---------------------------------------------------------------------------
// Checkpoint plumbing shared by the training loops
// ---------------------------------------------------------------------------

Checkpoint snapshot_named(const std::vector<std::pair<std::string, Tensor<float>*>>& named,
                          const OptimState<float>* optim,
                          const std::vector<std::pair<std::string, Rng*>>& rngs, int64_t step,
                          uint64_t config_hash) {
  Checkpoint ckpt;
  ckpt.config_hash = config_hash;
  ckpt.step = step;
  for (auto& [name, tensor] : named) ckpt.add(name, *tensor);
  if (optim) {
    ckpt.set_meta("adam.step_count", std::to_string(optim->step_count));
    for (size_t i = 0; i < named.size(); ++i) {
      Tensor<float> m(named[i].second->shape());
      m.values() = optim->first_moment[i];
      ckpt.add("adam.m." + named[i].first, m);
      Tensor<float> v(named[i].second->shape());
      v.values() = optim->second_moment[i];
      ckpt.add("adam.v." + named[i].first, v);
    }
  }
  for (const auto& [name, rng] : rngs) ckpt.set_meta("rng." + name, rng->serialize());
  return ckpt;
}

template <class Model>
Checkpoint snapshot_model(Model& model, const OptimState<float>* optim,
                          const std::vector<std::pair<std::string, Rng*>>& rngs, int64_t step,
                          uint64_t config_hash) {
  return snapshot_named(model.named_params(), optim, rngs, step, config_hash);
}

void restore_named(const std::vector<std::pair<std::string, Tensor<float>*>>& named,
                   OptimState<float>* optim,
                   const std::vector<std::pair<std::string, Rng*>>& rngs, const Checkpoint& ckpt) {
  for (auto& [name, tensor] : named) ckpt.load_into(name, *tensor);
  if (optim) {
    const std::string* sc = ckpt.find_meta("adam.step_count");
    check(sc != nullptr, "checkpoint has no optimizer state");
    optim->step_count = std::stoll(*sc);
    optim->first_moment.clear();
    optim->second_moment.clear();
    for (auto& [name, tensor] : named) {
      const Tensor<float>* m = ckpt.find("adam.m." + name);
      const Tensor<float>* v = ckpt.find("adam.v." + name);
      check(m && v, "checkpoint is missing optimizer moments for '" + name + "'");
      optim->first_moment.push_back(m->values());
      optim->second_moment.push_back(v->values());
    }
  }
  for (const auto& [name, rng] : rngs) {
    const std::string* state = ckpt.find_meta("rng." + name);
    check(state != nullptr, "checkpoint is missing RNG stream '" + name + "'");
    rng->deserialize(*state);
  }
}

template <class Model>
void restore_model(Model& model, OptimState<float>* optim,
                   const std::vector<std::pair<std::string, Rng*>>& rngs, const Checkpoint& ckpt) {
  restore_named(model.named_params(), optim, rngs, ckpt);
}

void write_loss_csv(const std::string& path, const RunRecord& record, bool with_accuracy) {
  CsvWriter csv(path, record.config_hash,
                with_accuracy ? "iteration,loss,batch_accuracy" : "iteration,loss");
  for (size_t i = 0; i < record.losses.size(); ++i) {
    std::vector<std::string> row{std::to_string(i + 1), fmt_g9(record.losses[i])};
    if (with_accuracy) row.push_back(fmt_g9(record.batch_accuracies[i]));
    csv.row(row);
  }
  csv.close();
}

void append_log(const RunDirectory& run, const std::string& message) {
  std::ofstream log(run.path("log.txt"), std::ios::app);
  log << message << "\n";
}

[[noreturn]] void numerical_abort(const RunDirectory& run, Checkpoint snapshot, int64_t step,
                                  const RunRecord& record, const std::string& stage) {
  snapshot.set_meta("abort", "non-finite loss at step " + std::to_string(step));
  snapshot.save(run.checkpoint_path(stage + "_abort.ckpt"));
  size_t tail = record.losses.size() > 16 ? record.losses.size() - 16 : 0;
  std::ostringstream os;
  os << "non-finite loss at step " << step << " (" << stage << "); last losses:";
  for (size_t i = tail; i < record.losses.size(); ++i) os << " " << fmt_g9(record.losses[i]);
  append_log(run, os.str());
  throw NumericalAbort(os.str() + "; diagnostic snapshot at " +
                       run.checkpoint_path(stage + "_abort.ckpt"));
}

}  // namespace

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

Tensor<float> images_for_entries(const std::vector<vaec::ManifestEntry>& entries,
                                 RenderCache& cache, int first, int count) {
  int side = cache.side();
  int elems = cache.image_elems();
  // Row layout: per problem, A, B, C then the 7 candidates.
  Tensor<float> out({count * kAnalogyImages, 3, side, side});
  float* dst = out.values().data();
  for (int p = 0; p < count; ++p) {
    const auto& e = entries[static_cast<size_t>(first + p)];
    std::vector<const vaec::ObjectSpec*> objs{&e.a, &e.b, &e.c};
    for (const auto& c : e.candidates) objs.push_back(&c);
    for (size_t o = 0; o < objs.size(); ++o) {
      int idx = cache.index_of(*objs[o]);
      std::memcpy(dst + (static_cast<size_t>(p) * kAnalogyImages + o) * elems, cache.image(idx),
                  static_cast<size_t>(elems) * sizeof(float));
    }
  }
  return out;
}

namespace {

// Presentation-shuffled batch: candidate order is re-drawn per presentation so
// position carries no signal.
Tensor<float> images_for_training_batch(const std::vector<vaec::ManifestEntry>& entries,
                                        const std::vector<int>& problem_idx, RenderCache& cache,
                                        Rng& present_rng, std::vector<int>& targets_out) {
  int count = static_cast<int>(problem_idx.size());
  int side = cache.side();
  int elems = cache.image_elems();
  Tensor<float> out({count * kAnalogyImages, 3, side, side});
  float* dst = out.values().data();
  targets_out.resize(static_cast<size_t>(count));
  std::vector<int> perm(vaec::kNumCandidates);
  for (int p = 0; p < count; ++p) {
    const auto& e = entries[static_cast<size_t>(problem_idx[static_cast<size_t>(p)])];
    for (int i = 0; i < vaec::kNumCandidates; ++i) perm[static_cast<size_t>(i)] = i;
    present_rng.shuffle(perm);
    for (int i = 0; i < vaec::kNumCandidates; ++i)
      if (perm[static_cast<size_t>(i)] == e.answer_index) targets_out[static_cast<size_t>(p)] = i;
    std::vector<const vaec::ObjectSpec*> objs{&e.a, &e.b, &e.c};
    for (int i = 0; i < vaec::kNumCandidates; ++i)
      objs.push_back(&e.candidates[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
    for (size_t o = 0; o < objs.size(); ++o) {
      int idx = cache.index_of(*objs[o]);
      std::memcpy(dst + (static_cast<size_t>(p) * kAnalogyImages + o) * elems, cache.image(idx),
                  static_cast<size_t>(elems) * sizeof(float));
    }
  }
  return out;
}

std::vector<int> argmax_rows(const Tensor<float>& logits) {
  int rows = logits.dim(0), cols = logits.dim(1);
  std::vector<int> out(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const float* row = logits.values().data() + static_cast<size_t>(r) * cols;
    int best = 0;
    for (int c = 1; c < cols; ++c)
      if (row[c] > row[best]) best = c;
    out[static_cast<size_t>(r)] = best;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Analogy training
// ---------------------------------------------------------------------------

RunRecord train_analogy(const ExperimentConfig& cfg, const RunDirectory& run) {
  check(cfg.task != "dynobj", "train_analogy: config is for the dynobj task");
  auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.seed = cfg.seed;
  record.config_hash = cfg.hash();

  auto entries = ensure_manifest(run, "train.txt", make_train, cfg, cfg.train_index);
  RenderCache cache(cfg.image_scale);
  auto scorer = build_scorer(cfg);
  auto params = scorer->param_list();
  OptimState<float> optim(static_cast<float>(cfg.effective_learning_rate()));
  optim.ensure_buffers(params);

  Rng batch_rng(derive_seed(cfg.seed, "batch"));
  Rng present_rng(derive_seed(cfg.seed, "present"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  std::vector<std::pair<std::string, Rng*>> rngs{
      {"batch", &batch_rng}, {"present", &present_rng}, {"dropout", &dropout_rng}};

  int64_t total = cfg.effective_iterations();
  int64_t start = 0;
  std::string latest = run.checkpoint_path("latest.ckpt");
  if (fs::exists(latest) && !run.is_done()) {
    Checkpoint ckpt = Checkpoint::load(latest);
    check(ckpt.config_hash == record.config_hash,
          "checkpoint in '" + run.root + "' belongs to a different config");
    restore_model(*scorer, &optim, rngs, ckpt);
    start = ckpt.step;
    auto losses = read_loss_column(run.path("loss.csv"));
    std::ifstream in(run.path("loss.csv"));
    std::string line;
    std::getline(in, line);  // comment
    std::getline(in, line);  // header
    while (std::getline(in, line) && static_cast<int64_t>(record.losses.size()) < start) {
      std::istringstream is(line);
      std::string it_s, loss_s, acc_s;
      std::getline(is, it_s, ',');
      std::getline(is, loss_s, ',');
      std::getline(is, acc_s, ',');
      record.losses.push_back(std::stof(loss_s));
      record.batch_accuracies.push_back(std::stof(acc_s));
    }
    check(static_cast<int64_t>(record.losses.size()) == start,
          "loss.csv does not cover the checkpointed steps");
    append_log(run, "resumed at step " + std::to_string(start));
  }

  for (int64_t step = start; step < total; ++step) {
    std::vector<int> problem_idx(static_cast<size_t>(cfg.batch_size));
    for (auto& idx : problem_idx)
      idx = static_cast<int>(batch_rng.below(static_cast<uint64_t>(entries.size())));
    std::vector<int> targets;
    Tensor<float> images =
        images_for_training_batch(entries, problem_idx, cache, present_rng, targets);
    NormEnv env{true, &dropout_rng};
    Tensor<float> logits = scorer->solve_logits(images, cfg.batch_size, env);
    Tensor<float> loss = softmax_cross_entropy(logits, targets);
    float loss_v = loss.item();
    auto preds = argmax_rows(logits);
    int correct = 0;
    for (int p = 0; p < cfg.batch_size; ++p)
      if (preds[static_cast<size_t>(p)] == targets[static_cast<size_t>(p)]) ++correct;
    record.losses.push_back(loss_v);
    record.batch_accuracies.push_back(static_cast<float>(correct) /
                                      static_cast<float>(cfg.batch_size));
    if (!std::isfinite(loss_v))
      numerical_abort(run, snapshot_model(*scorer, &optim, rngs, step, record.config_hash), step,
                      record, "analogy");
    loss.backward();
    adam_update(params, optim);
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < total) {
      Checkpoint snap = snapshot_model(*scorer, &optim, rngs, step + 1, record.config_hash);
      snap.save(latest);
      snap.save(run.checkpoint_path("step_" + std::to_string(step + 1) + ".ckpt"));
      write_loss_csv(run.path("loss.csv"), record, true);
    }
  }

  if (cfg.norm.method == NormMethod::batch_train_stats)
    prepare_train_stats(*scorer, entries, cfg, cache);

  // Final training-set accuracy over a fixed subset, measured in eval mode;
  // evaluate_problems on the same subset reproduces this number exactly.
  int subset = std::min<int>(cfg.eval_problems, static_cast<int>(entries.size()));
  std::vector<vaec::ManifestEntry> head(entries.begin(), entries.begin() + subset);
  record.final_train_accuracy = evaluate_problems(*scorer, head, cfg, cache).accuracy();

  Checkpoint final_ckpt = snapshot_model(*scorer, &optim, rngs, total, record.config_hash);
  if (scorer->norm_spec().train_stats) {
    const auto& ts = *scorer->norm_spec().train_stats;
    Tensor<float> m({static_cast<int>(ts.mean.size())});
    m.values() = ts.mean;
    final_ckpt.add("norm.train_mean", m);
    Tensor<float> v({static_cast<int>(ts.var.size())});
    v.values() = ts.var;
    final_ckpt.add("norm.train_var", v);
  }
  final_ckpt.set_meta("final_train_accuracy", fmt_g9(record.final_train_accuracy));
  final_ckpt.save(run.checkpoint_path("final.ckpt"));
  if (fs::exists(latest)) fs::remove(latest);
  write_loss_csv(run.path("loss.csv"), record, true);
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  append_log(run, "trained " + std::to_string(total) + " iterations in " +
                      fmt_g9(record.wall_seconds) + "s; final train accuracy " +
                      fmt_g9(record.final_train_accuracy));
  run.mark_done(record.config_hash);
  return record;
}

// ---------------------------------------------------------------------------
// Analogy evaluation
// ---------------------------------------------------------------------------

EvalOutcome evaluate_problems(AnalogyScorer<float>& scorer,
                              const std::vector<vaec::ManifestEntry>& entries,
                              const ExperimentConfig& cfg, RenderCache& cache) {
  NoGradGuard guard;
  EvalOutcome outcome;
  outcome.total = static_cast<int>(entries.size());
  outcome.per_problem_correct.resize(entries.size(), 0);
  NormEnv env{false, nullptr};
  for (int first = 0; first < outcome.total; first += cfg.batch_size) {
    int count = std::min<int>(cfg.batch_size, outcome.total - first);
    Tensor<float> images = images_for_entries(entries, cache, first, count);
    Tensor<float> logits = scorer.solve_logits(images, count, env);
    auto preds = argmax_rows(logits);
    for (int p = 0; p < count; ++p) {
      bool ok = preds[static_cast<size_t>(p)] ==
                entries[static_cast<size_t>(first + p)].answer_index;
      outcome.per_problem_correct[static_cast<size_t>(first + p)] = ok ? 1 : 0;
      if (ok) ++outcome.correct;
    }
  }
  return outcome;
}

void prepare_train_stats(AnalogyScorer<float>& scorer,
                         const std::vector<vaec::ManifestEntry>& entries,
                         const ExperimentConfig& cfg, RenderCache& cache) {
  (void)cfg;
  NoGradGuard guard;
  // Deduplicate by cache index, weight by occurrence count: identical to
  // streaming every image of every training problem.
  std::map<int, double> counts;
  for (const auto& e : entries) {
    std::vector<const vaec::ObjectSpec*> objs{&e.a, &e.b, &e.c};
    for (const auto& c : e.candidates) objs.push_back(&c);
    for (const auto* o : objs) counts[cache.index_of(*o)] += 1.0;
  }
  int unique = static_cast<int>(counts.size());
  int side = cache.side();
  int elems = cache.image_elems();
  Tensor<float> images({unique, 3, side, side});
  std::vector<double> weights;
  weights.reserve(counts.size());
  int row = 0;
  for (const auto& [idx, count] : counts) {
    std::memcpy(images.values().data() + static_cast<size_t>(row) * elems, cache.image(idx),
                static_cast<size_t>(elems) * sizeof(float));
    weights.push_back(count);
    ++row;
  }
  // Encode in slices to bound peak memory.
  Tensor<float> stream({unique, scorer.config().embedding});
  for (int first = 0; first < unique; first += 256) {
    int count = std::min(256, unique - first);
    Tensor<float> slice({count, 3, side, side});
    std::copy_n(images.values().begin() + static_cast<size_t>(first) * elems,
                static_cast<size_t>(count) * elems, slice.values().begin());
    Tensor<float> z = scorer.encode(slice);
    std::copy(z.values().begin(), z.values().end(),
              stream.values().begin() +
                  static_cast<size_t>(first) * scorer.config().embedding);
  }
  fit_train_stats(stream, scorer.norm_spec(), weights);
}

RunRecord evaluate_analogy(const ExperimentConfig& cfg, const RunDirectory& run,
                           const std::vector<int>& indices) {
  std::string ckpt_path = run.checkpoint_path("final.ckpt");
  if (!fs::exists(ckpt_path))
    throw MissingInput("no final checkpoint in '" + run.root + "'; train first");
  Checkpoint ckpt = Checkpoint::load(ckpt_path);
  auto scorer = load_scorer(cfg, ckpt);
  RunRecord record;
  record.seed = cfg.seed;
  record.config_hash = cfg.hash();

  RenderCache cache(cfg.image_scale);
  if (cfg.norm.method == NormMethod::batch_train_stats && !scorer->norm_spec().train_stats) {
    auto entries = ensure_manifest(run, "train.txt", make_train, cfg, cfg.train_index);
    prepare_train_stats(*scorer, entries, cfg, cache);
  }

  CsvWriter csv(run.path("accuracy.csv"), record.config_hash,
                "index,regime,accuracy,correct,total");
  for (int index : indices) {
    auto regime = cfg.regime(index);
    auto entries = ensure_manifest(run, "eval_" + regime.file_tag() + ".txt", make_eval, cfg, index);
    EvalOutcome outcome = evaluate_problems(*scorer, entries, cfg, cache);
    record.accuracy_by_index[index] = outcome.accuracy();
    csv.row({std::to_string(index), regime.tag(), fmt_g9(outcome.accuracy()),
             std::to_string(outcome.correct), std::to_string(outcome.total)});
    // Per-problem detail for downstream per-dimension analysis.
    CsvWriter detail(run.path("detail_" + regime.file_tag() + ".csv"), record.config_hash,
                     "problem,dimension,correct");
    for (size_t p = 0; p < entries.size(); ++p)
      detail.row({std::to_string(p), vaec::dim_name(entries[p].relevant_dim),
                  std::to_string(static_cast<int>(outcome.per_problem_correct[p]))});
    detail.close();
  }
  csv.close();
  return record;
}

// ---------------------------------------------------------------------------
// Dynamic object prediction
// ---------------------------------------------------------------------------

namespace {

AutoencoderConfig ae_config_from(const ExperimentConfig& cfg) {
  AutoencoderConfig ac;
  ac.embedding = cfg.dyn_embedding;
  return ac;
}

Tensor<float> frames_to_tensor(const std::vector<std::vector<float>>& frames) {
  int t = static_cast<int>(frames.size());
  Tensor<float> out({t, 1, dynobj::kFrameSize, dynobj::kFrameSize});
  for (int f = 0; f < t; ++f)
    std::copy(frames[static_cast<size_t>(f)].begin(), frames[static_cast<size_t>(f)].end(),
              out.values().begin() + static_cast<size_t>(f) * frames[0].size());
  return out;
}

// Embeddings for a list of sequences, encoded with the frozen autoencoder:
// (count, T, E).
Tensor<float> encode_sequences(Autoencoder<float>& ae, const std::vector<dynobj::SequenceSpec>& specs,
                               int emb_dim) {
  NoGradGuard guard;
  int count = static_cast<int>(specs.size());
  check(count > 0, "encode_sequences: no sequences");
  int t = specs[0].t;
  Tensor<float> out({count, t, emb_dim});
  for (int s = 0; s < count; ++s) {
    auto frames = dynobj::render_sequence(specs[static_cast<size_t>(s)]);
    Tensor<float> imgs = frames_to_tensor(frames);
    Tensor<float> z = ae.encode(imgs);
    std::copy(z.values().begin(), z.values().end(),
              out.values().begin() + static_cast<size_t>(s) * t * emb_dim);
  }
  return out;
}

Tensor<float> gather_sequences(const Tensor<float>& pool, const std::vector<int>& idx) {
  int t = pool.dim(1), e = pool.dim(2);
  Tensor<float> out({static_cast<int>(idx.size()), t, e});
  size_t seq = static_cast<size_t>(t) * e;
  for (size_t s = 0; s < idx.size(); ++s)
    std::copy_n(pool.values().begin() + static_cast<size_t>(idx[s]) * seq, seq,
                out.values().begin() + s * seq);
  return out;
}

}  // namespace

RunRecord train_autoencoder(const ExperimentConfig& cfg, const RunDirectory& run) {
  check(cfg.task == "dynobj", "train_autoencoder: config is not for the dynobj task");
  auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.seed = cfg.seed;
  record.config_hash = cfg.hash();

  Rng init_rng(derive_seed(cfg.seed, "ae-init"));
  Autoencoder<float> ae(ae_config_from(cfg), init_rng);
  auto params = ae.param_list();
  OptimState<float> optim(5e-4f);
  optim.ensure_buffers(params);
  Rng data_rng(derive_seed(cfg.seed, "ae-data"));
  std::vector<std::pair<std::string, Rng*>> rngs{{"ae-data", &data_rng}};

  int64_t total = cfg.ae_iterations;
  int64_t start = 0;
  std::string latest = run.checkpoint_path("ae_latest.ckpt");
  std::string final_path = run.checkpoint_path("ae.ckpt");
  if (fs::exists(latest) && !fs::exists(final_path)) {
    Checkpoint ckpt = Checkpoint::load(latest);
    check(ckpt.config_hash == record.config_hash, "autoencoder checkpoint config mismatch");
    restore_model(ae, &optim, rngs, ckpt);
    start = ckpt.step;
    for (float v : read_loss_column(run.path("ae_loss.csv")))
      if (static_cast<int64_t>(record.losses.size()) < start) record.losses.push_back(v);
    append_log(run, "autoencoder resumed at step " + std::to_string(start));
  }

  for (int64_t step = start; step < total; ++step) {
    Tensor<float> images({cfg.batch_size, 1, dynobj::kFrameSize, dynobj::kFrameSize});
    size_t frame_elems = static_cast<size_t>(dynobj::kFrameSize) * dynobj::kFrameSize;
    for (int b = 0; b < cfg.batch_size; ++b) {
      auto spec = dynobj::sample_sequence(dynobj::Split::train, cfg.seq_len, data_rng.next_u64());
      int frame = static_cast<int>(data_rng.below(static_cast<uint64_t>(cfg.seq_len)));
      auto [size, cx, cy] = dynobj::interpolate(spec, frame);
      auto pixels = dynobj::render_frame(size, cx, cy);
      std::copy(pixels.begin(), pixels.end(),
                images.values().begin() + static_cast<size_t>(b) * frame_elems);
    }
    auto [z, recon] = ae.autoencode(images);
    Tensor<float> loss = mse_loss(recon, images);
    float loss_v = loss.item();
    record.losses.push_back(loss_v);
    if (!std::isfinite(loss_v))
      numerical_abort(run, snapshot_model(ae, &optim, rngs, step, record.config_hash), step,
                      record, "autoencoder");
    loss.backward();
    adam_update(params, optim);
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < total) {
      snapshot_model(ae, &optim, rngs, step + 1, record.config_hash).save(latest);
      write_loss_csv(run.path("ae_loss.csv"), record, false);
    }
  }

  snapshot_model(ae, &optim, rngs, total, record.config_hash).save(final_path);
  if (fs::exists(latest)) fs::remove(latest);
  write_loss_csv(run.path("ae_loss.csv"), record, false);
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  append_log(run, "autoencoder trained " + std::to_string(total) + " steps in " +
                      fmt_g9(record.wall_seconds) + "s");
  return record;
}

RunRecord train_predictor(const ExperimentConfig& cfg, const RunDirectory& run) {
  check(cfg.task == "dynobj", "train_predictor: config is not for the dynobj task");
  std::string ae_path = run.checkpoint_path("ae.ckpt");
  if (!fs::exists(ae_path))
    throw MissingInput("no autoencoder checkpoint in '" + run.root + "'; train the autoencoder first");
  auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.seed = cfg.seed;
  record.config_hash = cfg.hash();

  Rng ae_init(derive_seed(cfg.seed, "ae-init"));
  Autoencoder<float> ae(ae_config_from(cfg), ae_init);
  {
    Checkpoint ckpt = Checkpoint::load(ae_path);
    for (auto& [name, tensor] : ae.named_params()) ckpt.load_into(name, *tensor);
  }

  std::vector<dynobj::SequenceSpec> pool_specs;
  pool_specs.reserve(static_cast<size_t>(cfg.pool_sequences));
  for (int i = 0; i < cfg.pool_sequences; ++i)
    pool_specs.push_back(dynobj::sample_sequence(dynobj::Split::train, cfg.seq_len,
                                                 derive_seed(cfg.seed, "pool", static_cast<uint64_t>(i))));
  // Stage-two default keeps the encoder frozen and trains on pre-encoded
  // embeddings; fine-tuning re-encodes per step with gradients enabled.
  Tensor<float> pool;
  if (!cfg.fine_tune) pool = encode_sequences(ae, pool_specs, cfg.dyn_embedding);

  Rng init_rng(derive_seed(cfg.seed, "pred-init"));
  Predictor<float> predictor(PredictorConfig{cfg.dyn_embedding, cfg.dyn_lstm_hidden}, init_rng);
  std::vector<std::pair<std::string, Tensor<float>*>> named = predictor.named_params();
  if (cfg.fine_tune)
    for (auto& [name, tensor] : ae.named_params()) {
      tensor->set_requires_grad(true);
      named.push_back({name, tensor});
    }
  std::vector<Tensor<float>> params;
  for (auto& [name, tensor] : named) params.push_back(*tensor);
  OptimState<float> optim(5e-4f);
  optim.ensure_buffers(params);
  Rng batch_rng(derive_seed(cfg.seed, "pred-batch"));
  Rng dropout_rng(derive_seed(cfg.seed, "pred-dropout"));
  std::vector<std::pair<std::string, Rng*>> rngs{{"pred-batch", &batch_rng},
                                                 {"pred-dropout", &dropout_rng}};
  NormSpec<float> spec = norm_spec_from(cfg.norm);

  int64_t total = cfg.pred_iterations;
  int64_t start = 0;
  std::string latest = run.checkpoint_path("pred_latest.ckpt");
  std::string final_path = run.checkpoint_path("pred.ckpt");
  if (fs::exists(latest) && !fs::exists(final_path)) {
    Checkpoint ckpt = Checkpoint::load(latest);
    check(ckpt.config_hash == record.config_hash, "predictor checkpoint config mismatch");
    restore_named(named, &optim, rngs, ckpt);
    start = ckpt.step;
    for (float v : read_loss_column(run.path("pred_loss.csv")))
      if (static_cast<int64_t>(record.losses.size()) < start) record.losses.push_back(v);
    append_log(run, "predictor resumed at step " + std::to_string(start));
  }

  int t = cfg.seq_len, e = cfg.dyn_embedding;
  size_t frame_elems = static_cast<size_t>(dynobj::kFrameSize) * dynobj::kFrameSize;
  for (int64_t step = start; step < total; ++step) {
    std::vector<int> idx(static_cast<size_t>(cfg.batch_size));
    for (auto& i : idx) i = static_cast<int>(batch_rng.below(static_cast<uint64_t>(cfg.pool_sequences)));
    NormEnv env{true, &dropout_rng};
    Tensor<float> loss;
    if (cfg.fine_tune) {
      // Joint training on image-space MSE: encode the batch with gradients,
      // predict, de-normalize, decode, compare against the true frames.
      Tensor<float> frames_t({cfg.batch_size * t, 1, dynobj::kFrameSize, dynobj::kFrameSize});
      std::vector<std::vector<std::vector<float>>> frames(static_cast<size_t>(cfg.batch_size));
      for (int b = 0; b < cfg.batch_size; ++b) {
        frames[static_cast<size_t>(b)] =
            dynobj::render_sequence(pool_specs[static_cast<size_t>(idx[static_cast<size_t>(b)])]);
        for (int f = 0; f < t; ++f)
          std::copy(frames[static_cast<size_t>(b)][static_cast<size_t>(f)].begin(),
                    frames[static_cast<size_t>(b)][static_cast<size_t>(f)].end(),
                    frames_t.values().begin() + (static_cast<size_t>(b) * t + f) * frame_elems);
      }
      Tensor<float> z = ae.encode(frames_t);
      auto result = predict_sequence(reshape(z, {cfg.batch_size, t, e}), predictor, spec, env);
      loss = Tensor<float>::scalar(0.f);
      for (int s = 1; s < t; ++s) {
        Tensor<float> back =
            denormalize_prediction(result.preds[static_cast<size_t>(s - 1)], result.stats, s);
        Tensor<float> decoded = ae.decode(back);
        Tensor<float> target({cfg.batch_size, 1, dynobj::kFrameSize, dynobj::kFrameSize});
        for (int b = 0; b < cfg.batch_size; ++b)
          std::copy(frames[static_cast<size_t>(b)][static_cast<size_t>(s)].begin(),
                    frames[static_cast<size_t>(b)][static_cast<size_t>(s)].end(),
                    target.values().begin() + static_cast<size_t>(b) * frame_elems);
        loss = add(loss, mse_loss(decoded, target));
      }
      loss = scale(loss, 1.0f / static_cast<float>(t - 1));
    } else {
      Tensor<float> emb = gather_sequences(pool, idx);
      auto result = predict_sequence(emb, predictor, spec, env);
      Tensor<float> norm2d = reshape(result.normalized, {cfg.batch_size * t, e});
      loss = Tensor<float>::scalar(0.f);
      for (size_t s = 0; s < result.preds.size(); ++s) {
        std::vector<int> rows(static_cast<size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b)
          rows[static_cast<size_t>(b)] = b * t + static_cast<int>(s) + 1;
        loss = add(loss, mse_loss(result.preds[s], gather_rows(norm2d, rows)));
      }
      loss = scale(loss, 1.0f / static_cast<float>(result.preds.size()));
    }
    float loss_v = loss.item();
    record.losses.push_back(loss_v);
    if (!std::isfinite(loss_v))
      numerical_abort(run, snapshot_named(named, &optim, rngs, step, record.config_hash), step,
                      record, "predictor");
    loss.backward();
    adam_update(params, optim);
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < total) {
      Checkpoint snap = snapshot_named(named, &optim, rngs, step + 1, record.config_hash);
      snap.save(latest);
      write_loss_csv(run.path("pred_loss.csv"), record, false);
    }
  }

  snapshot_named(named, &optim, rngs, total, record.config_hash).save(final_path);
  if (fs::exists(latest)) fs::remove(latest);
  write_loss_csv(run.path("pred_loss.csv"), record, false);
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  append_log(run, "predictor trained " + std::to_string(total) + " steps in " +
                      fmt_g9(record.wall_seconds) + "s");
  run.mark_done(record.config_hash);
  return record;
}

PredictionEval evaluate_prediction(const ExperimentConfig& cfg, const RunDirectory& run,
                                   dynobj::Split split) {
  std::string ae_path = run.checkpoint_path("ae.ckpt");
  std::string pred_path = run.checkpoint_path("pred.ckpt");
  if (!fs::exists(ae_path) || !fs::exists(pred_path))
    throw MissingInput("evaluate_prediction needs ae.ckpt and pred.ckpt in '" + run.root + "'");
  NoGradGuard guard;

  Rng ae_init(derive_seed(cfg.seed, "ae-init"));
  Autoencoder<float> ae(ae_config_from(cfg), ae_init);
  {
    Checkpoint ckpt = Checkpoint::load(ae_path);
    for (auto& [name, tensor] : ae.named_params()) ckpt.load_into(name, *tensor);
  }
  Rng pred_init(derive_seed(cfg.seed, "pred-init"));
  Predictor<float> predictor(PredictorConfig{cfg.dyn_embedding, cfg.dyn_lstm_hidden}, pred_init);
  {
    Checkpoint ckpt = Checkpoint::load(pred_path);
    for (auto& [name, tensor] : predictor.named_params()) ckpt.load_into(name, *tensor);
    // Fine-tuned runs carry the jointly trained autoencoder here.
    if (ckpt.find("ae.enc.conv1.w"))
      for (auto& [name, tensor] : ae.named_params()) ckpt.load_into(name, *tensor);
  }

  NormSpec<float> spec = norm_spec_from(cfg.norm);
  if (cfg.norm.method == NormMethod::batch_train_stats) {
    // Per-feature statistics from a fixed-size sample of training frames.
    int need = cfg.train_stats_sample;
    int seqs = (need + cfg.seq_len - 1) / cfg.seq_len;
    std::vector<dynobj::SequenceSpec> specs;
    for (int i = 0; i < seqs; ++i)
      specs.push_back(dynobj::sample_sequence(dynobj::Split::train, cfg.seq_len,
                                              derive_seed(cfg.seed, "stats-sample", static_cast<uint64_t>(i))));
    Tensor<float> emb = encode_sequences(ae, specs, cfg.dyn_embedding);
    Tensor<float> stream({need, cfg.dyn_embedding});
    std::copy_n(emb.values().begin(), static_cast<size_t>(need) * cfg.dyn_embedding,
                stream.values().begin());
    fit_train_stats(stream, spec);
  }

  PredictionEval eval;
  eval.sequences = cfg.test_sequences;
  const char* stream_tag = split == dynobj::Split::test ? "eval-test" : "eval-train";
  double sq_sum = 0.0, copy_sum = 0.0;
  int64_t sq_count = 0;
  size_t frame_elems = static_cast<size_t>(dynobj::kFrameSize) * dynobj::kFrameSize;

  for (int first = 0; first < cfg.test_sequences; first += cfg.batch_size) {
    int count = std::min(cfg.batch_size, cfg.test_sequences - first);
    std::vector<dynobj::SequenceSpec> specs;
    std::vector<std::vector<std::vector<float>>> frames;
    for (int i = 0; i < count; ++i) {
      specs.push_back(dynobj::sample_sequence(split, cfg.seq_len,
                                              derive_seed(cfg.seed, stream_tag,
                                                          static_cast<uint64_t>(first + i))));
      frames.push_back(dynobj::render_sequence(specs.back()));
    }
    Tensor<float> emb({count, cfg.seq_len, cfg.dyn_embedding});
    for (int s = 0; s < count; ++s) {
      Tensor<float> imgs = frames_to_tensor(frames[static_cast<size_t>(s)]);
      Tensor<float> z = ae.encode(imgs);
      std::copy(z.values().begin(), z.values().end(),
                emb.values().begin() + static_cast<size_t>(s) * cfg.seq_len * cfg.dyn_embedding);
    }
    auto result = predict_sequence(emb, predictor, spec, NormEnv{false, nullptr});
    for (int step = 1; step < cfg.seq_len; ++step) {
      Tensor<float> back =
          denormalize_prediction(result.preds[static_cast<size_t>(step - 1)], result.stats, step);
      Tensor<float> decoded = ae.decode(back);
      for (int s = 0; s < count; ++s) {
        const float* pred_img = decoded.values().data() + static_cast<size_t>(s) * frame_elems;
        const float* true_img = frames[static_cast<size_t>(s)][static_cast<size_t>(step)].data();
        const float* prev_img = frames[static_cast<size_t>(s)][static_cast<size_t>(step - 1)].data();
        for (size_t px = 0; px < frame_elems; ++px) {
          double d = static_cast<double>(pred_img[px]) - true_img[px];
          sq_sum += d * d;
          double c = static_cast<double>(prev_img[px]) - true_img[px];
          copy_sum += c * c;
        }
        sq_count += static_cast<int64_t>(frame_elems);
      }
    }
  }
  eval.image_mse = sq_sum / static_cast<double>(sq_count);
  eval.copy_baseline_mse = copy_sum / static_cast<double>(sq_count);
  return eval;
}

std::vector<float> read_loss_column(const std::string& loss_csv_path) {
  std::vector<float> out;
  std::ifstream in(loss_csv_path);
  if (!in.good()) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("iteration", 0) == 0) continue;
    auto c1 = line.find(',');
    if (c1 == std::string::npos) continue;
    auto c2 = line.find(',', c1 + 1);
    std::string cell = c2 == std::string::npos ? line.substr(c1 + 1) : line.substr(c1 + 1, c2 - c1 - 1);
    out.push_back(std::stof(cell));
  }
  return out;
}

}  // namespace tcn
