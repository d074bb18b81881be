#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tcn/normalization.hpp"
#include "tcn/ops.hpp"
#include "tcn/optim.hpp"

namespace tcn {

// The two model families: the analogy scorer (conv encoder + LSTM + linear
// score over candidate contexts, normalization applied to the embeddings) and
// the autoencoder + LSTM predictor pair for dynamic object prediction.

enum class NormPlacement { embedding, recurrent };

inline NormPlacement parse_norm_placement(const std::string& s) {
  if (s == "embedding") return NormPlacement::embedding;
  if (s == "recurrent") return NormPlacement::recurrent;
  fail("unknown norm placement '" + s + "'");
}

// ---------------------------------------------------------------------------
// Analogy scorer
// ---------------------------------------------------------------------------

struct AnalogyScorerConfig {
  int image_size = 128;
  int in_channels = 3;
  int conv_channels = 32;
  int conv_layers = 4;
  int kernel = 4;
  int stride = 2;
  int pad = 1;
  int fc_units = 256;
  int embedding = 256;
  int lstm_hidden = 256;
  NormPlacement norm_placement = NormPlacement::embedding;

  int feature_side() const {
    int side = image_size;
    for (int l = 0; l < conv_layers; ++l) {
      check(side % stride == 0, "AnalogyScorerConfig: image size " + std::to_string(image_size) +
                                    " does not halve cleanly through " +
                                    std::to_string(conv_layers) + " stride-" +
                                    std::to_string(stride) + " layers");
      side /= stride;
    }
    return side;
  }
  int flat_features() const { return feature_side() * feature_side() * conv_channels; }
};

inline constexpr int kAnalogyTerms = 4;       // A, B, C, candidate
inline constexpr int kAnalogyCandidates = 7;  // D plus six foils
inline constexpr int kAnalogyImages = 3 + kAnalogyCandidates;

template <class S>
class AnalogyScorer {
 public:
  AnalogyScorer(const AnalogyScorerConfig& cfg, NormMethod method, Rng& rng)
      : cfg_(cfg) {
    norm_.method = method;
    auto xavier = [&](Shape shape) {
      return init_params<S>(shape, InitScheme::xavier_uniform, rng).set_requires_grad(true);
    };
    auto zeros = [&](Shape shape) {
      return init_params<S>(shape, InitScheme::zeros, rng).set_requires_grad(true);
    };
    int ch = cfg.conv_channels;
    for (int l = 0; l < cfg.conv_layers; ++l) {
      int in = l == 0 ? cfg.in_channels : ch;
      conv_w_.push_back(xavier({ch, in, cfg.kernel, cfg.kernel}));
      conv_b_.push_back(zeros({ch}));
    }
    fc1_w_ = xavier({cfg.flat_features(), cfg.fc_units});
    fc1_b_ = zeros({cfg.fc_units});
    fc2_w_ = xavier({cfg.fc_units, cfg.fc_units});
    fc2_b_ = zeros({cfg.fc_units});
    embed_w_ = xavier({cfg.fc_units, cfg.embedding});
    embed_b_ = zeros({cfg.embedding});
    if (method != NormMethod::none && cfg.norm_placement == NormPlacement::embedding) {
      norm_.gamma = init_params<S>({cfg.embedding}, InitScheme::ones, rng).set_requires_grad(true);
      norm_.beta = zeros({cfg.embedding});
    }
    if (cfg.norm_placement == NormPlacement::recurrent) {
      rec_gamma_ = init_params<S>({cfg.lstm_hidden}, InitScheme::ones, rng).set_requires_grad(true);
      rec_beta_ = zeros({cfg.lstm_hidden});
    }
    lstm_wx_ = xavier({cfg.embedding, 4 * cfg.lstm_hidden});
    lstm_wh_ = xavier({cfg.lstm_hidden, 4 * cfg.lstm_hidden});
    lstm_b_ = zeros({4 * cfg.lstm_hidden});
    score_w_ = xavier({cfg.lstm_hidden, 1});
    score_b_ = zeros({1});
    check(param_count() == expected_param_count(),
          "AnalogyScorer: parameter count " + std::to_string(param_count()) +
              " does not match architecture arithmetic " + std::to_string(expected_param_count()));
  }

  const AnalogyScorerConfig& config() const { return cfg_; }
  NormSpec<S>& norm_spec() { return norm_; }
  const NormSpec<S>& norm_spec() const { return norm_; }

  // (B, C, H, W) -> (B, embedding). ReLU in all hidden layers, linear output.
  Tensor<S> encode(const Tensor<S>& images) const {
    check(images.ndim() == 4 && images.dim(1) == cfg_.in_channels &&
              images.dim(2) == cfg_.image_size && images.dim(3) == cfg_.image_size,
          "encode: expected (B," + std::to_string(cfg_.in_channels) + "," +
              std::to_string(cfg_.image_size) + "," + std::to_string(cfg_.image_size) +
              ") images, got " + shape_str(images.shape()));
    Tensor<S> x = images;
    for (size_t l = 0; l < conv_w_.size(); ++l)
      x = relu(conv2d(x, conv_w_[l], conv_b_[l], cfg_.stride, cfg_.pad));
    x = flatten_rows(x);
    x = relu(linear(x, fc1_w_, fc1_b_));
    x = relu(linear(x, fc2_w_, fc2_b_));
    return linear(x, embed_w_, embed_b_);
  }

  // Scores one normalized candidate context per row: (B, T, E) -> (B, 1).
  // The recurrent state starts at zero for every sequence.
  Tensor<S> score_context(const Tensor<S>& contexts) const {
    check(contexts.ndim() == 3 && contexts.dim(2) == cfg_.embedding,
          "score_context: expected (B,T," + std::to_string(cfg_.embedding) + "), got " +
              shape_str(contexts.shape()));
    int b = contexts.dim(0), t = contexts.dim(1);
    Tensor<S> flat = reshape(contexts, {b * t, cfg_.embedding});
    LstmState<S> state{Tensor<S>({b, cfg_.lstm_hidden}), Tensor<S>({b, cfg_.lstm_hidden})};
    for (int step = 0; step < t; ++step) {
      std::vector<int> idx(static_cast<size_t>(b));
      for (int s = 0; s < b; ++s) idx[static_cast<size_t>(s)] = s * t + step;
      Tensor<S> x = gather_rows(flat, std::move(idx));
      state = lstm_step(x, state, lstm_wx_, lstm_wh_, lstm_b_);
      if (cfg_.norm_placement == NormPlacement::recurrent) state.h = recurrent_norm(state.h);
    }
    return linear(state.h, score_w_, score_b_);
  }

  // Full forward for a batch of problems. `images` holds kAnalogyImages rows
  // per problem in the order A, B, C, candidates[0..6]; returns (P, 7) logits.
  Tensor<S> solve_logits(const Tensor<S>& images, int problems, const NormEnv& env) const {
    Tensor<S> emb = encode(images);
    return score_embeddings(emb, problems, env);
  }

  // Same, starting from precomputed embeddings (P * 10, E).
  Tensor<S> score_embeddings(const Tensor<S>& embeddings, int problems, const NormEnv& env) const {
    check(embeddings.ndim() == 2 && embeddings.dim(0) == problems * kAnalogyImages,
          "score_embeddings: expected " + std::to_string(problems * kAnalogyImages) +
              " embedding rows, got " + shape_str(embeddings.shape()));
    Tensor<S> source = embeddings;
    if (normalizes_flat_batch()) {
      ContextBatch<S> flat{reshape(embeddings, {problems * kAnalogyImages, 1, cfg_.embedding}), {}};
      auto [normed, stats] = normalize(flat, norm_, env);
      source = reshape(normed.values, {problems * kAnalogyImages, cfg_.embedding});
    }
    std::vector<int> ctx_idx;
    ctx_idx.reserve(static_cast<size_t>(problems) * kAnalogyCandidates * kAnalogyTerms);
    for (int p = 0; p < problems; ++p)
      for (int c = 0; c < kAnalogyCandidates; ++c) {
        int base = p * kAnalogyImages;
        ctx_idx.push_back(base + 0);
        ctx_idx.push_back(base + 1);
        ctx_idx.push_back(base + 2);
        ctx_idx.push_back(base + 3 + c);
      }
    Tensor<S> ctx2d = gather_rows(source, std::move(ctx_idx));
    Tensor<S> ctx =
        reshape(ctx2d, {problems * kAnalogyCandidates, kAnalogyTerms, cfg_.embedding});
    if (normalizes_context()) {
      auto [normed, stats] = normalize(ContextBatch<S>{ctx, {}}, norm_, env);
      ctx = normed.values;
    }
    Tensor<S> scores = score_context(ctx);
    return reshape(scores, {problems, kAnalogyCandidates});
  }

  std::vector<std::pair<std::string, Tensor<S>*>> named_params() {
    std::vector<std::pair<std::string, Tensor<S>*>> out;
    for (size_t l = 0; l < conv_w_.size(); ++l) {
      out.push_back({"enc.conv" + std::to_string(l + 1) + ".w", &conv_w_[l]});
      out.push_back({"enc.conv" + std::to_string(l + 1) + ".b", &conv_b_[l]});
    }
    out.push_back({"enc.fc1.w", &fc1_w_});
    out.push_back({"enc.fc1.b", &fc1_b_});
    out.push_back({"enc.fc2.w", &fc2_w_});
    out.push_back({"enc.fc2.b", &fc2_b_});
    out.push_back({"enc.embed.w", &embed_w_});
    out.push_back({"enc.embed.b", &embed_b_});
    if (norm_.gamma.defined()) {
      out.push_back({"norm.gamma", &norm_.gamma});
      out.push_back({"norm.beta", &norm_.beta});
    }
    if (rec_gamma_.defined()) {
      out.push_back({"norm.rec_gamma", &rec_gamma_});
      out.push_back({"norm.rec_beta", &rec_beta_});
    }
    out.push_back({"lstm.w_x", &lstm_wx_});
    out.push_back({"lstm.w_h", &lstm_wh_});
    out.push_back({"lstm.b", &lstm_b_});
    out.push_back({"score.w", &score_w_});
    out.push_back({"score.b", &score_b_});
    return out;
  }

  std::vector<Tensor<S>> param_list() {
    std::vector<Tensor<S>> out;
    for (auto& [name, t] : named_params()) out.push_back(*t);
    return out;
  }

  int64_t param_count() {
    int64_t n = 0;
    for (auto& [name, t] : named_params()) n += t->size();
    return n;
  }

  int64_t expected_param_count() const {
    int64_t n = 0;
    int ch = cfg_.conv_channels;
    for (int l = 0; l < cfg_.conv_layers; ++l) {
      int in = l == 0 ? cfg_.in_channels : ch;
      n += static_cast<int64_t>(ch) * in * cfg_.kernel * cfg_.kernel + ch;
    }
    n += static_cast<int64_t>(cfg_.flat_features()) * cfg_.fc_units + cfg_.fc_units;
    n += static_cast<int64_t>(cfg_.fc_units) * cfg_.fc_units + cfg_.fc_units;
    n += static_cast<int64_t>(cfg_.fc_units) * cfg_.embedding + cfg_.embedding;
    if (norm_.method != NormMethod::none && cfg_.norm_placement == NormPlacement::embedding)
      n += 2 * static_cast<int64_t>(cfg_.embedding);
    if (cfg_.norm_placement == NormPlacement::recurrent)
      n += 2 * static_cast<int64_t>(cfg_.lstm_hidden);
    n += static_cast<int64_t>(cfg_.embedding) * 4 * cfg_.lstm_hidden;
    n += static_cast<int64_t>(cfg_.lstm_hidden) * 4 * cfg_.lstm_hidden + 4 * cfg_.lstm_hidden;
    n += cfg_.lstm_hidden + 1;
    return n;
  }

 private:
  bool normalizes_flat_batch() const {
    if (cfg_.norm_placement == NormPlacement::recurrent) return false;
    switch (norm_.method) {
      case NormMethod::batch:
      case NormMethod::sub_batch:
      case NormMethod::batch_train_stats:
      case NormMethod::batch_plus_dropout:
        return true;
      default:
        return false;
    }
  }
  bool normalizes_context() const {
    if (cfg_.norm_placement == NormPlacement::recurrent) return false;
    switch (norm_.method) {
      case NormMethod::tcn:
      case NormMethod::tcn_plus_batch:
      case NormMethod::misaligned_tcn:
      case NormMethod::sliding_window_tcn:
      case NormMethod::layer:
        return true;
      default:
        return false;
    }
  }

  Tensor<S> recurrent_norm(const Tensor<S>& h) const {
    NormSpec<S> spec;
    spec.method = NormMethod::layer;
    spec.eps = norm_.eps;
    spec.gamma = rec_gamma_;
    spec.beta = rec_beta_;
    auto [normed, stats] =
        normalize(ContextBatch<S>{reshape(h, {h.dim(0), 1, h.dim(1)}), {}}, spec, {});
    return reshape(normed.values, h.shape());
  }

  AnalogyScorerConfig cfg_;
  NormSpec<S> norm_;
  std::vector<Tensor<S>> conv_w_, conv_b_;
  Tensor<S> fc1_w_, fc1_b_, fc2_w_, fc2_b_, embed_w_, embed_b_;
  Tensor<S> rec_gamma_, rec_beta_;
  Tensor<S> lstm_wx_, lstm_wh_, lstm_b_, score_w_, score_b_;
};

// ---------------------------------------------------------------------------
// Autoencoder
// ---------------------------------------------------------------------------

struct AutoencoderConfig {
  int image_size = 64;
  int in_channels = 1;
  int conv_channels = 32;
  int conv_layers = 3;
  int kernel = 4;
  int stride = 2;
  int pad = 1;
  int fc_units = 256;
  int embedding = 10;

  int feature_side() const {
    int side = image_size;
    for (int l = 0; l < conv_layers; ++l) {
      check(side % stride == 0, "AutoencoderConfig: image size " + std::to_string(image_size) +
                                    " does not halve cleanly");
      side /= stride;
    }
    return side;
  }
  int flat_features() const { return feature_side() * feature_side() * conv_channels; }
};

template <class S>
class Autoencoder {
 public:
  Autoencoder(const AutoencoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    // Weights and biases drawn uniformly within 1/sqrt(n), n = input dims of
    // the layer.
    auto uniform_n = [&](Shape shape, int64_t n) {
      return init_uniform_bound<S>(shape, 1.0 / std::sqrt(static_cast<double>(n)), rng)
          .set_requires_grad(true);
    };
    int ch = cfg.conv_channels;
    int k = cfg.kernel;
    for (int l = 0; l < cfg.conv_layers; ++l) {
      int in = l == 0 ? cfg.in_channels : ch;
      int64_t n = static_cast<int64_t>(in) * k * k;
      enc_conv_w_.push_back(uniform_n({ch, in, k, k}, n));
      enc_conv_b_.push_back(uniform_n({ch}, n));
    }
    enc_fc1_w_ = uniform_n({cfg.flat_features(), cfg.fc_units}, cfg.flat_features());
    enc_fc1_b_ = uniform_n({cfg.fc_units}, cfg.flat_features());
    enc_fc2_w_ = uniform_n({cfg.fc_units, cfg.fc_units}, cfg.fc_units);
    enc_fc2_b_ = uniform_n({cfg.fc_units}, cfg.fc_units);
    enc_embed_w_ = uniform_n({cfg.fc_units, cfg.embedding}, cfg.fc_units);
    enc_embed_b_ = uniform_n({cfg.embedding}, cfg.fc_units);
    dec_fc1_w_ = uniform_n({cfg.embedding, cfg.fc_units}, cfg.embedding);
    dec_fc1_b_ = uniform_n({cfg.fc_units}, cfg.embedding);
    dec_fc2_w_ = uniform_n({cfg.fc_units, cfg.fc_units}, cfg.fc_units);
    dec_fc2_b_ = uniform_n({cfg.fc_units}, cfg.fc_units);
    dec_fc3_w_ = uniform_n({cfg.fc_units, cfg.flat_features()}, cfg.fc_units);
    dec_fc3_b_ = uniform_n({cfg.flat_features()}, cfg.fc_units);
    for (int l = 0; l < cfg.conv_layers; ++l) {
      int out = l == cfg.conv_layers - 1 ? cfg.in_channels : ch;
      int64_t n = static_cast<int64_t>(ch) * k * k;
      dec_conv_w_.push_back(uniform_n({ch, out, k, k}, n));
      dec_conv_b_.push_back(uniform_n({out}, n));
    }
    check(param_count() == expected_param_count(),
          "Autoencoder: parameter count " + std::to_string(param_count()) +
              " does not match architecture arithmetic " + std::to_string(expected_param_count()));
  }

  const AutoencoderConfig& config() const { return cfg_; }

  Tensor<S> encode(const Tensor<S>& images) const {
    check(images.ndim() == 4 && images.dim(1) == cfg_.in_channels &&
              images.dim(2) == cfg_.image_size && images.dim(3) == cfg_.image_size,
          "Autoencoder::encode: expected (B," + std::to_string(cfg_.in_channels) + "," +
              std::to_string(cfg_.image_size) + "," + std::to_string(cfg_.image_size) +
              ") images, got " + shape_str(images.shape()));
    Tensor<S> x = images;
    for (size_t l = 0; l < enc_conv_w_.size(); ++l)
      x = relu(conv2d(x, enc_conv_w_[l], enc_conv_b_[l], cfg_.stride, cfg_.pad));
    x = flatten_rows(x);
    x = relu(linear(x, enc_fc1_w_, enc_fc1_b_));
    x = relu(linear(x, enc_fc2_w_, enc_fc2_b_));
    return linear(x, enc_embed_w_, enc_embed_b_);
  }

  Tensor<S> decode(const Tensor<S>& z) const {
    check(z.ndim() == 2 && z.dim(1) == cfg_.embedding,
          "Autoencoder::decode: expected (B," + std::to_string(cfg_.embedding) + "), got " +
              shape_str(z.shape()));
    int b = z.dim(0);
    Tensor<S> x = relu(linear(z, dec_fc1_w_, dec_fc1_b_));
    x = relu(linear(x, dec_fc2_w_, dec_fc2_b_));
    x = relu(linear(x, dec_fc3_w_, dec_fc3_b_));
    int side = cfg_.feature_side();
    x = reshape(x, {b, cfg_.conv_channels, side, side});
    for (size_t l = 0; l < dec_conv_w_.size(); ++l) {
      x = conv_transpose2d(x, dec_conv_w_[l], dec_conv_b_[l], cfg_.stride, cfg_.pad);
      x = l + 1 < dec_conv_w_.size() ? relu(x) : sigmoid(x);
    }
    return x;
  }

  std::pair<Tensor<S>, Tensor<S>> autoencode(const Tensor<S>& images) const {
    Tensor<S> z = encode(images);
    return {z, decode(z)};
  }

  std::vector<std::pair<std::string, Tensor<S>*>> named_params() {
    std::vector<std::pair<std::string, Tensor<S>*>> out;
    for (size_t l = 0; l < enc_conv_w_.size(); ++l) {
      out.push_back({"ae.enc.conv" + std::to_string(l + 1) + ".w", &enc_conv_w_[l]});
      out.push_back({"ae.enc.conv" + std::to_string(l + 1) + ".b", &enc_conv_b_[l]});
    }
    out.push_back({"ae.enc.fc1.w", &enc_fc1_w_});
    out.push_back({"ae.enc.fc1.b", &enc_fc1_b_});
    out.push_back({"ae.enc.fc2.w", &enc_fc2_w_});
    out.push_back({"ae.enc.fc2.b", &enc_fc2_b_});
    out.push_back({"ae.enc.embed.w", &enc_embed_w_});
    out.push_back({"ae.enc.embed.b", &enc_embed_b_});
    out.push_back({"ae.dec.fc1.w", &dec_fc1_w_});
    out.push_back({"ae.dec.fc1.b", &dec_fc1_b_});
    out.push_back({"ae.dec.fc2.w", &dec_fc2_w_});
    out.push_back({"ae.dec.fc2.b", &dec_fc2_b_});
    out.push_back({"ae.dec.fc3.w", &dec_fc3_w_});
    out.push_back({"ae.dec.fc3.b", &dec_fc3_b_});
    for (size_t l = 0; l < dec_conv_w_.size(); ++l) {
      out.push_back({"ae.dec.convt" + std::to_string(l + 1) + ".w", &dec_conv_w_[l]});
      out.push_back({"ae.dec.convt" + std::to_string(l + 1) + ".b", &dec_conv_b_[l]});
    }
    return out;
  }

  std::vector<Tensor<S>> param_list() {
    std::vector<Tensor<S>> out;
    for (auto& [name, t] : named_params()) out.push_back(*t);
    return out;
  }

  int64_t param_count() {
    int64_t n = 0;
    for (auto& [name, t] : named_params()) n += t->size();
    return n;
  }

  int64_t expected_param_count() const {
    int64_t n = 0;
    int ch = cfg_.conv_channels, k = cfg_.kernel;
    for (int l = 0; l < cfg_.conv_layers; ++l) {
      int in = l == 0 ? cfg_.in_channels : ch;
      n += static_cast<int64_t>(ch) * in * k * k + ch;
    }
    int64_t flat = cfg_.flat_features(), fc = cfg_.fc_units, e = cfg_.embedding;
    n += flat * fc + fc + fc * fc + fc + fc * e + e;          // encoder FCs
    n += e * fc + fc + fc * fc + fc + fc * flat + flat;       // decoder FCs
    for (int l = 0; l < cfg_.conv_layers; ++l) {
      int out = l == cfg_.conv_layers - 1 ? cfg_.in_channels : ch;
      n += static_cast<int64_t>(ch) * out * k * k + out;
    }
    return n;
  }

 private:
  AutoencoderConfig cfg_;
  std::vector<Tensor<S>> enc_conv_w_, enc_conv_b_, dec_conv_w_, dec_conv_b_;
  Tensor<S> enc_fc1_w_, enc_fc1_b_, enc_fc2_w_, enc_fc2_b_, enc_embed_w_, enc_embed_b_;
  Tensor<S> dec_fc1_w_, dec_fc1_b_, dec_fc2_w_, dec_fc2_b_, dec_fc3_w_, dec_fc3_b_;
};

// ---------------------------------------------------------------------------
// Sequence predictor
// ---------------------------------------------------------------------------

struct PredictorConfig {
  int embedding = 10;
  int lstm_hidden = 20;
};

template <class S>
class Predictor {
 public:
  Predictor(const PredictorConfig& cfg, Rng& rng) : cfg_(cfg) {
    // PyTorch-style: every parameter uniform within 1/sqrt(hidden).
    auto uniform_h = [&](Shape shape) {
      return init_uniform_bound<S>(shape, 1.0 / std::sqrt(static_cast<double>(cfg.lstm_hidden)),
                                   rng)
          .set_requires_grad(true);
    };
    lstm_wx_ = uniform_h({cfg.embedding, 4 * cfg.lstm_hidden});
    lstm_wh_ = uniform_h({cfg.lstm_hidden, 4 * cfg.lstm_hidden});
    lstm_b_ = uniform_h({4 * cfg.lstm_hidden});
    out_w_ = uniform_h({cfg.lstm_hidden, cfg.embedding});
    out_b_ = uniform_h({cfg.embedding});
    check(param_count() == expected_param_count(),
          "Predictor: parameter count " + std::to_string(param_count()) +
              " does not match architecture arithmetic " + std::to_string(expected_param_count()));
  }

  const PredictorConfig& config() const { return cfg_; }

  // Consumes normalized embeddings (B, T, E), T >= 2; returns T-1 predictions
  // (B, E), one per target position 1..T-1, still in normalized coordinates.
  std::vector<Tensor<S>> forward(const Tensor<S>& normalized) const {
    check(normalized.ndim() == 3 && normalized.dim(2) == cfg_.embedding,
          "Predictor::forward: expected (B,T," + std::to_string(cfg_.embedding) + "), got " +
              shape_str(normalized.shape()));
    int b = normalized.dim(0), t = normalized.dim(1);
    check(t >= 2, "Predictor::forward: sequence length must be >= 2, got " + std::to_string(t));
    Tensor<S> flat = reshape(normalized, {b * t, cfg_.embedding});
    LstmState<S> state{Tensor<S>({b, cfg_.lstm_hidden}), Tensor<S>({b, cfg_.lstm_hidden})};
    std::vector<Tensor<S>> preds;
    preds.reserve(static_cast<size_t>(t - 1));
    for (int step = 0; step + 1 < t; ++step) {
      std::vector<int> idx(static_cast<size_t>(b));
      for (int s = 0; s < b; ++s) idx[static_cast<size_t>(s)] = s * t + step;
      Tensor<S> x = gather_rows(flat, std::move(idx));
      state = lstm_step(x, state, lstm_wx_, lstm_wh_, lstm_b_);
      preds.push_back(linear(state.h, out_w_, out_b_));
    }
    return preds;
  }

  std::vector<std::pair<std::string, Tensor<S>*>> named_params() {
    return {{"pred.lstm.w_x", &lstm_wx_},
            {"pred.lstm.w_h", &lstm_wh_},
            {"pred.lstm.b", &lstm_b_},
            {"pred.out.w", &out_w_},
            {"pred.out.b", &out_b_}};
  }

  std::vector<Tensor<S>> param_list() {
    std::vector<Tensor<S>> out;
    for (auto& [name, t] : named_params()) out.push_back(*t);
    return out;
  }

  int64_t param_count() {
    int64_t n = 0;
    for (auto& [name, t] : named_params()) n += t->size();
    return n;
  }

  int64_t expected_param_count() const {
    int64_t e = cfg_.embedding, h = cfg_.lstm_hidden;
    return e * 4 * h + h * 4 * h + 4 * h + h * e + e;
  }

 private:
  PredictorConfig cfg_;
  Tensor<S> lstm_wx_, lstm_wh_, lstm_b_, out_w_, out_b_;
};

// Full prediction pipeline on an embedding sequence: normalization statistics
// are computed once over the whole sequence, the predictor runs on normalized
// values, and predictions can be mapped back through sigma * z + mu.
template <class S>
struct SequencePrediction {
  Tensor<S> normalized;            // (B, T, E)
  NormStats<S> stats;              // matching stats, constant on the tape
  std::vector<Tensor<S>> preds;    // T-1 x (B, E), normalized coordinates
};

template <class S>
SequencePrediction<S> predict_sequence(const Tensor<S>& embeddings, const Predictor<S>& predictor,
                                       const NormSpec<S>& spec, const NormEnv& env = {}) {
  check(embeddings.ndim() == 3, "predict_sequence: expected (B,T,E) embeddings, got " +
                                    shape_str(embeddings.shape()));
  check(embeddings.dim(1) >= 2, "predict_sequence: sequence length must be >= 2, got " +
                                    std::to_string(embeddings.dim(1)));
  auto [normed, stats] = normalize(ContextBatch<S>{embeddings, {}}, spec, env);
  SequencePrediction<S> out;
  out.normalized = normed.values;
  out.stats = std::move(stats);
  out.preds = predictor.forward(out.normalized);
  return out;
}

// De-normalizes the prediction for target position `t` (1-based within the
// sequence: preds[i] targets position i+1) using that position's stats.
template <class S>
Tensor<S> denormalize_prediction(const Tensor<S>& pred, const NormStats<S>& stats, int t) {
  int b = stats.mean.dim(0), seq_t = stats.mean.dim(1), e = stats.mean.dim(2);
  check(t >= 0 && t < seq_t, "denormalize_prediction: position " + std::to_string(t) +
                                 " outside sequence of length " + std::to_string(seq_t));
  check(pred.ndim() == 2 && pred.dim(0) == b && pred.dim(1) == e,
        "denormalize_prediction: prediction " + shape_str(pred.shape()) +
            " does not match stats " + shape_str(stats.mean.shape()));
  NormStats<S> slice{Tensor<S>({b, e}), Tensor<S>({b, e})};
  for (int s = 0; s < b; ++s)
    for (int k = 0; k < e; ++k) {
      size_t src = (static_cast<size_t>(s) * seq_t + t) * e + static_cast<size_t>(k);
      size_t dst = static_cast<size_t>(s) * e + static_cast<size_t>(k);
      slice.mean.values()[dst] = stats.mean.values()[src];
      slice.stdev.values()[dst] = stats.stdev.values()[src];
    }
  return tcn_inverse(pred, slice);
}

}  // namespace tcn
