#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tcn/models.hpp"

using tcn::AnalogyScorer;
using tcn::AnalogyScorerConfig;
using tcn::Autoencoder;
using tcn::AutoencoderConfig;
using tcn::NormEnv;
using tcn::NormMethod;
using tcn::Predictor;
using tcn::PredictorConfig;
using tcn::Tensor;

namespace {

AnalogyScorerConfig toy_scorer_config() {
  AnalogyScorerConfig cfg;
  cfg.image_size = 16;
  cfg.conv_channels = 4;
  cfg.fc_units = 12;
  cfg.embedding = 6;
  cfg.lstm_hidden = 8;
  return cfg;
}

AutoencoderConfig toy_ae_config() {
  AutoencoderConfig cfg;
  cfg.image_size = 8;
  cfg.conv_channels = 4;
  cfg.fc_units = 10;
  cfg.embedding = 4;
  return cfg;
}

template <class S>
Tensor<S> random_images(int count, int channels, int size, tcn::Rng& rng, double lo = 0.0,
                        double hi = 1.0) {
  Tensor<S> t({count, channels, size, size});
  for (auto& v : t.values()) v = static_cast<S>(rng.uniform(lo, hi));
  return t;
}

template <class S>
void zero_params(std::vector<std::pair<std::string, Tensor<S>*>> named,
                 const std::string& prefix) {
  for (auto& [name, t] : named)
    if (name.rfind(prefix, 0) == 0)
      for (auto& v : t->values()) v = S(0);
}

}  // namespace

TEST_CASE("encode: zero weights give zero embeddings; purity holds") {
  tcn::Rng rng(3);
  AnalogyScorer<double> scorer(toy_scorer_config(), NormMethod::none, rng);
  tcn::Rng img_rng(5);
  auto one = random_images<double>(1, 3, 16, img_rng);
  SUBCASE("zero weights") {
    for (auto& [name, t] : scorer.named_params())
      for (auto& v : t->values()) v = 0.0;
    auto z = scorer.encode(one);
    for (double v : z.values()) CHECK(v == 0.0);
  }
  SUBCASE("identical images produce identical embeddings") {
    Tensor<double> two({2, 3, 16, 16});
    std::copy(one.values().begin(), one.values().end(), two.values().begin());
    std::copy(one.values().begin(), one.values().end(), two.values().begin() + one.size());
    auto z = scorer.encode(two);
    for (int k = 0; k < 6; ++k)
      CHECK(z.values()[static_cast<size_t>(k)] == z.values()[static_cast<size_t>(6 + k)]);
  }
  SUBCASE("wrong image size is a hard error") {
    CHECK_THROWS_AS(scorer.encode(random_images<double>(1, 3, 8, img_rng)),
                    std::invalid_argument);
  }
}

TEST_CASE("encode: gradient of |z|^2 w.r.t. the image matches finite differences") {
  tcn::Rng rng(7);
  AnalogyScorer<double> scorer(toy_scorer_config(), NormMethod::none, rng);
  tcn::Rng img_rng(11);
  auto img = random_images<double>(1, 3, 16, img_rng);
  img.set_requires_grad(true);
  auto fwd = [&]() {
    auto z = scorer.encode(img);
    return tcn::mean_all(tcn::mul(z, z));
  };
  auto res = oracle::check_gradients({img}, fwd, 16);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("score_context: zero parameters give zero scores for every candidate") {
  tcn::Rng rng(13);
  AnalogyScorer<double> scorer(toy_scorer_config(), NormMethod::none, rng);
  zero_params(scorer.named_params(), "lstm.");
  zero_params(scorer.named_params(), "score.");
  tcn::Rng ctx_rng(17);
  Tensor<double> ctx({5, 4, 6});
  for (auto& v : ctx.values()) v = ctx_rng.uniform(-1, 1);
  auto scores = scorer.score_context(ctx);
  for (double v : scores.values()) CHECK(v == 0.0);
}

TEST_CASE("solve: probabilities sum to one; zero head gives uniform 1/7") {
  tcn::Rng rng(19);
  AnalogyScorer<double> scorer(toy_scorer_config(), NormMethod::none, rng);
  tcn::Rng img_rng(23);
  int problems = 3;
  auto images = random_images<double>(problems * tcn::kAnalogyImages, 3, 16, img_rng);
  auto logits = scorer.solve_logits(images, problems, {});
  auto probs = tcn::softmax(logits);
  for (int p = 0; p < problems; ++p) {
    double sum = 0;
    for (int c = 0; c < 7; ++c) {
      double v = probs.values()[static_cast<size_t>(p) * 7 + c];
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  zero_params(scorer.named_params(), "lstm.");
  zero_params(scorer.named_params(), "score.");
  auto uniform = tcn::softmax(scorer.solve_logits(images, problems, {}));
  for (double v : uniform.values()) CHECK(v == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("solve: permuting candidates permutes scores identically") {
  tcn::Rng rng(29);
  AnalogyScorer<double> scorer(toy_scorer_config(), NormMethod::tcn, rng);
  tcn::Rng img_rng(31);
  auto images = random_images<double>(tcn::kAnalogyImages, 3, 16, img_rng);
  auto base = scorer.solve_logits(images, 1, {});
  // Swap candidates 2 and 5 (image rows 5 and 8).
  Tensor<double> swapped = images;
  Tensor<double> copy({tcn::kAnalogyImages, 3, 16, 16}, images.values());
  size_t stride = static_cast<size_t>(3) * 16 * 16;
  std::swap_ranges(copy.values().begin() + 5 * stride, copy.values().begin() + 6 * stride,
                   copy.values().begin() + 8 * stride);
  auto perm = scorer.solve_logits(copy, 1, {});
  for (int c = 0; c < 7; ++c) {
    int src = c == 2 ? 5 : c == 5 ? 2 : c;
    CHECK(perm.values()[static_cast<size_t>(c)] ==
          doctest::Approx(base.values()[static_cast<size_t>(src)]).epsilon(1e-9));
  }
}

TEST_CASE("solve under TCN ignores per-feature embedding shifts") {
  // Shifting every image's embedding by a per-feature constant leaves each
  // candidate context's normalized values, and hence all scores, unchanged.
  tcn::Rng rng(37);
  AnalogyScorer<double> scorer(toy_scorer_config(), NormMethod::tcn, rng);
  tcn::Rng erng(41);
  int problems = 2;
  Tensor<double> emb({problems * tcn::kAnalogyImages, 6});
  for (auto& v : emb.values()) v = erng.uniform(-2, 2);
  auto base = scorer.score_embeddings(emb, problems, {});
  Tensor<double> shifted(emb.shape());
  std::vector<double> offset = {3.0, -1.5, 0.25, 10.0, -7.0, 2.0};
  for (size_t i = 0; i < emb.values().size(); ++i)
    shifted.values()[i] = emb.values()[i] + offset[i % 6];
  auto moved = scorer.score_embeddings(shifted, problems, {});
  for (size_t i = 0; i < base.values().size(); ++i)
    CHECK(moved.values()[i] == doctest::Approx(base.values()[i]).epsilon(1e-4));
}

TEST_CASE("solve end-to-end gradient check through TCN") {
  tcn::Rng rng(43);
  AnalogyScorer<double> scorer(toy_scorer_config(), NormMethod::tcn, rng);
  tcn::Rng img_rng(47);
  int problems = 2;
  auto images = random_images<double>(problems * tcn::kAnalogyImages, 3, 16, img_rng);
  std::vector<Tensor<double>> params = scorer.param_list();
  auto fwd = [&]() {
    auto logits = scorer.solve_logits(images, problems, {});
    return tcn::softmax_cross_entropy(logits, {2, 5});
  };
  auto res = oracle::check_gradients(params, fwd, 6);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("layer norm on the recurrent state is differentiable") {
  tcn::Rng rng(51);
  AnalogyScorerConfig cfg = toy_scorer_config();
  cfg.norm_placement = tcn::NormPlacement::recurrent;
  AnalogyScorer<double> scorer(cfg, NormMethod::layer, rng);
  tcn::Rng erng(53);
  Tensor<double> emb({tcn::kAnalogyImages, 6});
  for (auto& v : emb.values()) v = erng.uniform(-1, 1);
  std::vector<Tensor<double>> params = scorer.param_list();
  auto fwd = [&]() {
    auto logits = scorer.score_embeddings(emb, 1, {});
    return tcn::softmax_cross_entropy(logits, {3});
  };
  auto res = oracle::check_gradients(params, fwd, 6);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("autoencoder: reconstruction in (0,1); zero-distance loss is zero") {
  tcn::Rng rng(59);
  Autoencoder<double> ae(toy_ae_config(), rng);
  tcn::Rng img_rng(61);
  auto images = random_images<double>(3, 1, 8, img_rng);
  auto [z, recon] = ae.autoencode(images);
  CHECK(z.shape() == tcn::Shape{3, 4});
  CHECK(recon.shape() == images.shape());
  for (double v : recon.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  auto self_loss = tcn::mse_loss(recon, recon);
  CHECK(self_loss.item() == 0.0);
}

TEST_CASE("autoencoder end-to-end gradient check") {
  tcn::Rng rng(67);
  Autoencoder<double> ae(toy_ae_config(), rng);
  tcn::Rng img_rng(71);
  auto images = random_images<double>(2, 1, 8, img_rng);
  std::vector<Tensor<double>> params = ae.param_list();
  auto fwd = [&]() {
    auto [z, recon] = ae.autoencode(images);
    return tcn::mse_loss(recon, images);
  };
  auto res = oracle::check_gradients(params, fwd, 5);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("predictor with norm none reduces to a plain LSTM pass") {
  tcn::Rng rng(73);
  Predictor<double> pred(PredictorConfig{3, 5}, rng);
  tcn::Rng erng(79);
  Tensor<double> emb({2, 6, 3});
  for (auto& v : emb.values()) v = erng.uniform(-1, 1);
  tcn::NormSpec<double> spec;
  spec.method = NormMethod::none;
  auto result = tcn::predict_sequence(emb, pred, spec);
  CHECK(result.normalized.values() == emb.values());
  auto direct = pred.forward(emb);
  REQUIRE(direct.size() == result.preds.size());
  for (size_t s = 0; s < direct.size(); ++s)
    CHECK(direct[s].values() == result.preds[s].values());
}

TEST_CASE("de-normalized zero prediction equals the per-feature mean") {
  tcn::Rng rng(83);
  Predictor<double> pred(PredictorConfig{3, 5}, rng);
  tcn::Rng erng(89);
  Tensor<double> emb({2, 6, 3});
  for (auto& v : emb.values()) v = erng.uniform(-4, 4);
  tcn::NormSpec<double> spec;  // tcn
  auto result = tcn::predict_sequence(emb, pred, spec);
  Tensor<double> zero({2, 3});
  auto back = tcn::denormalize_prediction(zero, result.stats, 3);
  for (int s = 0; s < 2; ++s)
    for (int k = 0; k < 3; ++k)
      CHECK(back.values()[static_cast<size_t>(s) * 3 + k] ==
            doctest::Approx(result.stats.mean.values()[(static_cast<size_t>(s) * 6 + 3) * 3 + k]));
}

TEST_CASE("predictor: T < 2 is a hard error") {
  tcn::Rng rng(97);
  Predictor<double> pred(PredictorConfig{3, 5}, rng);
  tcn::NormSpec<double> spec;
  Tensor<double> emb({2, 1, 3});
  CHECK_THROWS_AS(tcn::predict_sequence(emb, pred, spec), std::invalid_argument);
}

TEST_CASE("prediction pipeline gradient check, embedding and image space") {
  tcn::Rng rng(101);
  Predictor<double> pred(PredictorConfig{4, 6}, rng);
  Autoencoder<double> ae(toy_ae_config(), rng);
  tcn::Rng erng(103);
  Tensor<double> emb({2, 4, 4});
  for (auto& v : emb.values()) v = erng.uniform(-1, 1);
  tcn::NormSpec<double> spec;  // tcn with gamma=1, beta=0 frozen
  std::vector<Tensor<double>> params = pred.param_list();

  SUBCASE("normalized-embedding MSE") {
    auto fwd = [&]() {
      auto result = tcn::predict_sequence(emb, pred, spec);
      Tensor<double> loss = Tensor<double>::scalar(0.0);
      for (size_t s = 0; s < result.preds.size(); ++s) {
        std::vector<int> idx(2);
        for (int b = 0; b < 2; ++b) idx[static_cast<size_t>(b)] = b * 4 + static_cast<int>(s) + 1;
        auto target = tcn::gather_rows(tcn::reshape(result.normalized, {8, 4}), idx);
        loss = tcn::add(loss, tcn::mse_loss(result.preds[s], target));
      }
      return tcn::scale(loss, 1.0 / static_cast<double>(result.preds.size()));
    };
    auto res = oracle::check_gradients(params, fwd, 8);
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
  }

  SUBCASE("image-space MSE through de-normalization and the decoder") {
    tcn::Rng img_rng(107);
    auto frames = random_images<double>(2, 1, 8, img_rng);  // stand-in targets for step 1
    auto fwd = [&]() {
      auto result = tcn::predict_sequence(emb, pred, spec);
      auto back = tcn::denormalize_prediction(result.preds[0], result.stats, 1);
      auto decoded = ae.decode(back);
      return tcn::mse_loss(decoded, frames);
    };
    auto res = oracle::check_gradients(params, fwd, 8);
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
  }
}
