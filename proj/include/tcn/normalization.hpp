#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcn/ops.hpp"

namespace tcn {

// Context normalization and its ablation family. All methods operate on a
// ContextBatch of activations indexed (sequence, time, feature) and reduce to
// one primitive: partition the elements into groups, normalize each group by
// its mean and population standard deviation sqrt(var + eps), then apply the
// learned per-feature gain/shift. The sliding-window variant has overlapping
// windows and gets its own op.
//
// Segmentation support: a sequence's T positions can be partitioned into
// several contexts (e.g. source/target halves); statistics never cross a
// segment boundary.

enum class NormMethod {
  tcn,
  batch,
  batch_train_stats,
  layer,
  sub_batch,
  misaligned_tcn,
  sliding_window_tcn,
  tcn_plus_batch,
  batch_plus_dropout,
  none,
};

inline NormMethod parse_norm_method(const std::string& s) {
  if (s == "tcn") return NormMethod::tcn;
  if (s == "batch") return NormMethod::batch;
  if (s == "batch_train_stats") return NormMethod::batch_train_stats;
  if (s == "layer") return NormMethod::layer;
  if (s == "sub_batch") return NormMethod::sub_batch;
  if (s == "misaligned_tcn") return NormMethod::misaligned_tcn;
  if (s == "sliding_window_tcn") return NormMethod::sliding_window_tcn;
  if (s == "tcn_plus_batch") return NormMethod::tcn_plus_batch;
  if (s == "batch_plus_dropout") return NormMethod::batch_plus_dropout;
  if (s == "none") return NormMethod::none;
  fail("unknown normalization method '" + s + "'");
}

inline std::string norm_method_name(NormMethod m) {
  switch (m) {
    case NormMethod::tcn: return "tcn";
    case NormMethod::batch: return "batch";
    case NormMethod::batch_train_stats: return "batch_train_stats";
    case NormMethod::layer: return "layer";
    case NormMethod::sub_batch: return "sub_batch";
    case NormMethod::misaligned_tcn: return "misaligned_tcn";
    case NormMethod::sliding_window_tcn: return "sliding_window_tcn";
    case NormMethod::tcn_plus_batch: return "tcn_plus_batch";
    case NormMethod::batch_plus_dropout: return "batch_plus_dropout";
    case NormMethod::none: return "none";
  }
  fail("norm_method_name: unreachable");
}

template <class S>
struct ContextBatch {
  Tensor<S> values;  // (N, T, H)
  // Per-sequence ordered partition of the T positions; empty means one
  // context spanning the whole sequence.
  std::vector<std::vector<int>> segments;

  int n() const { return values.dim(0); }
  int t() const { return values.dim(1); }
  int h() const { return values.dim(2); }
};

// Per-element (mean, std) captured during forward, broadcast to the full
// value shape so inversion is method-agnostic. std includes the eps term:
// std = sqrt(var + eps) >= sqrt(eps).
template <class S>
struct NormStats {
  Tensor<S> mean, stdev;
};

template <class S>
struct TrainStats {
  std::vector<S> mean, var;  // per feature
};

template <class S>
struct NormSpec {
  NormMethod method = NormMethod::tcn;
  S eps = static_cast<S>(1e-8);
  int sub_batch_size = 4;
  int segment_len = 5;
  int window = 4;
  double dropout_rate = 0.5;
  // Learned per-feature gain/shift (length H, init ones/zeros). Undefined
  // tensors mean the identity affine (gamma=1, beta=0).
  Tensor<S> gamma, beta;
  std::optional<TrainStats<S>> train_stats;
};

// Runtime context for normalize(): dropout needs a stream and a train flag.
struct NormEnv {
  bool training = false;
  Rng* rng = nullptr;
};

namespace detail {

// Element-to-group assignment; group -1 passes through with (mu, sigma) =
// (0, 1). feature_of indexes gamma/beta.
struct GroupLayout {
  std::vector<int32_t> group_of;
  std::vector<int32_t> feature_of;
  int num_groups = 0;
};

template <class S>
void check_affine(const NormSpec<S>& spec, int features) {
  if (spec.gamma.defined() || spec.beta.defined()) {
    check(spec.gamma.defined() && spec.beta.defined(),
          "NormSpec: gamma and beta must both be set or both be empty");
    check(spec.gamma.size() == features && spec.beta.size() == features,
          "NormSpec: gamma/beta length " + std::to_string(spec.gamma.size()) +
              " does not match feature count " + std::to_string(features));
  }
}

template <class S>
bool ops_need_grad(const Tensor<S>& x, const NormSpec<S>& spec) {
  return tcn::detail::any_requires_grad<S>({&x, &spec.gamma, &spec.beta});
}

// Fused group normalization with analytic backward. For group g with n_g
// members and xh = (x - mu)/sigma:
//   dx = (dxh - mean_g(dxh) - xh * mean_g(dxh * xh)) / sigma
// where dxh = dy * gamma.
template <class S>
std::pair<Tensor<S>, NormStats<S>> normalize_groups(const Tensor<S>& x,
                                                    std::shared_ptr<GroupLayout> layout,
                                                    const NormSpec<S>& spec) {
  size_t n = static_cast<size_t>(x.size());
  check(layout->group_of.size() == n, "normalize_groups: layout does not match tensor");
  bool affine = spec.gamma.defined();
  int groups = layout->num_groups;
  const auto& xv = x.values();

  std::vector<S> mean(groups, S(0)), sigma(groups, S(0));
  std::vector<int64_t> count(groups, 0);
  for (size_t i = 0; i < n; ++i) {
    int g = layout->group_of[i];
    if (g < 0) continue;
    mean[g] += xv[i];
    count[g] += 1;
  }
  for (int g = 0; g < groups; ++g) {
    check(count[g] > 0, "normalize_groups: empty context segment (group " + std::to_string(g) + ")");
    mean[g] /= static_cast<S>(count[g]);
  }
  for (size_t i = 0; i < n; ++i) {
    int g = layout->group_of[i];
    if (g < 0) continue;
    S d = xv[i] - mean[g];
    sigma[g] += d * d;
  }
  for (int g = 0; g < groups; ++g)
    sigma[g] = std::sqrt(sigma[g] / static_cast<S>(count[g]) + spec.eps);

  Tensor<S> out(x.shape());
  NormStats<S> stats{Tensor<S>(x.shape(), S(0)), Tensor<S>(x.shape(), S(1))};
  auto& ov = out.values();
  auto& mv = stats.mean.values();
  auto& sv = stats.stdev.values();
  const S* gammav = affine ? spec.gamma.values().data() : nullptr;
  const S* betav = affine ? spec.beta.values().data() : nullptr;
  for (size_t i = 0; i < n; ++i) {
    int g = layout->group_of[i];
    S xh = g < 0 ? xv[i] : (xv[i] - mean[g]) / sigma[g];
    if (g >= 0) {
      mv[i] = mean[g];
      sv[i] = sigma[g];
    }
    ov[i] = affine ? gammav[layout->feature_of[i]] * xh + betav[layout->feature_of[i]] : xh;
  }

  if (ops_need_grad(x, spec)) {
    std::vector<Tensor<S>> parents = {x};
    if (affine) {
      parents.push_back(spec.gamma);
      parents.push_back(spec.beta);
    }
    tcn::detail::attach<S>(
        out, std::move(parents),
        [layout = std::move(layout), mean = std::move(mean), sigma = std::move(sigma),
         count = std::move(count), affine](TensorNode<S>& nd) {
          auto& px = *nd.parents[0];
          size_t n = nd.value.size();
          int groups = static_cast<int>(mean.size());
          const S* gammav = affine ? nd.parents[1]->value.data() : nullptr;
          // dxh and xh per element, plus per-group sums.
          std::vector<S> s_dxh(groups, S(0)), s_dxh_xh(groups, S(0));
          std::vector<S> dxh(n), xh(n);
          for (size_t i = 0; i < n; ++i) {
            int g = layout->group_of[i];
            S gamma_i = affine ? gammav[layout->feature_of[i]] : S(1);
            dxh[i] = nd.grad[i] * gamma_i;
            if (g < 0) {
              xh[i] = px.value[i];
              continue;
            }
            xh[i] = (px.value[i] - mean[g]) / sigma[g];
            s_dxh[g] += dxh[i];
            s_dxh_xh[g] += dxh[i] * xh[i];
          }
          if (px.requires_grad) {
            for (size_t i = 0; i < n; ++i) {
              int g = layout->group_of[i];
              if (g < 0) {
                px.grad[i] += dxh[i];
                continue;
              }
              S inv_n = S(1) / static_cast<S>(count[g]);
              px.grad[i] +=
                  (dxh[i] - s_dxh[g] * inv_n - xh[i] * (s_dxh_xh[g] * inv_n)) / sigma[g];
            }
          }
          if (affine) {
            auto& pg = *nd.parents[1];
            auto& pb = *nd.parents[2];
            for (size_t i = 0; i < n; ++i) {
              int f = layout->feature_of[i];
              if (pg.requires_grad) pg.grad[f] += nd.grad[i] * xh[i];
              if (pb.requires_grad) pb.grad[f] += nd.grad[i];
            }
          }
        });
  }
  return {std::move(out), std::move(stats)};
}

// Per-position stats over the position itself and its window-1 predecessors
// in the concatenated (sequence-major) stream. Positions near the stream
// start use all available predecessors.
template <class S>
std::pair<Tensor<S>, NormStats<S>> sliding_window_normalize(const Tensor<S>& x, int positions,
                                                            int features, int window,
                                                            const NormSpec<S>& spec) {
  bool affine = spec.gamma.defined();
  const auto& xv = x.values();
  Tensor<S> out(x.shape());
  NormStats<S> stats{Tensor<S>(x.shape(), S(0)), Tensor<S>(x.shape(), S(1))};
  auto& ov = out.values();
  auto& mv = stats.mean.values();
  auto& sv = stats.stdev.values();
  const S* gammav = affine ? spec.gamma.values().data() : nullptr;
  const S* betav = affine ? spec.beta.values().data() : nullptr;
  for (int j = 0; j < positions; ++j) {
    int first = std::max(0, j - window + 1);
    S inv_n = S(1) / static_cast<S>(j - first + 1);
    for (int k = 0; k < features; ++k) {
      S m = 0;
      for (int q = first; q <= j; ++q) m += xv[static_cast<size_t>(q) * features + k];
      m *= inv_n;
      S var = 0;
      for (int q = first; q <= j; ++q) {
        S d = xv[static_cast<size_t>(q) * features + k] - m;
        var += d * d;
      }
      S sd = std::sqrt(var * inv_n + spec.eps);
      size_t i = static_cast<size_t>(j) * features + k;
      S xh = (xv[i] - m) / sd;
      mv[i] = m;
      sv[i] = sd;
      ov[i] = affine ? gammav[k] * xh + betav[k] : xh;
    }
  }

  if (ops_need_grad(x, spec)) {
    std::vector<Tensor<S>> parents = {x};
    if (affine) {
      parents.push_back(spec.gamma);
      parents.push_back(spec.beta);
    }
    // mu/sigma per element are cheap to keep; x_m - mu_j is recomputed from
    // the parent value.
    std::vector<S> mu_s = stats.mean.values(), sd_s = stats.stdev.values();
    tcn::detail::attach<S>(
        out, std::move(parents),
        [positions, features, window, affine, mu_s = std::move(mu_s),
         sd_s = std::move(sd_s)](TensorNode<S>& nd) {
          auto& px = *nd.parents[0];
          const S* gammav = affine ? nd.parents[1]->value.data() : nullptr;
          if (px.requires_grad) {
            for (int j = 0; j < positions; ++j) {
              int first = std::max(0, j - window + 1);
              S inv_n = S(1) / static_cast<S>(j - first + 1);
              for (int k = 0; k < features; ++k) {
                size_t i = static_cast<size_t>(j) * features + k;
                S gamma_k = affine ? gammav[k] : S(1);
                S dxh = nd.grad[i] * gamma_k;
                if (dxh == S(0)) continue;
                S sd = sd_s[i], mu = mu_s[i];
                S xh = (px.value[i] - mu) / sd;
                for (int q = first; q <= j; ++q) {
                  size_t iq = static_cast<size_t>(q) * features + k;
                  S delta = (q == j ? S(1) : S(0));
                  px.grad[iq] += dxh * ((delta - inv_n) / sd -
                                        xh * (px.value[iq] - mu) * inv_n / (sd * sd));
                }
              }
            }
          }
          if (affine) {
            auto& pg = *nd.parents[1];
            auto& pb = *nd.parents[2];
            for (int j = 0; j < positions; ++j)
              for (int k = 0; k < features; ++k) {
                size_t i = static_cast<size_t>(j) * features + k;
                S xh = (px.value[i] - mu_s[i]) / sd_s[i];
                if (pg.requires_grad) pg.grad[k] += nd.grad[i] * xh;
                if (pb.requires_grad) pb.grad[k] += nd.grad[i];
              }
          }
        });
  }
  return {std::move(out), std::move(stats)};
}

// Affine normalization with fixed per-feature statistics (the train-stats
// evaluation mode).
template <class S>
std::pair<Tensor<S>, NormStats<S>> normalize_with_fixed_stats(const Tensor<S>& x, int features,
                                                              const TrainStats<S>& ts,
                                                              const NormSpec<S>& spec) {
  check(static_cast<int>(ts.mean.size()) == features,
        "train_stats cover " + std::to_string(ts.mean.size()) + " features, batch has " +
            std::to_string(features));
  bool affine = spec.gamma.defined();
  size_t n = static_cast<size_t>(x.size());
  std::vector<S> sd(features);
  for (int k = 0; k < features; ++k) sd[k] = std::sqrt(ts.var[k] + spec.eps);
  Tensor<S> out(x.shape());
  NormStats<S> stats{Tensor<S>(x.shape(), S(0)), Tensor<S>(x.shape(), S(1))};
  auto& ov = out.values();
  auto& mv = stats.mean.values();
  auto& sv = stats.stdev.values();
  const auto& xv = x.values();
  const S* gammav = affine ? spec.gamma.values().data() : nullptr;
  const S* betav = affine ? spec.beta.values().data() : nullptr;
  for (size_t i = 0; i < n; ++i) {
    int k = static_cast<int>(i % features);
    S xh = (xv[i] - ts.mean[k]) / sd[k];
    mv[i] = ts.mean[k];
    sv[i] = sd[k];
    ov[i] = affine ? gammav[k] * xh + betav[k] : xh;
  }
  if (ops_need_grad(x, spec)) {
    std::vector<Tensor<S>> parents = {x};
    if (affine) {
      parents.push_back(spec.gamma);
      parents.push_back(spec.beta);
    }
    std::vector<S> mean_c = ts.mean;
    tcn::detail::attach<S>(
        out, std::move(parents),
        [features, affine, sd = std::move(sd), mean_c = std::move(mean_c)](TensorNode<S>& nd) {
          auto& px = *nd.parents[0];
          const S* gammav = affine ? nd.parents[1]->value.data() : nullptr;
          for (size_t i = 0; i < nd.value.size(); ++i) {
            int k = static_cast<int>(i % features);
            S gamma_k = affine ? gammav[k] : S(1);
            if (px.requires_grad) px.grad[i] += nd.grad[i] * gamma_k / sd[k];
            if (affine) {
              S xh = (px.value[i] - mean_c[k]) / sd[k];
              if (nd.parents[1]->requires_grad) nd.parents[1]->grad[k] += nd.grad[i] * xh;
              if (nd.parents[2]->requires_grad) nd.parents[2]->grad[k] += nd.grad[i];
            }
          }
        });
  }
  return {std::move(out), std::move(stats)};
}

// Resolved per-sequence segmentation: offsets of each segment start plus a
// lookup from time position to segment index.
inline std::vector<std::vector<int>> resolve_segments(
    const std::vector<std::vector<int>>& segments, int n, int t) {
  std::vector<std::vector<int>> seg(static_cast<size_t>(n));
  if (segments.empty()) {
    for (auto& s : seg) s = {t};
    return seg;
  }
  check(static_cast<int>(segments.size()) == n,
        "segmentation covers " + std::to_string(segments.size()) + " sequences, batch has " +
            std::to_string(n));
  for (int i = 0; i < n; ++i) {
    int total = 0;
    check(!segments[static_cast<size_t>(i)].empty(),
          "segmentation: sequence " + std::to_string(i) + " has no segments");
    for (int len : segments[static_cast<size_t>(i)]) {
      check(len >= 1, "segmentation: empty context segment in sequence " + std::to_string(i));
      total += len;
    }
    check(total == t, "segmentation of sequence " + std::to_string(i) + " covers " +
                          std::to_string(total) + " of " + std::to_string(t) + " positions");
    seg[static_cast<size_t>(i)] = segments[static_cast<size_t>(i)];
  }
  return seg;
}

}  // namespace detail

// Eq.-style temporal context normalization: per (sequence, context segment,
// feature), subtract the segment mean and divide by sqrt(population variance
// + eps), then apply the learned gain/shift. Returns the per-element stats
// for later inversion.
template <class S>
std::pair<ContextBatch<S>, NormStats<S>> tcn_forward(const ContextBatch<S>& batch,
                                                     const NormSpec<S>& spec) {
  check(batch.values.ndim() == 3,
        "tcn_forward: expected (N,T,H) batch, got " + shape_str(batch.values.shape()));
  check(spec.eps > S(0), "tcn_forward: eps must be positive");
  int n = batch.n(), t = batch.t(), h = batch.h();
  detail::check_affine(spec, h);
  auto seg = detail::resolve_segments(batch.segments, n, t);
  auto layout = std::make_shared<detail::GroupLayout>();
  layout->group_of.resize(static_cast<size_t>(batch.values.size()));
  bool affine = spec.gamma.defined();
  if (affine) layout->feature_of.resize(layout->group_of.size());
  int group_base = 0;
  for (int i = 0; i < n; ++i) {
    int pos = 0;
    for (size_t s = 0; s < seg[static_cast<size_t>(i)].size(); ++s) {
      for (int j = 0; j < seg[static_cast<size_t>(i)][s]; ++j, ++pos) {
        for (int k = 0; k < h; ++k) {
          size_t e = (static_cast<size_t>(i) * t + pos) * h + static_cast<size_t>(k);
          layout->group_of[e] = group_base + static_cast<int>(s) * h + k;
          if (affine) layout->feature_of[e] = k;
        }
      }
    }
    group_base += static_cast<int>(seg[static_cast<size_t>(i)].size()) * h;
  }
  layout->num_groups = group_base;
  auto [out, stats] = detail::normalize_groups(batch.values, std::move(layout), spec);
  return {ContextBatch<S>{std::move(out), batch.segments}, std::move(stats)};
}

// De-normalization: sigma * z + mu with the stats captured by the matching
// forward call. The learned gain/shift is not inverted. Stats are constants
// on the tape, so gradients flow through z only.
template <class S>
Tensor<S> tcn_inverse(const Tensor<S>& normalized, const NormStats<S>& stats) {
  check(normalized.shape() == stats.mean.shape() && normalized.shape() == stats.stdev.shape(),
        "tcn_inverse: stats shape " + shape_str(stats.mean.shape()) +
            " does not match values " + shape_str(normalized.shape()));
  Tensor<S> out(normalized.shape());
  const auto& zv = normalized.values();
  const auto& mv = stats.mean.values();
  const auto& sv = stats.stdev.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = sv[i] * zv[i] + mv[i];
  if (tcn::detail::any_requires_grad<S>({&normalized})) {
    std::vector<S> sd = sv;
    tcn::detail::attach<S>(out, {normalized}, [sd = std::move(sd)](TensorNode<S>& nd) {
      auto& pz = *nd.parents[0];
      if (!pz.requires_grad) return;
      for (size_t i = 0; i < nd.grad.size(); ++i) pz.grad[i] += nd.grad[i] * sd[i];
    });
  }
  return out;
}

template <class S>
ContextBatch<S> tcn_inverse(const ContextBatch<S>& normalized, const NormStats<S>& stats) {
  return ContextBatch<S>{tcn_inverse(normalized.values, stats), normalized.segments};
}

// Dispatch over the ablation family. See each case for the grouping it uses.
template <class S>
std::pair<ContextBatch<S>, NormStats<S>> normalize(const ContextBatch<S>& batch,
                                                   const NormSpec<S>& spec,
                                                   const NormEnv& env = {}) {
  check(batch.values.ndim() == 3,
        "normalize: expected (N,T,H) batch, got " + shape_str(batch.values.shape()));
  int n = batch.n(), t = batch.t(), h = batch.h();
  int positions = n * t;
  detail::check_affine(spec, h);
  check(spec.eps > S(0), "normalize: eps must be positive");

  auto feature_groups = [&](auto&& group_fn) {
    // group_fn(position) -> group index or -1; groups are then refined per
    // feature.
    auto layout = std::make_shared<detail::GroupLayout>();
    layout->group_of.resize(static_cast<size_t>(batch.values.size()));
    bool affine = spec.gamma.defined();
    if (affine) layout->feature_of.resize(layout->group_of.size());
    int max_group = -1;
    for (int p = 0; p < positions; ++p) {
      int g = group_fn(p);
      max_group = std::max(max_group, g);
      for (int k = 0; k < h; ++k) {
        size_t e = static_cast<size_t>(p) * h + static_cast<size_t>(k);
        layout->group_of[e] = g < 0 ? -1 : g * h + k;
        if (affine) layout->feature_of[e] = k;
      }
    }
    layout->num_groups = (max_group + 1) * h;
    return layout;
  };

  switch (spec.method) {
    case NormMethod::tcn:
      return tcn_forward(batch, spec);

    case NormMethod::batch:
    case NormMethod::tcn_plus_batch: {
      // Statistics pooled per feature over every (sequence, time) slot.
      auto layout = feature_groups([](int) { return 0; });
      auto [out, stats] = detail::normalize_groups(batch.values, std::move(layout), spec);
      return {ContextBatch<S>{std::move(out), batch.segments}, std::move(stats)};
    }

    case NormMethod::batch_train_stats: {
      if (env.training || !spec.train_stats) {
        check(env.training, "batch_train_stats: evaluation requires fitted train_stats");
        auto layout = feature_groups([](int) { return 0; });
        auto [out, stats] = detail::normalize_groups(batch.values, std::move(layout), spec);
        return {ContextBatch<S>{std::move(out), batch.segments}, std::move(stats)};
      }
      auto [out, stats] =
          detail::normalize_with_fixed_stats(batch.values, h, *spec.train_stats, spec);
      return {ContextBatch<S>{std::move(out), batch.segments}, std::move(stats)};
    }

    case NormMethod::layer: {
      // Statistics over the feature dimension, one group per activation
      // vector.
      auto layout = std::make_shared<detail::GroupLayout>();
      layout->group_of.resize(static_cast<size_t>(batch.values.size()));
      bool affine = spec.gamma.defined();
      if (affine) layout->feature_of.resize(layout->group_of.size());
      for (int p = 0; p < positions; ++p)
        for (int k = 0; k < h; ++k) {
          size_t e = static_cast<size_t>(p) * h + static_cast<size_t>(k);
          layout->group_of[e] = p;
          if (affine) layout->feature_of[e] = k;
        }
      layout->num_groups = positions;
      auto [out, stats] = detail::normalize_groups(batch.values, std::move(layout), spec);
      return {ContextBatch<S>{std::move(out), batch.segments}, std::move(stats)};
    }

    case NormMethod::sub_batch: {
      check(spec.sub_batch_size >= 1, "sub_batch: size must be >= 1");
      check(n % spec.sub_batch_size == 0,
            "sub_batch: batch of " + std::to_string(n) + " sequences not divisible by sub-batch size " +
                std::to_string(spec.sub_batch_size));
      int size = spec.sub_batch_size;
      auto layout = feature_groups([t, size](int p) { return (p / t) / size; });
      auto [out, stats] = detail::normalize_groups(batch.values, std::move(layout), spec);
      return {ContextBatch<S>{std::move(out), batch.segments}, std::move(stats)};
    }

    case NormMethod::misaligned_tcn: {
      check(spec.segment_len >= 1, "misaligned_tcn: segment_len must be >= 1");
      // Fixed-length segments cut from the concatenated stream; a trailing
      // remainder shorter than segment_len is dropped from normalization and
      // passes through with stats (0, 1).
      int full = positions / spec.segment_len;
      int seg_len = spec.segment_len;
      auto layout = feature_groups(
          [seg_len, full](int p) { return p / seg_len < full ? p / seg_len : -1; });
      auto [out, stats] = detail::normalize_groups(batch.values, std::move(layout), spec);
      return {ContextBatch<S>{std::move(out), batch.segments}, std::move(stats)};
    }

    case NormMethod::sliding_window_tcn: {
      check(spec.window >= 1, "sliding_window_tcn: window must be >= 1");
      check(spec.window <= t, "sliding_window_tcn: window " + std::to_string(spec.window) +
                                  " exceeds sequence length " + std::to_string(t));
      auto [out, stats] =
          detail::sliding_window_normalize(batch.values, positions, h, spec.window, spec);
      return {ContextBatch<S>{std::move(out), batch.segments}, std::move(stats)};
    }

    case NormMethod::batch_plus_dropout: {
      auto layout = feature_groups([](int) { return 0; });
      auto [out, stats] = detail::normalize_groups(batch.values, std::move(layout), spec);
      if (env.training) {
        check(env.rng != nullptr, "batch_plus_dropout: training requires an RNG");
        out = dropout(out, spec.dropout_rate, *env.rng, true);
      }
      return {ContextBatch<S>{std::move(out), batch.segments}, std::move(stats)};
    }

    case NormMethod::none: {
      NormStats<S> stats{Tensor<S>(batch.values.shape(), S(0)),
                         Tensor<S>(batch.values.shape(), S(1))};
      return {batch, std::move(stats)};
    }
  }
  fail("normalize: unreachable");
}

// Per-feature mean and population variance over a stream of embeddings,
// stored into the spec for the train-stats evaluation mode. Optional weights
// make frequency-weighted fitting cheap for deduplicated streams.
template <class S>
void fit_train_stats(const Tensor<S>& stream, NormSpec<S>& spec,
                     const std::vector<double>& weights = {}) {
  check(stream.ndim() == 2, "fit_train_stats: expected (M,H) stream, got " +
                                shape_str(stream.shape()));
  int m = stream.dim(0), h = stream.dim(1);
  check(m >= 1, "fit_train_stats: empty embedding stream");
  if (!weights.empty())
    check(static_cast<int>(weights.size()) == m,
          "fit_train_stats: weight count does not match stream rows");
  const auto& sv = stream.values();
  TrainStats<S> ts;
  ts.mean.assign(static_cast<size_t>(h), S(0));
  ts.var.assign(static_cast<size_t>(h), S(0));
  std::vector<double> mean(static_cast<size_t>(h), 0.0), var(static_cast<size_t>(h), 0.0);
  double total = 0;
  for (int r = 0; r < m; ++r) {
    double w = weights.empty() ? 1.0 : weights[static_cast<size_t>(r)];
    total += w;
    for (int k = 0; k < h; ++k)
      mean[static_cast<size_t>(k)] += w * static_cast<double>(sv[static_cast<size_t>(r) * h + k]);
  }
  check(total > 0, "fit_train_stats: total weight is zero");
  for (int k = 0; k < h; ++k) mean[static_cast<size_t>(k)] /= total;
  for (int r = 0; r < m; ++r) {
    double w = weights.empty() ? 1.0 : weights[static_cast<size_t>(r)];
    for (int k = 0; k < h; ++k) {
      double d = static_cast<double>(sv[static_cast<size_t>(r) * h + k]) - mean[static_cast<size_t>(k)];
      var[static_cast<size_t>(k)] += w * d * d;
    }
  }
  for (int k = 0; k < h; ++k) {
    ts.mean[static_cast<size_t>(k)] = static_cast<S>(mean[static_cast<size_t>(k)]);
    ts.var[static_cast<size_t>(k)] = static_cast<S>(var[static_cast<size_t>(k)] / total);
  }
  spec.train_stats = std::move(ts);
}

}  // namespace tcn
