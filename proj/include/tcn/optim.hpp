#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tcn/rng.hpp"
#include "tcn/tensor.hpp"

namespace tcn {

enum class InitScheme { xavier_uniform, uniform_inv_sqrt_n, zeros, ones };

inline InitScheme parse_init_scheme(const std::string& s) {
  if (s == "xavier_uniform") return InitScheme::xavier_uniform;
  if (s == "uniform_inv_sqrt_n") return InitScheme::uniform_inv_sqrt_n;
  if (s == "zeros") return InitScheme::zeros;
  if (s == "ones") return InitScheme::ones;
  fail("unknown init scheme '" + s + "'");
}

// fan_in/fan_out: matrices are (in, out); conv kernels (O,I,K,K) use the
// receptive field convention I*K*K / O*K*K.
inline std::pair<int64_t, int64_t> fan_in_out(const Shape& shape) {
  if (shape.size() == 2) return {shape[0], shape[1]};
  if (shape.size() == 4) {
    int64_t rf = static_cast<int64_t>(shape[2]) * shape[3];
    return {shape[1] * rf, shape[0] * rf};
  }
  int64_t n = numel(shape);
  return {n, n};
}

template <class S>
Tensor<S> init_uniform_bound(const Shape& shape, double bound, Rng& rng) {
  Tensor<S> t(shape);
  for (auto& v : t.values()) v = static_cast<S>(rng.uniform(-bound, bound));
  return t;
}

// `fan_override` replaces the n used by uniform_inv_sqrt_n (e.g. recurrent
// weights that scale by hidden size).
template <class S>
Tensor<S> init_params(const Shape& shape, InitScheme scheme, Rng& rng, int64_t fan_override = 0) {
  switch (scheme) {
    case InitScheme::zeros:
      return Tensor<S>(shape, S(0));
    case InitScheme::ones:
      return Tensor<S>(shape, S(1));
    case InitScheme::xavier_uniform: {
      auto [fan_in, fan_out] = fan_in_out(shape);
      double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      return init_uniform_bound<S>(shape, bound, rng);
    }
    case InitScheme::uniform_inv_sqrt_n: {
      int64_t n = fan_override > 0 ? fan_override : fan_in_out(shape).first;
      double bound = 1.0 / std::sqrt(static_cast<double>(n));
      return init_uniform_bound<S>(shape, bound, rng);
    }
  }
  fail("init_params: unreachable");
}

// Bias-corrected ADAM over a fixed parameter list. Moment buffers are kept in
// the order parameters are registered; step_count advances once per update.
template <class S>
struct OptimState {
  S learning_rate;
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps_opt = S(1e-8);
  int64_t step_count = 0;
  std::vector<std::vector<S>> first_moment;
  std::vector<std::vector<S>> second_moment;

  explicit OptimState(S lr = S(1e-3)) : learning_rate(lr) {}

  void ensure_buffers(const std::vector<Tensor<S>>& params) {
    if (!first_moment.empty()) return;
    for (const auto& p : params) {
      first_moment.emplace_back(p.size(), S(0));
      second_moment.emplace_back(p.size(), S(0));
    }
  }
};

template <class S>
void adam_update(std::vector<Tensor<S>>& params, OptimState<S>& state) {
  state.ensure_buffers(params);
  check(state.first_moment.size() == params.size(),
        "adam_update: optimizer state tracks " + std::to_string(state.first_moment.size()) +
            " tensors but got " + std::to_string(params.size()));
  state.step_count += 1;
  S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(state.beta1),
                                         static_cast<double>(state.step_count)));
  S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(state.beta2),
                                         static_cast<double>(state.step_count)));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi].values();
    const auto& g = params[pi].grad();
    check(g.size() == p.size(), "adam_update: parameter " + std::to_string(pi) +
                                    " has no gradient of matching size");
    auto& m = state.first_moment[pi];
    auto& v = state.second_moment[pi];
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (S(1) - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (S(1) - state.beta2) * g[i] * g[i];
      S m_hat = m[i] / bc1;
      S v_hat = v[i] / bc2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.eps_opt);
    }
  }
}

}  // namespace tcn
