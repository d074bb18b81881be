#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tcn/tensor.hpp"

namespace tcn {

// Flat checkpoint container: a text header carrying the config hash, step
// count and key=value metadata (optimizer step, RNG stream states), followed
// by named tensors as raw little-endian float32 in declaration order.
struct Checkpoint {
  uint64_t config_hash = 0;
  int64_t step = 0;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  void add(const std::string& name, const Tensor<float>& t) { tensors.push_back({name, t}); }
  void set_meta(const std::string& key, const std::string& value);
  const std::string* find_meta(const std::string& key) const;
  const Tensor<float>* find(const std::string& name) const;
  // Copies stored values into an existing tensor, enforcing shape equality.
  void load_into(const std::string& name, Tensor<float>& dst) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace tcn
