#include "tcn/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace tcn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint files store raw little-endian float32");

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : meta)
    if (k == key) {
      v = value;
      return;
    }
  meta.push_back({key, value});
}

const std::string* Checkpoint::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return &v;
  return nullptr;
}

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void Checkpoint::load_into(const std::string& name, Tensor<float>& dst) const {
  const Tensor<float>* src = find(name);
  check(src != nullptr, "checkpoint: missing tensor '" + name + "'");
  check(src->shape() == dst.shape(), "checkpoint: tensor '" + name + "' has shape " +
                                         shape_str(src->shape()) + ", expected " +
                                         shape_str(dst.shape()));
  dst.values() = src->values();
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "checkpoint: cannot open '" + path + "' for writing");
  out << "TCNCKPT1\n";
  out << "config_hash " << hex64(config_hash) << "\n";
  out << "step " << step << "\n";
  out << "meta " << meta.size() << "\n";
  for (const auto& [k, v] : meta) out << k << "=" << v << "\n";
  out << "tensors " << tensors.size() << "\n";
  for (const auto& [name, t] : tensors) {
    out << name << " " << t.ndim();
    for (int d : t.shape()) out << " " << d;
    out << "\n";
  }
  out << "DATA\n";
  for (const auto& [name, t] : tensors)
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.values().size() * sizeof(float)));
  check(out.good(), "checkpoint: write to '" + path + "' failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "checkpoint: cannot open '" + path + "'");
  Checkpoint ckpt;
  std::string line;
  auto next_line = [&]() {
    check(static_cast<bool>(std::getline(in, line)), "checkpoint: '" + path + "' is truncated");
    return line;
  };
  check(next_line() == "TCNCKPT1", "checkpoint: '" + path + "' has a bad magic line");
  {
    std::istringstream is(next_line());
    std::string key, hex;
    is >> key >> hex;
    check(key == "config_hash" && hex.size() == 16, "checkpoint: bad config_hash line");
    ckpt.config_hash = std::stoull(hex, nullptr, 16);
  }
  {
    std::istringstream is(next_line());
    std::string key;
    is >> key >> ckpt.step;
    check(key == "step" && !is.fail(), "checkpoint: bad step line");
  }
  size_t meta_count = 0;
  {
    std::istringstream is(next_line());
    std::string key;
    is >> key >> meta_count;
    check(key == "meta" && !is.fail(), "checkpoint: bad meta count line");
  }
  for (size_t i = 0; i < meta_count; ++i) {
    next_line();
    auto eq = line.find('=');
    check(eq != std::string::npos, "checkpoint: bad meta line '" + line + "'");
    ckpt.meta.push_back({line.substr(0, eq), line.substr(eq + 1)});
  }
  size_t tensor_count = 0;
  {
    std::istringstream is(next_line());
    std::string key;
    is >> key >> tensor_count;
    check(key == "tensors" && !is.fail(), "checkpoint: bad tensor count line");
  }
  std::vector<std::pair<std::string, Shape>> headers;
  for (size_t i = 0; i < tensor_count; ++i) {
    std::istringstream is(next_line());
    std::string name;
    int ndim = 0;
    is >> name >> ndim;
    check(!is.fail() && ndim >= 0, "checkpoint: bad tensor header '" + line + "'");
    Shape shape(static_cast<size_t>(ndim));
    for (int d = 0; d < ndim; ++d) {
      is >> shape[static_cast<size_t>(d)];
      check(!is.fail(), "checkpoint: bad tensor header '" + line + "'");
    }
    headers.push_back({name, shape});
  }
  check(next_line() == "DATA", "checkpoint: missing DATA marker");
  for (auto& [name, shape] : headers) {
    Tensor<float> t(shape);
    in.read(reinterpret_cast<char*>(t.values().data()),
            static_cast<std::streamsize>(t.values().size() * sizeof(float)));
    check(in.gcount() == static_cast<std::streamsize>(t.values().size() * sizeof(float)),
          "checkpoint: '" + path + "' data section truncated at tensor '" + name + "'");
    ckpt.tensors.push_back({name, std::move(t)});
  }
  return ckpt;
}

}  // namespace tcn
