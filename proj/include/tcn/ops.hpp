#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "tcn/kernels.hpp"
#include "tcn/rng.hpp"
#include "tcn/tensor.hpp"

namespace tcn {

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* who) {
  check(a.shape() == b.shape(), std::string(who) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  check_same_shape(a, b, "add");
  Tensor<S> out(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (detail::any_requires_grad<S>({&a, &b})) {
    detail::attach<S>(out, {a, b}, [](TensorNode<S>& n) {
      for (int p = 0; p < 2; ++p) {
        auto& parent = *n.parents[p];
        if (!parent.requires_grad) continue;
        for (size_t i = 0; i < n.grad.size(); ++i) parent.grad[i] += n.grad[i];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  check_same_shape(a, b, "sub");
  Tensor<S> out(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (detail::any_requires_grad<S>({&a, &b})) {
    detail::attach<S>(out, {a, b}, [](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      auto& pb = *n.parents[1];
      if (pa.requires_grad)
        for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
      if (pb.requires_grad)
        for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  check_same_shape(a, b, "mul");
  Tensor<S> out(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (detail::any_requires_grad<S>({&a, &b})) {
    detail::attach<S>(out, {a, b}, [](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      auto& pb = *n.parents[1];
      if (pa.requires_grad)
        for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.value[i];
      if (pb.requires_grad)
        for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.value[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
  Tensor<S> out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * factor;
  if (detail::any_requires_grad<S>({&a})) {
    detail::attach<S>(out, {a}, [factor](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * factor;
    });
  }
  return out;
}

template <class S>
Tensor<S> relu(const Tensor<S>& a) {
  Tensor<S> out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] > S(0) ? av[i] : S(0);
  if (detail::any_requires_grad<S>({&a})) {
    detail::attach<S>(out, {a}, [](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      for (size_t i = 0; i < n.grad.size(); ++i)
        pa.grad[i] += pa.value[i] > S(0) ? n.grad[i] : S(0);
    });
  }
  return out;
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  Tensor<S> out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = S(1) / (S(1) + std::exp(-av[i]));
  if (detail::any_requires_grad<S>({&a})) {
    detail::attach<S>(out, {a}, [](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      for (size_t i = 0; i < n.grad.size(); ++i) {
        S y = n.value[i];
        pa.grad[i] += n.grad[i] * y * (S(1) - y);
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> tanh_op(const Tensor<S>& a) {
  Tensor<S> out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(av[i]);
  if (detail::any_requires_grad<S>({&a})) {
    detail::attach<S>(out, {a}, [](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      for (size_t i = 0; i < n.grad.size(); ++i) {
        S y = n.value[i];
        pa.grad[i] += n.grad[i] * (S(1) - y * y);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  check(numel(shape) == a.size(), "reshape: cannot view " + shape_str(a.shape()) + " as " +
                                      shape_str(shape) + " (element count differs)");
  Tensor<S> out(std::move(shape), a.values());
  if (detail::any_requires_grad<S>({&a})) {
    detail::attach<S>(out, {a}, [](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> flatten_rows(const Tensor<S>& a) {
  check(a.ndim() >= 2, "flatten_rows: need at least 2 dims, got " + shape_str(a.shape()));
  int rows = a.dim(0);
  return reshape(a, {rows, static_cast<int>(a.size() / rows)});
}

// Row gather from a (R, C) matrix; the workhorse for building candidate
// contexts and time slices. Backward scatter-adds serially in index order.
template <class S>
Tensor<S> gather_rows(const Tensor<S>& a, std::vector<int> idx) {
  check(a.ndim() == 2, "gather_rows: expected 2-d input, got " + shape_str(a.shape()));
  int rows = a.dim(0), cols = a.dim(1);
  for (int i : idx)
    check(i >= 0 && i < rows,
          "gather_rows: index " + std::to_string(i) + " out of range [0, " + std::to_string(rows) + ")");
  Tensor<S> out({static_cast<int>(idx.size()), cols});
  const auto& av = a.values();
  auto& ov = out.values();
  for (size_t r = 0; r < idx.size(); ++r)
    std::copy_n(av.begin() + static_cast<size_t>(idx[r]) * cols, cols, ov.begin() + r * cols);
  if (detail::any_requires_grad<S>({&a})) {
    detail::attach<S>(out, {a}, [idx = std::move(idx), cols](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      for (size_t r = 0; r < idx.size(); ++r) {
        S* dst = pa.grad.data() + static_cast<size_t>(idx[r]) * cols;
        const S* src = n.grad.data() + r * cols;
        for (int j = 0; j < cols; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

// Concatenation along axis 0; trailing dims must agree.
template <class S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  check(!parts.empty(), "concat_rows: no tensors given");
  Shape tail = parts[0].shape();
  int rows = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    check(s.size() == tail.size() && std::equal(s.begin() + 1, s.end(), tail.begin() + 1),
          "concat_rows: shape " + shape_str(s) + " incompatible with " + shape_str(tail));
    rows += s[0];
  }
  Shape out_shape = tail;
  out_shape[0] = rows;
  Tensor<S> out(out_shape);
  auto& ov = out.values();
  size_t offset = 0;
  bool needs_grad = false;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), ov.begin() + static_cast<long>(offset));
    offset += p.values().size();
    if (grad_mode() && p.requires_grad()) needs_grad = true;
  }
  if (needs_grad) {
    detail::attach<S>(out, parts, [](TensorNode<S>& n) {
      size_t offset = 0;
      for (auto& parent : n.parents) {
        if (parent->requires_grad)
          for (size_t i = 0; i < parent->value.size(); ++i)
            parent->grad[i] += n.grad[offset + i];
        offset += parent->value.size();
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> slice_cols(const Tensor<S>& a, int first, int count) {
  check(a.ndim() == 2, "slice_cols: expected 2-d input, got " + shape_str(a.shape()));
  int rows = a.dim(0), cols = a.dim(1);
  check(first >= 0 && count > 0 && first + count <= cols,
        "slice_cols: range [" + std::to_string(first) + ", " + std::to_string(first + count) +
            ") out of " + std::to_string(cols) + " columns");
  Tensor<S> out({rows, count});
  const auto& av = a.values();
  auto& ov = out.values();
  for (int r = 0; r < rows; ++r)
    std::copy_n(av.begin() + static_cast<size_t>(r) * cols + first, count,
                ov.begin() + static_cast<size_t>(r) * count);
  if (detail::any_requires_grad<S>({&a})) {
    detail::attach<S>(out, {a}, [first, count, cols](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      int rows = n.shape[0];
      for (int r = 0; r < rows; ++r) {
        S* dst = pa.grad.data() + static_cast<size_t>(r) * cols + first;
        const S* src = n.grad.data() + static_cast<size_t>(r) * count;
        for (int j = 0; j < count; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear layer
// ---------------------------------------------------------------------------

// y (B,O) = x (B,I) . w (I,O) [+ b]. Weights are stored input-major so the
// forward GEMM streams unit-stride.
template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b = {}) {
  check(x.ndim() == 2 && w.ndim() == 2, "linear: need 2-d x and w, got " + shape_str(x.shape()) +
                                            " and " + shape_str(w.shape()));
  int batch = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  check(w.dim(0) == in, "linear: x " + shape_str(x.shape()) + " incompatible with w " +
                            shape_str(w.shape()));
  if (b.defined())
    check(b.size() == out_dim, "linear: bias " + shape_str(b.shape()) + " does not match " +
                                   std::to_string(out_dim) + " outputs");
  Tensor<S> out({batch, out_dim});
  auto& ov = out.values();
  gemm_acc(batch, out_dim, in, x.values().data(), w.values().data(), ov.data());
  if (b.defined()) {
    const auto& bv = b.values();
    for (int r = 0; r < batch; ++r) {
      S* row = ov.data() + static_cast<size_t>(r) * out_dim;
      for (int j = 0; j < out_dim; ++j) row[j] += bv[j];
    }
  }
  bool has_bias = b.defined();
  if (detail::any_requires_grad<S>({&x, &w, &b})) {
    std::vector<Tensor<S>> parents = {x, w};
    if (has_bias) parents.push_back(b);
    detail::attach<S>(out, std::move(parents), [batch, in, out_dim, has_bias](TensorNode<S>& n) {
      auto& px = *n.parents[0];
      auto& pw = *n.parents[1];
      if (px.requires_grad) {
        std::vector<S> wt(static_cast<size_t>(in) * out_dim);
        transpose(in, out_dim, pw.value.data(), wt.data());
        gemm_acc(batch, in, out_dim, n.grad.data(), wt.data(), px.grad.data());
      }
      if (pw.requires_grad) {
        std::vector<S> xt(static_cast<size_t>(batch) * in);
        transpose(batch, in, px.value.data(), xt.data());
        gemm_acc(in, out_dim, batch, xt.data(), n.grad.data(), pw.grad.data());
      }
      if (has_bias && n.parents[2]->requires_grad) {
        auto& pb = *n.parents[2];
        for (int r = 0; r < batch; ++r) {
          const S* row = n.grad.data() + static_cast<size_t>(r) * out_dim;
          for (int j = 0; j < out_dim; ++j) pb.grad[j] += row[j];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

// x (N,C,H,W), w (O,C,K,K), optional b (O). Output spatial size
// floor((H + 2p - K)/stride) + 1.
template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int stride,
                 int pad) {
  check(x.ndim() == 4 && w.ndim() == 4, "conv2d: need 4-d input and weight, got " +
                                            shape_str(x.shape()) + " and " + shape_str(w.shape()));
  check(w.dim(1) == x.dim(1), "conv2d: input " + shape_str(x.shape()) + " and weight " +
                                  shape_str(w.shape()) + " disagree on channels");
  check(w.dim(2) == w.dim(3), "conv2d: only square kernels supported, got " + shape_str(w.shape()));
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  int oc = w.dim(0), k = w.dim(2);
  if (b.defined())
    check(b.size() == oc, "conv2d: bias " + shape_str(b.shape()) + " does not match " +
                              std::to_string(oc) + " output channels");
  ConvGeom g = conv_geometry(c, h, wd, k, stride, pad, "conv2d");
  int ohw = g.out_h * g.out_w;
  int ckk = c * k * k;
  Tensor<S> out({n, oc, g.out_h, g.out_w});
  auto& ov = out.values();
  std::vector<S> cols(static_cast<size_t>(ckk) * ohw);
  for (int img = 0; img < n; ++img) {
    im2col(g, x.values().data() + static_cast<size_t>(img) * c * h * wd, cols.data());
    gemm_acc(oc, ohw, ckk, w.values().data(), cols.data(),
             ov.data() + static_cast<size_t>(img) * oc * ohw);
  }
  if (b.defined()) {
    const auto& bv = b.values();
    for (int img = 0; img < n; ++img)
      for (int o = 0; o < oc; ++o) {
        S* plane = ov.data() + (static_cast<size_t>(img) * oc + o) * ohw;
        for (int i = 0; i < ohw; ++i) plane[i] += bv[o];
      }
  }
  bool has_bias = b.defined();
  if (detail::any_requires_grad<S>({&x, &w, &b})) {
    std::vector<Tensor<S>> parents = {x, w};
    if (has_bias) parents.push_back(b);
    detail::attach<S>(out, std::move(parents), [g, n, oc, ckk, ohw, has_bias](TensorNode<S>& nd) {
      auto& px = *nd.parents[0];
      auto& pw = *nd.parents[1];
      size_t img_elems = static_cast<size_t>(g.channels) * g.in_h * g.in_w;
      std::vector<S> cols(static_cast<size_t>(ckk) * ohw);
      if (px.requires_grad) {
        std::vector<S> wt(static_cast<size_t>(ckk) * oc);
        transpose(oc, ckk, pw.value.data(), wt.data());
        for (int img = 0; img < n; ++img) {
          std::fill(cols.begin(), cols.end(), S(0));
          gemm_acc(ckk, ohw, oc, wt.data(), nd.grad.data() + static_cast<size_t>(img) * oc * ohw,
                   cols.data());
          col2im_acc(g, cols.data(), px.grad.data() + static_cast<size_t>(img) * img_elems);
        }
      }
      if (pw.requires_grad) {
        // dW^T = cols . dY^T keeps the big patch matrix untransposed; only
        // the small (O x OHOW) slice flips per image.
        std::vector<S> dyt(static_cast<size_t>(ohw) * oc);
        std::vector<S> dwt(static_cast<size_t>(ckk) * oc, S(0));
        for (int img = 0; img < n; ++img) {
          im2col(g, px.value.data() + static_cast<size_t>(img) * img_elems, cols.data());
          transpose(oc, ohw, nd.grad.data() + static_cast<size_t>(img) * oc * ohw, dyt.data());
          gemm_acc(ckk, oc, ohw, cols.data(), dyt.data(), dwt.data());
        }
        for (int o = 0; o < oc; ++o)
          for (int k = 0; k < ckk; ++k)
            pw.grad[static_cast<size_t>(o) * ckk + k] += dwt[static_cast<size_t>(k) * oc + o];
      }
      if (has_bias && nd.parents[2]->requires_grad) {
        auto& pb = *nd.parents[2];
        for (int img = 0; img < n; ++img)
          for (int o = 0; o < oc; ++o) {
            const S* plane = nd.grad.data() + (static_cast<size_t>(img) * oc + o) * ohw;
            S s = 0;
            for (int i = 0; i < ohw; ++i) s += plane[i];
            pb.grad[o] += s;
          }
      }
    });
  }
  return out;
}

// Transposed convolution: the exact adjoint of conv2d with the same (O,I,K,K)
// weight. Maps (N,O,H,W) -> (N,I,(H-1)*stride+K-2p,...); with stride 2 this is
// the usual 2x upsampling layer.
template <class S>
Tensor<S> conv_transpose2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int stride,
                           int pad) {
  check(x.ndim() == 4 && w.ndim() == 4, "conv_transpose2d: need 4-d input and weight, got " +
                                            shape_str(x.shape()) + " and " + shape_str(w.shape()));
  check(w.dim(0) == x.dim(1), "conv_transpose2d: input " + shape_str(x.shape()) + " and weight " +
                                  shape_str(w.shape()) + " disagree on channels");
  check(w.dim(2) == w.dim(3),
        "conv_transpose2d: only square kernels supported, got " + shape_str(w.shape()));
  int n = x.dim(0), oc = x.dim(1), h = x.dim(2), wd = x.dim(3);
  int ic = w.dim(1), k = w.dim(2);
  int out_h = (h - 1) * stride + k - 2 * pad;
  int out_w = (wd - 1) * stride + k - 2 * pad;
  check(out_h > 0 && out_w > 0, "conv_transpose2d: degenerate output size for input " +
                                    shape_str(x.shape()));
  if (b.defined())
    check(b.size() == ic, "conv_transpose2d: bias " + shape_str(b.shape()) + " does not match " +
                              std::to_string(ic) + " output channels");
  ConvGeom g = conv_geometry(ic, out_h, out_w, k, stride, pad, "conv_transpose2d");
  check(g.out_h == h && g.out_w == wd,
        "conv_transpose2d: input spatial dims " + shape_str({h, wd}) +
            " not reachable by the adjoint geometry " + shape_str({g.out_h, g.out_w}));
  int ohw = h * wd;
  int ikk = ic * k * k;
  Tensor<S> out({n, ic, out_h, out_w});
  auto& ov = out.values();
  std::vector<S> wt(static_cast<size_t>(ikk) * oc);
  transpose(oc, ikk, w.values().data(), wt.data());
  std::vector<S> cols(static_cast<size_t>(ikk) * ohw);
  size_t out_elems = static_cast<size_t>(ic) * out_h * out_w;
  for (int img = 0; img < n; ++img) {
    std::fill(cols.begin(), cols.end(), S(0));
    gemm_acc(ikk, ohw, oc, wt.data(), x.values().data() + static_cast<size_t>(img) * oc * ohw,
             cols.data());
    col2im_acc(g, cols.data(), ov.data() + static_cast<size_t>(img) * out_elems);
  }
  if (b.defined()) {
    const auto& bv = b.values();
    for (int img = 0; img < n; ++img)
      for (int c = 0; c < ic; ++c) {
        S* plane = ov.data() + (static_cast<size_t>(img) * ic + c) * out_h * out_w;
        for (int i = 0; i < out_h * out_w; ++i) plane[i] += bv[c];
      }
  }
  bool has_bias = b.defined();
  if (detail::any_requires_grad<S>({&x, &w, &b})) {
    std::vector<Tensor<S>> parents = {x, w};
    if (has_bias) parents.push_back(b);
    detail::attach<S>(out, std::move(parents),
                      [g, n, oc, ikk, ohw, out_elems, has_bias](TensorNode<S>& nd) {
                        auto& px = *nd.parents[0];
                        auto& pw = *nd.parents[1];
                        int out_hw = g.in_h * g.in_w;
                        std::vector<S> dycols(static_cast<size_t>(ikk) * ohw);
                        std::vector<S> xt;
                        std::vector<S> dwt;
                        if (pw.requires_grad) {
                          xt.resize(static_cast<size_t>(ohw) * oc);
                          dwt.assign(static_cast<size_t>(ikk) * oc, S(0));
                        }
                        for (int img = 0; img < n; ++img) {
                          const S* dy = nd.grad.data() + static_cast<size_t>(img) * out_elems;
                          im2col(g, dy, dycols.data());
                          if (px.requires_grad)
                            gemm_acc(oc, ohw, ikk, pw.value.data(), dycols.data(),
                                     px.grad.data() + static_cast<size_t>(img) * oc * ohw);
                          if (pw.requires_grad) {
                            transpose(oc, ohw,
                                      px.value.data() + static_cast<size_t>(img) * oc * ohw,
                                      xt.data());
                            gemm_acc(ikk, oc, ohw, dycols.data(), xt.data(), dwt.data());
                          }
                        }
                        if (pw.requires_grad)
                          for (int o = 0; o < oc; ++o)
                            for (int k = 0; k < ikk; ++k)
                              pw.grad[static_cast<size_t>(o) * ikk + k] +=
                                  dwt[static_cast<size_t>(k) * oc + o];
                        if (has_bias && nd.parents[2]->requires_grad) {
                          auto& pb = *nd.parents[2];
                          int ic = g.channels;
                          for (int img = 0; img < n; ++img)
                            for (int c = 0; c < ic; ++c) {
                              const S* plane = nd.grad.data() +
                                               (static_cast<size_t>(img) * ic + c) * out_hw;
                              S s = 0;
                              for (int i = 0; i < out_hw; ++i) s += plane[i];
                              pb.grad[c] += s;
                            }
                        }
                      });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses and reductions
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> mean_all(const Tensor<S>& a) {
  Tensor<S> out({1});
  const auto& av = a.values();
  S s = 0;
  for (S v : av) s += v;
  S inv = S(1) / static_cast<S>(av.size());
  out.values()[0] = s * inv;
  if (detail::any_requires_grad<S>({&a})) {
    detail::attach<S>(out, {a}, [inv](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      S g = n.grad[0] * inv;
      for (size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
    });
  }
  return out;
}

template <class S>
Tensor<S> mse_loss(const Tensor<S>& pred, const Tensor<S>& target) {
  check_same_shape(pred, target, "mse_loss");
  Tensor<S> out({1});
  const auto& pv = pred.values();
  const auto& tv = target.values();
  S s = 0;
  for (size_t i = 0; i < pv.size(); ++i) {
    S d = pv[i] - tv[i];
    s += d * d;
  }
  S inv = S(1) / static_cast<S>(pv.size());
  out.values()[0] = s * inv;
  if (detail::any_requires_grad<S>({&pred, &target})) {
    detail::attach<S>(out, {pred, target}, [inv](TensorNode<S>& n) {
      auto& pp = *n.parents[0];
      auto& pt = *n.parents[1];
      S g = n.grad[0] * S(2) * inv;
      for (size_t i = 0; i < pp.value.size(); ++i) {
        S d = g * (pp.value[i] - pt.value[i]);
        if (pp.requires_grad) pp.grad[i] += d;
        if (pt.requires_grad) pt.grad[i] -= d;
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> softmax(const Tensor<S>& logits) {
  check(logits.ndim() == 2, "softmax: expected 2-d logits, got " + shape_str(logits.shape()));
  int rows = logits.dim(0), cols = logits.dim(1);
  Tensor<S> out(logits.shape());
  const auto& lv = logits.values();
  auto& ov = out.values();
  for (int r = 0; r < rows; ++r) {
    const S* in = lv.data() + static_cast<size_t>(r) * cols;
    S* o = ov.data() + static_cast<size_t>(r) * cols;
    S m = in[0];
    for (int j = 1; j < cols; ++j) m = std::max(m, in[j]);
    S z = 0;
    for (int j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - m);
      z += o[j];
    }
    S inv = S(1) / z;
    for (int j = 0; j < cols; ++j) o[j] *= inv;
  }
  if (detail::any_requires_grad<S>({&logits})) {
    detail::attach<S>(out, {logits}, [rows, cols](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      for (int r = 0; r < rows; ++r) {
        const S* p = n.value.data() + static_cast<size_t>(r) * cols;
        const S* dy = n.grad.data() + static_cast<size_t>(r) * cols;
        S* dx = pa.grad.data() + static_cast<size_t>(r) * cols;
        S dot = 0;
        for (int j = 0; j < cols; ++j) dot += dy[j] * p[j];
        for (int j = 0; j < cols; ++j) dx[j] += p[j] * (dy[j] - dot);
      }
    });
  }
  return out;
}

// Mean over rows of -log softmax(logits)[target], max-subtracted for
// stability.
template <class S>
Tensor<S> softmax_cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets) {
  check(logits.ndim() == 2,
        "softmax_cross_entropy: expected 2-d logits, got " + shape_str(logits.shape()));
  int rows = logits.dim(0), cols = logits.dim(1);
  check(static_cast<int>(targets.size()) == rows,
        "softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
            std::to_string(rows) + " rows");
  for (int t : targets)
    check(t >= 0 && t < cols, "softmax_cross_entropy: target index " + std::to_string(t) +
                                  " out of range [0, " + std::to_string(cols) + ")");
  Tensor<S> out({1});
  const auto& lv = logits.values();
  std::vector<S> probs(lv.size());
  S total = 0;
  for (int r = 0; r < rows; ++r) {
    const S* in = lv.data() + static_cast<size_t>(r) * cols;
    S* p = probs.data() + static_cast<size_t>(r) * cols;
    S m = in[0];
    for (int j = 1; j < cols; ++j) m = std::max(m, in[j]);
    S z = 0;
    for (int j = 0; j < cols; ++j) {
      p[j] = std::exp(in[j] - m);
      z += p[j];
    }
    S inv = S(1) / z;
    for (int j = 0; j < cols; ++j) p[j] *= inv;
    total += std::log(z) + m - in[targets[static_cast<size_t>(r)]];
  }
  out.values()[0] = total / static_cast<S>(rows);
  if (detail::any_requires_grad<S>({&logits})) {
    detail::attach<S>(out, {logits},
                      [probs = std::move(probs), targets, rows, cols](TensorNode<S>& n) {
                        auto& pa = *n.parents[0];
                        if (!pa.requires_grad) return;
                        S g = n.grad[0] / static_cast<S>(rows);
                        for (int r = 0; r < rows; ++r) {
                          const S* p = probs.data() + static_cast<size_t>(r) * cols;
                          S* dx = pa.grad.data() + static_cast<size_t>(r) * cols;
                          for (int j = 0; j < cols; ++j) dx[j] += g * p[j];
                          dx[targets[static_cast<size_t>(r)]] -= g;
                        }
                      });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

// Inverted dropout; identity when not training. The mask is drawn from the
// caller's stream so runs stay reproducible.
template <class S>
Tensor<S> dropout(const Tensor<S>& a, double rate, Rng& rng, bool training) {
  check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return a;
  Tensor<S> out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  std::vector<S> mask(av.size());
  S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  for (size_t i = 0; i < av.size(); ++i) {
    mask[i] = rng.uniform01() >= rate ? keep_scale : S(0);
    ov[i] = av[i] * mask[i];
  }
  if (detail::any_requires_grad<S>({&a})) {
    detail::attach<S>(out, {a}, [mask = std::move(mask)](TensorNode<S>& n) {
      auto& pa = *n.parents[0];
      if (!pa.requires_grad) return;
      for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * mask[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// LSTM cell
// ---------------------------------------------------------------------------

template <class S>
struct LstmState {
  Tensor<S> h, c;
};

// Standard cell (gate order i, f, g, o), composed from primitive ops so the
// tape provides the backward pass. State is zero-initialized at each sequence
// start by the callers.
template <class S>
LstmState<S> lstm_step(const Tensor<S>& x, const LstmState<S>& state, const Tensor<S>& w_x,
                       const Tensor<S>& w_h, const Tensor<S>& b) {
  check(w_x.ndim() == 2 && w_h.ndim() == 2, "lstm_step: weights must be 2-d");
  int hidden = w_h.dim(0);
  check(w_x.dim(1) == 4 * hidden && w_h.dim(1) == 4 * hidden,
        "lstm_step: gate width mismatch, w_x " + shape_str(w_x.shape()) + " w_h " +
            shape_str(w_h.shape()));
  check(x.dim(1) == w_x.dim(0), "lstm_step: input " + shape_str(x.shape()) +
                                    " incompatible with w_x " + shape_str(w_x.shape()));
  Tensor<S> gates = add(linear(x, w_x, b), linear(state.h, w_h));
  Tensor<S> gate_i = sigmoid(slice_cols(gates, 0, hidden));
  Tensor<S> gate_f = sigmoid(slice_cols(gates, hidden, hidden));
  Tensor<S> gate_g = tanh_op(slice_cols(gates, 2 * hidden, hidden));
  Tensor<S> gate_o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  Tensor<S> c_next = add(mul(gate_f, state.c), mul(gate_i, gate_g));
  Tensor<S> h_next = mul(gate_o, tanh_op(c_next));
  return {h_next, c_next};
}

}  // namespace tcn
