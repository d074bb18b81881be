#pragma once

#include <cstdint>
#include <vector>

#include "tcn/common.hpp"

namespace tcn {

// Raw numeric kernels behind the autograd ops. All loops keep the
// accumulation order of every output element fixed (k runs serially per
// output; vectorization is across independent outputs), so results are
// bit-reproducible.

// C (MxN) += A (MxK) * B (KxN), all row-major. Four A-rows share each B-row
// load; inner j vectorizes.
template <class S>
void gemm_acc(int m, int n, int k, const S* a, const S* b, S* c) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const S* a0 = a + static_cast<size_t>(i) * k;
    const S* a1 = a0 + k;
    const S* a2 = a1 + k;
    const S* a3 = a2 + k;
    S* c0 = c + static_cast<size_t>(i) * n;
    S* c1 = c0 + n;
    S* c2 = c1 + n;
    S* c3 = c2 + n;
    for (int kk = 0; kk < k; ++kk) {
      S v0 = a0[kk], v1 = a1[kk], v2 = a2[kk], v3 = a3[kk];
      const S* br = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) {
        S bv = br[j];
        c0[j] += v0 * bv;
        c1[j] += v1 * bv;
        c2[j] += v2 * bv;
        c3[j] += v3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    const S* ar = a + static_cast<size_t>(i) * k;
    S* cr = c + static_cast<size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      S av = ar[kk];
      const S* br = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

template <class S>
void transpose(int rows, int cols, const S* src, S* dst) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) dst[static_cast<size_t>(c) * rows + r] = src[static_cast<size_t>(r) * cols + c];
}

struct ConvGeom {
  int channels, in_h, in_w;
  int kernel, stride, pad;
  int out_h, out_w;
};

inline ConvGeom conv_geometry(int channels, int in_h, int in_w, int kernel, int stride, int pad,
                              const char* who) {
  check(stride >= 1, std::string(who) + ": stride must be >= 1");
  check(pad >= 0, std::string(who) + ": pad must be >= 0");
  int eff_h = in_h + 2 * pad - kernel;
  int eff_w = in_w + 2 * pad - kernel;
  check(eff_h >= 0 && eff_w >= 0,
        std::string(who) + ": kernel " + std::to_string(kernel) + " exceeds padded input " +
            std::to_string(in_h + 2 * pad) + "x" + std::to_string(in_w + 2 * pad));
  return ConvGeom{channels, in_h, in_w, kernel, stride, pad,
                  eff_h / stride + 1, eff_w / stride + 1};
}

// Patch matrix layout: rows (c, kh, kw), columns (oh, ow). Out-of-bounds
// samples read as zero.
template <class S>
void im2col(const ConvGeom& g, const S* img, S* cols) {
  int ohw = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    for (int kh = 0; kh < g.kernel; ++kh) {
      for (int kw = 0; kw < g.kernel; ++kw) {
        S* row = cols + static_cast<size_t>((c * g.kernel + kh) * g.kernel + kw) * ohw;
        for (int oh = 0; oh < g.out_h; ++oh) {
          int ih = oh * g.stride - g.pad + kh;
          S* out = row + static_cast<size_t>(oh) * g.out_w;
          if (ih < 0 || ih >= g.in_h) {
            for (int ow = 0; ow < g.out_w; ++ow) out[ow] = S(0);
            continue;
          }
          const S* in_row = img + (static_cast<size_t>(c) * g.in_h + ih) * g.in_w;
          for (int ow = 0; ow < g.out_w; ++ow) {
            int iw = ow * g.stride - g.pad + kw;
            out[ow] = (iw >= 0 && iw < g.in_w) ? in_row[iw] : S(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch values back onto the image grid.
template <class S>
void col2im_acc(const ConvGeom& g, const S* cols, S* img) {
  int ohw = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    for (int kh = 0; kh < g.kernel; ++kh) {
      for (int kw = 0; kw < g.kernel; ++kw) {
        const S* row = cols + static_cast<size_t>((c * g.kernel + kh) * g.kernel + kw) * ohw;
        for (int oh = 0; oh < g.out_h; ++oh) {
          int ih = oh * g.stride - g.pad + kh;
          if (ih < 0 || ih >= g.in_h) continue;
          S* in_row = img + (static_cast<size_t>(c) * g.in_h + ih) * g.in_w;
          const S* src = row + static_cast<size_t>(oh) * g.out_w;
          for (int ow = 0; ow < g.out_w; ++ow) {
            int iw = ow * g.stride - g.pad + kw;
            if (iw >= 0 && iw < g.in_w) in_row[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace tcn
