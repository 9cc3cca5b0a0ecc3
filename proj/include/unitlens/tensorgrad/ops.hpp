// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "unitlens/errors.hpp"
#include "unitlens/tensorgrad/blas.hpp"
#include "unitlens/tensorgrad/tape.hpp"
#include "unitlens/tensorgrad/tensor.hpp"

namespace unitlens::tensorgrad {

namespace detail {

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

/// Unfolds one C x H x W image (zero padding 1) into the 3x3 patch matrix:
/// row (c, ky, kx), column y * w + x. Rows are `ld` apart.
inline void im2col3x3(const double* in, std::size_t channels, std::size_t h, std::size_t w,
                      double* cols, std::size_t ld) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = in + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = cols + ((c * 3 + ky) * 3 + kx) * ld;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          double* dst = row + y * w;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(sy) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            dst[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[sx];
          }
        }
      }
    }
  }
}

/// Adjoint of im2col3x3: accumulates the patch matrix back into the image.
inline void col2im3x3_add(const double* cols, std::size_t channels, std::size_t h, std::size_t w,
                          double* out, std::size_t ld) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = out + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = cols + ((c * 3 + ky) * 3 + kx) * ld;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = plane + static_cast<std::size_t>(sy) * w;
          const double* src = row + y * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) dst[sx] += src[x];
          }
        }
      }
    }
  }
}

// Upper bound on the patch matrix size, in doubles, when batching samples into one gemm.
inline constexpr std::size_t kPatchBudget = std::size_t{1} << 16;

inline std::size_t conv_chunk(std::size_t batch, std::size_t taps, std::size_t hw) {
  return std::clamp<std::size_t>(kPatchBudget / (taps * hw), 1, batch);
}

}  // namespace detail

/// a[m x k] * b[k x n].
inline Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()));
  }
  const int m = static_cast<int>(av.dim(0));
  const int k = static_cast<int>(av.dim(1));
  const int n = static_cast<int>(bv.dim(1));
  Tensor out({av.dim(0), bv.dim(1)});
  blas::gemm(false, false, m, n, k, 1.0, av.data(), k, bv.data(), n, 0.0, out.data(), n);
  Tape* tape = a.tape;
  return tape->record(std::move(out), {a, b}, [tape, a, b, m, n, k](const Tensor& g, GradSink& s) {
    const Tensor& av = tape->value(a.id);
    const Tensor& bv = tape->value(b.id);
    if (s.wants(a.id)) {
      blas::gemm(false, true, m, k, n, 1.0, g.data(), n, bv.data(), n, 1.0, s.slot(a.id).data(), k);
    }
    if (s.wants(b.id)) {
      blas::gemm(true, false, k, n, m, 1.0, av.data(), k, g.data(), n, 1.0, s.slot(b.id).data(), n);
    }
  });
}

/// 3x3 cross-correlation, stride 1, zero padding 1, plus per-kernel bias.
/// input [N x C x H x W], kernels [K x C x 3 x 3], bias [K] -> [N x K x H x W].
inline Var conv2d(Var input, Var kernels, Var bias) {
  const Tensor& x = input.value();
  const Tensor& w = kernels.value();
  const Tensor& b = bias.value();
  detail::require_rank(x, 4, "conv2d input");
  detail::require_rank(w, 4, "conv2d kernels");
  detail::require_rank(b, 1, "conv2d bias");
  if (w.dim(2) != 3 || w.dim(3) != 3) {
    throw DimensionError("conv2d: kernels must be 3x3, got " + shape_str(w.shape()));
  }
  if (w.dim(1) != x.dim(1)) {
    throw DimensionError("conv2d: channel mismatch, input " + shape_str(x.shape()) +
                         " vs kernels " + shape_str(w.shape()));
  }
  if (b.dim(0) != w.dim(0)) {
    throw DimensionError("conv2d: bias " + shape_str(b.shape()) + " vs kernels " +
                         shape_str(w.shape()));
  }
  const std::size_t batch = x.dim(0), channels = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t kcount = w.dim(0);
  const std::size_t hw = h * wd, taps = channels * 9;
  const std::size_t chunk = detail::conv_chunk(batch, taps, hw);

  // Samples are processed `chunk` at a time: the patch matrix holds their
  // columns side by side, so one gemm covers the whole chunk.
  Tensor out({batch, kcount, h, wd});
  std::vector<double> cols(taps * chunk * hw), prod(kcount * chunk * hw);
  for (std::size_t n0 = 0; n0 < batch; n0 += chunk) {
    const std::size_t nb = std::min(chunk, batch - n0), ld = nb * hw;
    for (std::size_t i = 0; i < nb; ++i) {
      detail::im2col3x3(x.data() + (n0 + i) * channels * hw, channels, h, wd, cols.data() + i * hw, ld);
    }
    blas::gemm(false, false, static_cast<int>(kcount), static_cast<int>(ld), static_cast<int>(taps), 1.0,
               w.data(), static_cast<int>(taps), cols.data(), static_cast<int>(ld), 0.0, prod.data(),
               static_cast<int>(ld));
    for (std::size_t i = 0; i < nb; ++i) {
      double* o = out.data() + (n0 + i) * kcount * hw;
      for (std::size_t k = 0; k < kcount; ++k) {
        const double* src = prod.data() + k * ld + i * hw;
        for (std::size_t p = 0; p < hw; ++p) o[k * hw + p] = src[p] + b[k];
      }
    }
  }

  Tape* tape = input.tape;
  return tape->record(
      std::move(out), {input, kernels, bias},
      [tape, input, kernels, bias, batch, channels, h, wd, kcount, chunk](const Tensor& g, GradSink& s) {
        const Tensor& x = tape->value(input.id);
        const Tensor& w = tape->value(kernels.id);
        const std::size_t hw = h * wd, taps = channels * 9;
        const bool want_x = s.wants(input.id), want_w = s.wants(kernels.id),
                   want_b = s.wants(bias.id);
        if (want_b) {
          Tensor& gb = s.slot(bias.id);
          for (std::size_t n = 0; n < batch; ++n) {
            const double* gn = g.data() + n * kcount * hw;
            for (std::size_t k = 0; k < kcount; ++k) {
              double acc = 0.0;
              for (std::size_t p = 0; p < hw; ++p) acc += gn[k * hw + p];
              gb[k] += acc;
            }
          }
        }
        if (!want_w && !want_x) return;
        std::vector<double> cols(taps * chunk * hw), gk(kcount * chunk * hw);
        for (std::size_t n0 = 0; n0 < batch; n0 += chunk) {
          const std::size_t nb = std::min(chunk, batch - n0), ld = nb * hw;
          // upstream gradient regrouped as [K x (sample, position)]
          for (std::size_t i = 0; i < nb; ++i) {
            const double* gn = g.data() + (n0 + i) * kcount * hw;
            for (std::size_t k = 0; k < kcount; ++k) {
              std::copy_n(gn + k * hw, hw, gk.data() + k * ld + i * hw);
            }
          }
          if (want_w) {
            for (std::size_t i = 0; i < nb; ++i) {
              detail::im2col3x3(x.data() + (n0 + i) * channels * hw, channels, h, wd, cols.data() + i * hw, ld);
            }
            blas::gemm(false, true, static_cast<int>(kcount), static_cast<int>(taps), static_cast<int>(ld), 1.0,
                       gk.data(), static_cast<int>(ld), cols.data(), static_cast<int>(ld), 1.0,
                       s.slot(kernels.id).data(), static_cast<int>(taps));
          }
          if (want_x) {
            blas::gemm(true, false, static_cast<int>(taps), static_cast<int>(ld), static_cast<int>(kcount), 1.0,
                       w.data(), static_cast<int>(taps), gk.data(), static_cast<int>(ld), 0.0, cols.data(),
                       static_cast<int>(ld));
            Tensor& gx = s.slot(input.id);
            for (std::size_t i = 0; i < nb; ++i) {
              detail::col2im3x3_add(cols.data() + i * hw, channels, h, wd, gx.data() + (n0 + i) * channels * hw,
                                    ld);
            }
          }
        }
      });
}

/// max(x, 0); the derivative at exactly 0 is taken as 0.
inline Var relu(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  Tape* tape = x.tape;
  return tape->record(std::move(out), {x}, [tape, x](const Tensor& g, GradSink& s) {
    const Tensor& xv = tape->value(x.id);
    Tensor& gx = s.slot(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

/// Elementwise sum of equal shapes, or a [M x N] + [N] row broadcast (dense bias).
inline Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool row_broadcast = av.rank() == 2 && bv.rank() == 1 && av.dim(1) == bv.dim(0);
  if (!row_broadcast) detail::require_same_shape(av, bv, "add");
  Tensor out = av;
  const std::size_t period = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % period];
  Tape* tape = a.tape;
  return tape->record(std::move(out), {a, b}, [a, b, period](const Tensor& g, GradSink& s) {
    if (s.wants(a.id)) {
      Tensor& ga = s.slot(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (s.wants(b.id)) {
      Tensor& gb = s.slot(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % period] += g[i];
    }
  });
}

/// Elementwise product of equal shapes.
inline Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tape* tape = a.tape;
  return tape->record(std::move(out), {a, b}, [tape, a, b](const Tensor& g, GradSink& s) {
    const Tensor& av = tape->value(a.id);
    const Tensor& bv = tape->value(b.id);
    if (s.wants(a.id)) {
      Tensor& ga = s.slot(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (s.wants(b.id)) {
      Tensor& gb = s.slot(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

inline Var scale(Var x, double factor) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factor;
  return x.tape->record(std::move(out), {x}, [x, factor](const Tensor& g, GradSink& s) {
    Tensor& gx = s.slot(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
}

/// Sum of every element, as a scalar.
inline Var sum(Var x) {
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (double v : xv.values()) acc += v;
  return x.tape->record(Tensor::scalar(acc), {x}, [x](const Tensor& g, GradSink& s) {
    Tensor& gx = s.slot(x.id);
    const double gv = g[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gv;
  });
}

/// Scalar sum(weights .* x) against a constant weight tensor of x's size.
inline Var weighted_sum(Var x, Tensor weights) {
  const Tensor& xv = x.value();
  if (weights.size() != xv.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                         shape_str(xv.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += weights[i] * xv[i];
  return x.tape->record(Tensor::scalar(acc), {x},
                        [x, weights = std::move(weights)](const Tensor& g, GradSink& s) {
                          Tensor& gx = s.slot(x.id);
                          const double gv = g[0];
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gv * weights[i];
                        });
}

/// Mean over one axis; that axis is removed from the shape.
inline Var mean_over_axis(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank()) {
    throw DimensionError("mean_over_axis: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(xv.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  const std::size_t len = xv.dim(axis);
  Shape shape = xv.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < len; ++j) acc += xv[(o * len + j) * inner + i];
      out[o * inner + i] = acc / static_cast<double>(len);
    }
  }
  return x.tape->record(std::move(out), {x}, [x, outer, inner, len](const Tensor& g, GradSink& s) {
    Tensor& gx = s.slot(x.id);
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < len; ++j) {
        for (std::size_t i = 0; i < inner; ++i) gx[(o * len + j) * inner + i] += g[o * inner + i] * inv;
      }
    }
  });
}

/// [N x K x H x W] -> [N x K], the mean of each feature map.
inline Var spatial_mean(Var x) {
  const Tensor& xv = x.value();
  detail::require_rank(xv, 4, "spatial_mean");
  const std::size_t maps = xv.dim(0) * xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out({xv.dim(0), xv.dim(1)});
  for (std::size_t m = 0; m < maps; ++m) {
    double acc = 0.0;
    for (std::size_t p = 0; p < hw; ++p) acc += xv[m * hw + p];
    out[m] = acc / static_cast<double>(hw);
  }
  return x.tape->record(std::move(out), {x}, [x, maps, hw](const Tensor& g, GradSink& s) {
    Tensor& gx = s.slot(x.id);
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t m = 0; m < maps; ++m) {
      const double gm = g[m] * inv;
      for (std::size_t p = 0; p < hw; ++p) gx[m * hw + p] += gm;
    }
  });
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Ties go to the first maximum in row-major window order.
inline Var maxpool2x2(Var x) {
  const Tensor& xv = x.value();
  detail::require_rank(xv, 4, "maxpool2x2");
  const std::size_t h = xv.dim(2), w = xv.dim(3);
  if (h < 2 || w < 2) throw DimensionError("maxpool2x2: map too small " + shape_str(xv.shape()));
  const std::size_t oh = h / 2, ow = w / 2, maps = xv.dim(0) * xv.dim(1);
  Tensor out({xv.dim(0), xv.dim(1), oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t m = 0; m < maps; ++m) {
    const double* plane = xv.data() + m * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo) {
        std::size_t best = (2 * y) * w + 2 * xo;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (2 * y + dy) * w + 2 * xo + dx;
            if (plane[idx] > plane[best]) best = idx;
          }
        }
        const std::size_t o = (m * oh + y) * ow + xo;
        out[o] = plane[best];
        argmax[o] = m * h * w + best;
      }
    }
  }
  return x.tape->record(std::move(out), {x},
                        [x, argmax = std::move(argmax)](const Tensor& g, GradSink& s) {
                          Tensor& gx = s.slot(x.id);
                          for (std::size_t o = 0; o < g.size(); ++o) gx[argmax[o]] += g[o];
                        });
}

/// [N x ...] -> [N x rest].
inline Var flatten(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() < 1) throw DimensionError("flatten: scalar input");
  const std::size_t n = xv.dim(0);
  Tensor out = xv.reshaped({n, xv.size() / n});
  return x.tape->record(std::move(out), {x}, [x](const Tensor& g, GradSink& s) {
    Tensor& gx = s.slot(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

/// Zeroes channel c of x (axis 1) wherever keep[c] == 0. Accepts [N x K] and [N x K x H x W].
inline Var mask_channels(Var x, std::vector<char> keep) {
  const Tensor& xv = x.value();
  if ((xv.rank() != 2 && xv.rank() != 4) || xv.dim(1) != keep.size()) {
    throw DimensionError("mask_channels: " + std::to_string(keep.size()) + " flags for " +
                         shape_str(xv.shape()));
  }
  const std::size_t k = keep.size(), inner = xv.size() / (xv.dim(0) * k);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!keep[(i / inner) % k]) out[i] = 0.0;
  }
  return x.tape->record(std::move(out), {x},
                        [x, k, inner, keep = std::move(keep)](const Tensor& g, GradSink& s) {
                          Tensor& gx = s.slot(x.id);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            if (keep[(i / inner) % k]) gx[i] += g[i];
                          }
                        });
}

/// Mean over the batch of -log softmax(logits)[label].
inline Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& lv = logits.value();
  detail::require_rank(lv, 2, "softmax_cross_entropy");
  const std::size_t n = lv.dim(0), classes = lv.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + shape_str(lv.shape()));
  }
  Tensor probs(lv.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw RangeError("softmax_cross_entropy: label " + std::to_string(label) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    const double* row = lv.data() + r * classes;
    const double peak = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[r * classes + c] = std::exp(row[c] - peak);
      z += probs[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= z;
    total += std::log(z) + peak - row[label];
  }
  std::vector<int> owned(labels.begin(), labels.end());
  return logits.tape->record(
      Tensor::scalar(total / static_cast<double>(n)), {logits},
      [logits, n, classes, probs = std::move(probs), owned = std::move(owned)](const Tensor& g,
                                                                              GradSink& s) {
        Tensor& gl = s.slot(logits.id);
        const double scale_by = g[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = static_cast<std::size_t>(owned[r]) == c ? 1.0 : 0.0;
            gl[r * classes + c] += (probs[r * classes + c] - onehot) * scale_by;
          }
        }
      });
}

/// Index of the largest entry in each row (first on ties).
inline std::vector<int> argmax_rows(const Tensor& t) {
  detail::require_rank(t, 2, "argmax_rows");
  std::vector<int> out(t.dim(0));
  const std::size_t cols = t.dim(1);
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    const double* row = t.data() + r * cols;
    out[r] = static_cast<int>(std::max_element(row, row + cols) - row);
  }
  return out;
}

}  // namespace unitlens::tensorgrad
