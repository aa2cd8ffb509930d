#include "cir/ad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace cir::ad {

namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_same(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
}

void require_rank(const char* op, const Var& x, std::size_t rank) {
  if (x.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(x.shape()));
  }
}

// Elementwise unary op. `df(x, y)` is the local derivative given input x and
// output y.
template <class F, class DF>
Var unary(const Var& x, const char* op, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  Tensor y_saved = NoGradGuard::active() || !x.requires_grad() ? Tensor() : out;
  return Var::record(std::move(out), op, {x},
                     [xv_node = x.node(), y = std::move(y_saved), df](const Tensor& g, std::span<Tensor> pg) {
                       const Tensor& xin = xv_node->value;
                       for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] += g[i] * df(xin[i], y[i]);
                     });
}

float stable_sigmoid(float v) {
  if (v >= 0.0f) {
    const float e = std::exp(-v);
    return 1.0f / (1.0f + e);
  }
  const float e = std::exp(v);
  return e / (1.0f + e);
}

// Batched patch extraction. `cols` is (C*k*k) x (N*Ho*Wo), row-major, with
// column index n*Ho*Wo + oy*Wo + ox.
struct ConvGeometry {
  std::size_t n, c, h, w, k, stride, pad, out_h, out_w;
  std::size_t positions() const { return out_h * out_w; }
  std::size_t rows() const { return c * k * k; }
  std::size_t cols() const { return n * positions(); }
};

void im2col(const float* img, const ConvGeometry& g, float* cols) {
  const std::size_t np = g.cols();
  const std::size_t p = g.positions();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        float* dst = cols + ((ch * g.k + ky) * g.k + kx) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          const float* src = img + (n * g.c + ch) * g.h * g.w;
          float* d = dst + n * p;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            float* drow = d + oy * g.out_w;
            if (iy < 0 || iy >= static_cast<long>(g.h)) {
              std::fill(drow, drow + g.out_w, 0.0f);
              continue;
            }
            const float* srow = src + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              drow[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0f : srow[ix];
            }
          }
        }
      }
    }
  }
}

void col2im(const float* cols, const ConvGeometry& g, float* img) {
  const std::size_t np = g.cols();
  const std::size_t p = g.positions();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const float* src = cols + ((ch * g.k + ky) * g.k + kx) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          float* dst = img + (n * g.c + ch) * g.h * g.w;
          const float* s = src + n * p;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            float* drow = dst + static_cast<std::size_t>(iy) * g.w;
            const float* srow = s + oy * g.out_w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix >= 0 && ix < static_cast<long>(g.w)) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

// (N, C, P) <-> (C, N*P)
void nchw_to_cn(const float* src, std::size_t n, std::size_t c, std::size_t p, float* dst) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(src + (i * c + ch) * p, p, dst + ch * n * p + i * p);
}

void cn_to_nchw(const float* src, std::size_t n, std::size_t c, std::size_t p, float* dst) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(src + ch * n * p + i * p, p, dst + (i * c + ch) * p);
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same("add", a, b);
  Tensor out = a.value();
  out += b.value();
  return Var::record(std::move(out), "add", {a, b}, [](const Tensor& g, std::span<Tensor> pg) {
    if (!pg[0].empty()) pg[0] += g;
    if (!pg[1].empty()) pg[1] += g;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same("sub", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Var::record(std::move(out), "sub", {a, b}, [](const Tensor& g, std::span<Tensor> pg) {
    if (!pg[0].empty()) pg[0] += g;
    if (!pg[1].empty())
      for (std::size_t i = 0; i < g.size(); ++i) pg[1][i] -= g[i];
  });
}

Var mul(const Var& a, const Var& b) {
  require_same("mul", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Var::record(std::move(out), "mul", {a, b},
                     [an = a.node(), bn = b.node()](const Tensor& g, std::span<Tensor> pg) {
                       if (!pg[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] += g[i] * bn->value[i];
                       if (!pg[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) pg[1][i] += g[i] * an->value[i];
                     });
}

Var scale(const Var& a, float factor) {
  Tensor out = a.value();
  for (float& v : out.data()) v *= factor;
  return Var::record(std::move(out), "scale", {a}, [factor](const Tensor& g, std::span<Tensor> pg) {
    for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] += g[i] * factor;
  });
}

Var add_scalar(const Var& a, float offset) {
  Tensor out = a.value();
  for (float& v : out.data()) v += offset;
  return Var::record(std::move(out), "add_scalar", {a}, [](const Tensor& g, std::span<Tensor> pg) { pg[0] += g; });
}

Var relu(const Var& x) {
  return unary(x, "relu", [](float v) { return v > 0.0f ? v : 0.0f; },
               [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Var sigmoid(const Var& x) {
  return unary(x, "sigmoid", stable_sigmoid, [](float, float y) { return y * (1.0f - y); });
}

Var tanh(const Var& x) {
  return unary(x, "tanh", [](float v) { return std::tanh(v); }, [](float, float y) { return 1.0f - y * y; });
}

Var exp(const Var& x) {
  return unary(x, "exp", [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Var log(const Var& x, float eps) {
  return unary(x, "log", [eps](float v) { return std::log(v + eps); },
               [eps](float v, float) { return 1.0f / (v + eps); });
}

Var softplus(const Var& x) {
  return unary(x, "softplus", [](float v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0f); },
               [](float v, float) { return stable_sigmoid(v); });
}

Var square(const Var& x) {
  return unary(x, "square", [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Var clamp(const Var& x, float lo, float hi) {
  return unary(x, "clamp", [lo, hi](float v) { return std::clamp(v, lo, hi); },
               [lo, hi](float v, float) { return (v > lo && v < hi) ? 1.0f : 0.0f; });
}

Var broadcast_to(const Var& x, const Shape& shape) {
  const Shape& in = x.shape();
  if (in.size() > shape.size()) shape_fail("broadcast_to", in, shape);
  const std::size_t rank = shape.size();
  const std::size_t offset = rank - in.size();
  // Input strides aligned to the output axes; zero on broadcast axes.
  std::vector<std::size_t> in_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t a = in.size(); a-- > 0;) {
    const std::size_t oa = a + offset;
    if (in[a] == shape[oa]) {
      in_stride[oa] = stride;
    } else if (in[a] != 1) {
      shape_fail("broadcast_to", in, shape);
    }
    stride *= in[a];
  }
  const std::size_t total = shape_size(shape);
  std::vector<std::size_t> index_map(total);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < total; ++i) {
    index_map[i] = src;
    for (std::size_t a = rank; a-- > 0;) {
      ++idx[a];
      src += in_stride[a];
      if (idx[a] < shape[a]) break;
      src -= in_stride[a] * idx[a];
      idx[a] = 0;
    }
  }
  Tensor out(shape);
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < total; ++i) out[i] = xv[index_map[i]];
  return Var::record(std::move(out), "broadcast_to", {x},
                     [map = std::move(index_map)](const Tensor& g, std::span<Tensor> pg) {
                       for (std::size_t i = 0; i < g.size(); ++i) pg[0][map[i]] += g[i];
                     });
}

Var reshape(const Var& x, const Shape& shape) {
  if (shape_size(shape) != x.value().size()) shape_fail("reshape", x.shape(), shape);
  return Var::record(x.value().reshaped(shape), "reshape", {x}, [](const Tensor& g, std::span<Tensor> pg) {
    for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] += g[i];
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  if (x.value().rank() == 0) throw ShapeError("gather_rows: scalar input");
  const std::size_t n = x.shape()[0];
  const std::size_t row = n ? x.value().size() / n : 0;
  Shape shape = x.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " + shape_str(x.shape()));
    }
    std::copy_n(x.value().ptr() + rows[r] * row, row, out.ptr() + r * row);
  }
  return Var::record(std::move(out), "gather_rows", {x},
                     [idx = std::vector<std::size_t>(rows.begin(), rows.end()), row](const Tensor& g,
                                                                                     std::span<Tensor> pg) {
                       for (std::size_t r = 0; r < idx.size(); ++r)
                         for (std::size_t i = 0; i < row; ++i) pg[0][idx[r] * row + i] += g[r * row + i];
                     });
}

Var concat_cols(const Var& a, const Var& b) {
  require_rank("concat_cols", a, 2);
  require_rank("concat_cols", b, 2);
  if (a.shape()[0] != b.shape()[0]) shape_fail("concat_cols", a.shape(), b.shape());
  const std::size_t n = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
  Tensor out({n, ca + cb});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(a.value().ptr() + r * ca, ca, out.ptr() + r * (ca + cb));
    std::copy_n(b.value().ptr() + r * cb, cb, out.ptr() + r * (ca + cb) + ca);
  }
  return Var::record(std::move(out), "concat_cols", {a, b}, [n, ca, cb](const Tensor& g, std::span<Tensor> pg) {
    for (std::size_t r = 0; r < n; ++r) {
      if (!pg[0].empty())
        for (std::size_t i = 0; i < ca; ++i) pg[0][r * ca + i] += g[r * (ca + cb) + i];
      if (!pg[1].empty())
        for (std::size_t i = 0; i < cb; ++i) pg[1][r * cb + i] += g[r * (ca + cb) + ca + i];
    }
  });
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (float v : x.value().data()) acc += v;
  return Var::record(Tensor::scalar(static_cast<float>(acc)), "sum", {x}, [](const Tensor& g, std::span<Tensor> pg) {
    const float gv = g[0];
    for (float& v : pg[0].data()) v += gv;
  });
}

Var mean(const Var& x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  for (float v : x.value().data()) acc += v;
  return Var::record(Tensor::scalar(static_cast<float>(acc / static_cast<double>(n))), "mean", {x},
                     [n](const Tensor& g, std::span<Tensor> pg) {
                       const float gv = g[0] / static_cast<float>(n);
                       for (float& v : pg[0].data()) v += gv;
                     });
}

Var row_mean(const Var& x) {
  if (x.value().rank() < 1 || x.shape()[0] == 0) throw ShapeError("row_mean: needs (N, ...) input, got " + shape_str(x.shape()));
  const std::size_t n = x.shape()[0];
  const std::size_t row = x.value().size() / n;
  if (row == 0) throw ShapeError("row_mean: empty rows in " + shape_str(x.shape()));
  Tensor out({n});
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    const float* p = x.value().ptr() + r * row;
    for (std::size_t i = 0; i < row; ++i) acc += p[i];
    out[r] = static_cast<float>(acc / static_cast<double>(row));
  }
  return Var::record(std::move(out), "row_mean", {x}, [n, row](const Tensor& g, std::span<Tensor> pg) {
    for (std::size_t r = 0; r < n; ++r) {
      const float gv = g[r] / static_cast<float>(row);
      float* p = pg[0].ptr() + r * row;
      for (std::size_t i = 0; i < row; ++i) p[i] += gv;
    }
  });
}

namespace {

// Max-shifted log(sum exp) or log(mean exp); accumulates in double.
Var log_exp_reduce(const Var& x, bool average, const char* name) {
  const Tensor& xv = x.value();
  const bool column = xv.rank() == 2 && xv.dim(1) == 1;
  if (!(xv.rank() == 1 || column) || xv.size() == 0) {
    throw ShapeError(std::string(name) + ": expected a non-empty (N) or (N,1) batch, got " + shape_str(xv.shape()));
  }
  const float m = *std::max_element(xv.data().begin(), xv.data().end());
  double s = 0.0;
  for (float v : xv.data()) s += std::exp(static_cast<double>(v - m));
  if (average) s /= static_cast<double>(xv.size());
  const float out = m + static_cast<float>(std::log(s));
  const float scale = average ? 1.0f / static_cast<float>(xv.size()) : 1.0f;
  // d/dx_i = exp(x_i - m) / sum_k exp(x_k - m), in either form.
  return Var::record(Tensor::scalar(out), name, {x},
                     [xn = x.node(), m, total = s / scale](const Tensor& g, std::span<Tensor> pg) {
                       const Tensor& v = xn->value;
                       for (std::size_t i = 0; i < v.size(); ++i) {
                         pg[0][i] += static_cast<float>(g[0] * std::exp(static_cast<double>(v[i] - m)) / total);
                       }
                     });
}

}  // namespace

Var logsumexp(const Var& x) { return log_exp_reduce(x, false, "logsumexp"); }

Var logmeanexp(const Var& x) { return log_exp_reduce(x, true, "logmeanexp"); }

Var affine(const Var& x, const Var& weight, const Var& bias) {
  require_rank("affine", x, 2);
  require_rank("affine", weight, 2);
  require_rank("affine", bias, 1);
  const std::size_t n = x.shape()[0], in = x.shape()[1], out_dim = weight.shape()[0];
  if (weight.shape()[1] != in) shape_fail("affine", x.shape(), weight.shape());
  if (bias.shape()[0] != out_dim) shape_fail("affine", weight.shape(), bias.shape());

  Tensor out({n, out_dim});
  CMapR X(x.value().ptr(), n, in);
  CMapR W(weight.value().ptr(), out_dim, in);
  MapR Y(out.ptr(), n, out_dim);
  Y.noalias() = X * W.transpose();
  const float* b = bias.value().ptr();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < out_dim; ++c) Y(r, c) += b[c];

  return Var::record(std::move(out), "affine", {x, weight, bias},
                     [xn = x.node(), wn = weight.node(), n, in, out_dim](const Tensor& g, std::span<Tensor> pg) {
                       CMapR G(g.ptr(), n, out_dim);
                       if (!pg[0].empty()) {
                         MapR DX(pg[0].ptr(), n, in);
                         DX.noalias() += G * CMapR(wn->value.ptr(), out_dim, in);
                       }
                       if (!pg[1].empty()) {
                         MapR DW(pg[1].ptr(), out_dim, in);
                         DW.noalias() += G.transpose() * CMapR(xn->value.ptr(), n, in);
                       }
                       if (!pg[2].empty()) {
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < out_dim; ++c) pg[2][c] += G(r, c);
                       }
                     });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t pad) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  require_rank("conv2d", bias, 1);
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const std::size_t k = ws[2];
  if (ws[1] != xs[1] || ws[3] != k || bias.shape()[0] != ws[0] || stride == 0) shape_fail("conv2d", xs, ws);
  if (xs[2] + 2 * pad < k || xs[3] + 2 * pad < k) shape_fail("conv2d", xs, ws);

  ConvGeometry geo{xs[0], xs[1], xs[2], xs[3], k, stride, pad, conv_out(xs[2], k, stride, pad),
                   conv_out(xs[3], k, stride, pad)};
  const std::size_t o = ws[0];
  FloatBuffer cols(geo.rows() * geo.cols());
  im2col(x.value().ptr(), geo, cols.data());

  FloatBuffer y(o * geo.cols());
  MapR Y(y.data(), o, geo.cols());
  CMapR W(weight.value().ptr(), o, geo.rows());
  Y.noalias() = W * CMapR(cols.data(), geo.rows(), geo.cols());

  Tensor out({geo.n, o, geo.out_h, geo.out_w});
  cn_to_nchw(y.data(), geo.n, o, geo.positions(), out.ptr());
  const float* b = bias.value().ptr();
  for (std::size_t i = 0; i < geo.n; ++i)
    for (std::size_t ch = 0; ch < o; ++ch) {
      float* p = out.ptr() + (i * o + ch) * geo.positions();
      for (std::size_t q = 0; q < geo.positions(); ++q) p[q] += b[ch];
    }

  if (NoGradGuard::active() || !weight.requires_grad()) cols.clear();
  return Var::record(
      std::move(out), "conv2d", {x, weight, bias},
      [wn = weight.node(), geo, o, cols = std::move(cols)](const Tensor& g, std::span<Tensor> pg) {
        FloatBuffer dy(o * geo.cols());
        nchw_to_cn(g.ptr(), geo.n, o, geo.positions(), dy.data());
        CMapR DY(dy.data(), o, geo.cols());
        if (!pg[1].empty()) {
          MapR DW(pg[1].ptr(), o, geo.rows());
          DW.noalias() += DY * CMapR(cols.data(), geo.rows(), geo.cols()).transpose();
        }
        if (!pg[2].empty()) {
          for (std::size_t ch = 0; ch < o; ++ch) pg[2][ch] += DY.row(ch).sum();
        }
        if (!pg[0].empty()) {
          FloatBuffer dcols(geo.rows() * geo.cols());
          MapR DC(dcols.data(), geo.rows(), geo.cols());
          DC.noalias() = CMapR(wn->value.ptr(), o, geo.rows()).transpose() * DY;
          col2im(dcols.data(), geo, pg[0].ptr());
        }
      });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t pad,
                     std::size_t out_h, std::size_t out_w) {
  require_rank("conv_transpose2d", x, 4);
  require_rank("conv_transpose2d", weight, 4);
  require_rank("conv_transpose2d", bias, 1);
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const std::size_t k = ws[2];
  const std::size_t c = xs[1], o = ws[1];
  if (ws[0] != c || ws[3] != k || bias.shape()[0] != o || stride == 0) shape_fail("conv_transpose2d", xs, ws);
  if (out_h + 2 * pad < k || out_w + 2 * pad < k || conv_out(out_h, k, stride, pad) != xs[2] ||
      conv_out(out_w, k, stride, pad) != xs[3]) {
    shape_fail("conv_transpose2d", xs, Shape{out_h, out_w});
  }
  // The output image plays the role of the convolution input.
  ConvGeometry geo{xs[0], o, out_h, out_w, k, stride, pad, xs[2], xs[3]};

  FloatBuffer xcn(c * geo.cols());
  nchw_to_cn(x.value().ptr(), geo.n, c, geo.positions(), xcn.data());
  FloatBuffer cols(geo.rows() * geo.cols());
  MapR C(cols.data(), geo.rows(), geo.cols());
  CMapR W(weight.value().ptr(), c, geo.rows());
  C.noalias() = W.transpose() * CMapR(xcn.data(), c, geo.cols());

  Tensor out({geo.n, o, out_h, out_w});
  col2im(cols.data(), geo, out.ptr());
  const float* b = bias.value().ptr();
  const std::size_t plane = out_h * out_w;
  for (std::size_t i = 0; i < geo.n; ++i)
    for (std::size_t ch = 0; ch < o; ++ch) {
      float* p = out.ptr() + (i * o + ch) * plane;
      for (std::size_t q = 0; q < plane; ++q) p[q] += b[ch];
    }

  if (NoGradGuard::active() || !weight.requires_grad()) xcn.clear();
  return Var::record(
      std::move(out), "conv_transpose2d", {x, weight, bias},
      [wn = weight.node(), geo, c, o, plane, xcn = std::move(xcn)](const Tensor& g, std::span<Tensor> pg) {
        FloatBuffer dcols(geo.rows() * geo.cols());
        im2col(g.ptr(), geo, dcols.data());
        CMapR DC(dcols.data(), geo.rows(), geo.cols());
        if (!pg[0].empty()) {
          FloatBuffer dx(c * geo.cols());
          MapR DX(dx.data(), c, geo.cols());
          DX.noalias() = CMapR(wn->value.ptr(), c, geo.rows()) * DC;
          FloatBuffer tmp(pg[0].size());
          cn_to_nchw(dx.data(), geo.n, c, geo.positions(), tmp.data());
          for (std::size_t i = 0; i < tmp.size(); ++i) pg[0][i] += tmp[i];
        }
        if (!pg[1].empty()) {
          MapR DW(pg[1].ptr(), c, geo.rows());
          DW.noalias() += CMapR(xcn.data(), c, geo.cols()) * DC.transpose();
        }
        if (!pg[2].empty()) {
          for (std::size_t i = 0; i < geo.n; ++i)
            for (std::size_t ch = 0; ch < o; ++ch) {
              const float* p = g.ptr() + (i * o + ch) * plane;
              double acc = 0.0;
              for (std::size_t q = 0; q < plane; ++q) acc += p[q];
              pg[2][ch] += static_cast<float>(acc);
            }
        }
      });
}

Var detach(const Var& x) { return Var(x.value(), false); }

Var constant(Tensor value) { return Var(std::move(value), false); }

}  // namespace cir::ad
