#include "skeltk/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "skeltk/error.hpp"

namespace skeltk::nn {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " differ");
}

void require_ndim(const char* op, const Tensor& x, int nd) {
  if (x.ndim() != nd)
    throw DimensionError(std::string(op) + ": expected " + std::to_string(nd) +
                         "-d tensor, got " + shape_str(x.shape()));
}

void accumulate(Node& parent, const std::vector<double>& delta) {
  for (size_t i = 0; i < delta.size(); ++i) parent.grad[i] += delta[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.values());
  const std::vector<double>& bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  auto an = a.node(), bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) accumulate(*an, self.grad);
    if (bn->requires_grad) accumulate(*bn, self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.values());
  const std::vector<double>& bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  auto an = a.node(), bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) accumulate(*an, self.grad);
    if (bn->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  const std::vector<double>& av = a.values();
  const std::vector<double>& bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto an = a.node(), bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i)
        an->grad[i] += self.grad[i] * bn->values[i];
    if (bn->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i)
        bn->grad[i] += self.grad[i] * an->values[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.values());
  for (double& v : out) v *= s;
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, s](Node& self) {
    if (an->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i)
        an->grad[i] += s * self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  auto xn = x.node();
  return make_op(x.shape(), std::move(out), {x}, [xn](Node& self) {
    if (!xn->requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (xn->values[i] > 0.0) xn->grad[i] += self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_ndim("matmul", a, 2);
  require_ndim("matmul", b, 2);
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw DimensionError("matmul: inner dimensions " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()) + " do not match");
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  const std::vector<double>& av = a.values();
  const std::vector<double>& bv = b.values();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double aip = av[static_cast<size_t>(i) * k + p];
      if (aip == 0.0) continue;
      const size_t arow = static_cast<size_t>(i) * n;
      const size_t brow = static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) out[arow + j] += aip * bv[brow + j];
    }
  auto an = a.node(), bn = b.node();
  return make_op({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Node& self) {
    if (an->requires_grad) {  // dA = g * B^T
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j)
            acc += self.grad[static_cast<size_t>(i) * n + j] *
                   bn->values[static_cast<size_t>(p) * n + j];
          an->grad[static_cast<size_t>(i) * k + p] += acc;
        }
    }
    if (bn->requires_grad) {  // dB = A^T * g
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) {
          const double aip = an->values[static_cast<size_t>(i) * k + p];
          if (aip == 0.0) continue;
          for (int j = 0; j < n; ++j)
            bn->grad[static_cast<size_t>(p) * n + j] +=
                aip * self.grad[static_cast<size_t>(i) * n + j];
        }
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  require_ndim("bmm", a, 3);
  require_ndim("bmm", b, 3);
  const int batches = a.dim(0), m = a.dim(1), k = a.dim(2);
  const int n = transpose_b ? b.dim(1) : b.dim(2);
  const int bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batches || bk != k)
    throw DimensionError("bmm: shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) +
                         (transpose_b ? " (b transposed)" : "") +
                         " are incompatible");
  std::vector<double> out(static_cast<size_t>(batches) * m * n, 0.0);
  const std::vector<double>& av = a.values();
  const std::vector<double>& bv = b.values();
  for (int bi = 0; bi < batches; ++bi) {
    const size_t ao = static_cast<size_t>(bi) * m * k;
    const size_t bo = static_cast<size_t>(bi) * k * n;  // element count per batch
    const size_t yo = static_cast<size_t>(bi) * m * n;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < k; ++p) {
          const double bval = transpose_b
                                  ? bv[bo + static_cast<size_t>(j) * k + p]
                                  : bv[bo + static_cast<size_t>(p) * n + j];
          acc += av[ao + static_cast<size_t>(i) * k + p] * bval;
        }
        out[yo + static_cast<size_t>(i) * n + j] = acc;
      }
  }
  auto an = a.node(), bn = b.node();
  return make_op(
      {batches, m, n}, std::move(out), {a, b},
      [an, bn, batches, m, k, n, transpose_b](Node& self) {
        for (int bi = 0; bi < batches; ++bi) {
          const size_t ao = static_cast<size_t>(bi) * m * k;
          const size_t bo = static_cast<size_t>(bi) * k * n;
          const size_t yo = static_cast<size_t>(bi) * m * n;
          if (an->requires_grad) {
            // dA = g * B (if b transposed) else g * B^T
            for (int i = 0; i < m; ++i)
              for (int p = 0; p < k; ++p) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) {
                  const double bval =
                      transpose_b ? bn->values[bo + static_cast<size_t>(j) * k + p]
                                  : bn->values[bo + static_cast<size_t>(p) * n + j];
                  acc += self.grad[yo + static_cast<size_t>(i) * n + j] * bval;
                }
                an->grad[ao + static_cast<size_t>(i) * k + p] += acc;
              }
          }
          if (bn->requires_grad) {
            for (int j = 0; j < n; ++j)
              for (int p = 0; p < k; ++p) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i)
                  acc += self.grad[yo + static_cast<size_t>(i) * n + j] *
                         an->values[ao + static_cast<size_t>(i) * k + p];
                if (transpose_b)
                  bn->grad[bo + static_cast<size_t>(j) * k + p] += acc;
                else
                  bn->grad[bo + static_cast<size_t>(p) * n + j] += acc;
              }
          }
        }
      });
}

Tensor softmax_lastdim(const Tensor& x) {
  if (x.ndim() < 1)
    throw DimensionError("softmax: tensor must have at least one dimension");
  const int width = x.dim(x.ndim() - 1);
  const std::int64_t rows = x.numel() / width;
  std::vector<double> out(x.numel());
  const std::vector<double>& xv = x.values();
  for (std::int64_t r = 0; r < rows; ++r) {
    const size_t off = static_cast<size_t>(r) * width;
    double mx = xv[off];
    for (int i = 1; i < width; ++i) mx = std::max(mx, xv[off + i]);
    double sum = 0.0;
    for (int i = 0; i < width; ++i) {
      out[off + i] = std::exp(xv[off + i] - mx);
      sum += out[off + i];
    }
    for (int i = 0; i < width; ++i) out[off + i] /= sum;
  }
  auto xn = x.node();
  auto yv = std::make_shared<std::vector<double>>(out);
  return make_op(x.shape(), std::move(out), {x},
                 [xn, yv, rows, width](Node& self) {
                   if (!xn->requires_grad) return;
                   const std::vector<double>& y = *yv;
                   for (std::int64_t r = 0; r < rows; ++r) {
                     const size_t off = static_cast<size_t>(r) * width;
                     double dot = 0.0;
                     for (int i = 0; i < width; ++i)
                       dot += self.grad[off + i] * y[off + i];
                     for (int i = 0; i < width; ++i)
                       xn->grad[off + i] +=
                           y[off + i] * (self.grad[off + i] - dot);
                   }
                 });
}

Tensor mean_lastdims(const Tensor& x, int ndims) {
  if (ndims < 1 || ndims >= x.ndim())
    throw DimensionError("mean_lastdims: cannot reduce " +
                         std::to_string(ndims) + " dims of " +
                         shape_str(x.shape()));
  Shape out_shape(x.shape().begin(), x.shape().end() - ndims);
  std::int64_t inner = 1;
  for (int i = x.ndim() - ndims; i < x.ndim(); ++i) inner *= x.dim(i);
  const std::int64_t outer = x.numel() / inner;
  std::vector<double> out(outer, 0.0);
  const std::vector<double>& xv = x.values();
  for (std::int64_t o = 0; o < outer; ++o) {
    double acc = 0.0;
    const size_t off = static_cast<size_t>(o) * inner;
    for (std::int64_t i = 0; i < inner; ++i) acc += xv[off + i];
    out[o] = acc / inner;
  }
  auto xn = x.node();
  return make_op(std::move(out_shape), std::move(out), {x},
                 [xn, outer, inner](Node& self) {
                   if (!xn->requires_grad) return;
                   for (std::int64_t o = 0; o < outer; ++o) {
                     const double g = self.grad[o] / inner;
                     const size_t off = static_cast<size_t>(o) * inner;
                     for (std::int64_t i = 0; i < inner; ++i)
                       xn->grad[off + i] += g;
                   }
                 });
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  auto xn = x.node();
  return make_op({1}, {acc}, {x}, [xn](Node& self) {
    if (!xn->requires_grad) return;
    for (double& g : xn->grad) g += self.grad[0];
  });
}

Tensor mean_all(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  acc /= n;
  auto xn = x.node();
  return make_op({1}, {acc}, {x}, [xn, n](Node& self) {
    if (!xn->requires_grad) return;
    const double g = self.grad[0] / n;
    for (double& gv : xn->grad) gv += g;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " +
                         shape_str(shape) + " changes element count");
  std::vector<double> out(x.values());
  auto xn = x.node();
  return make_op(std::move(shape), std::move(out), {x}, [xn](Node& self) {
    if (xn->requires_grad) accumulate(*xn, self.grad);
  });
}

namespace {

std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> strides(s.size());
  std::int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    strides[i] = acc;
    acc *= s[i];
  }
  return strides;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const int nd = x.ndim();
  if (static_cast<int>(perm.size()) != nd)
    throw DimensionError("permute: order size " + std::to_string(perm.size()) +
                         " != rank of " + shape_str(x.shape()));
  std::vector<bool> seen(nd, false);
  Shape out_shape(nd);
  for (int i = 0; i < nd; ++i) {
    if (perm[i] < 0 || perm[i] >= nd || seen[perm[i]])
      throw DimensionError("permute: invalid axis order");
    seen[perm[i]] = true;
    out_shape[i] = x.dim(perm[i]);
  }
  const auto in_strides = row_major_strides(x.shape());
  // stride in the input for each output axis
  std::vector<std::int64_t> map_strides(nd);
  for (int i = 0; i < nd; ++i) map_strides[i] = in_strides[perm[i]];

  const std::int64_t total = x.numel();
  std::vector<double> out(total);
  const std::vector<double>& xv = x.values();
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t src = 0;
  for (std::int64_t o = 0; o < total; ++o) {
    out[o] = xv[src];
    for (int d = nd - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) {
        src += map_strides[d];
        break;
      }
      src -= map_strides[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
  auto xn = x.node();
  return make_op(std::move(out_shape), std::move(out), {x},
                 [xn, map_strides, shape = x.shape(), perm](Node& self) {
                   if (!xn->requires_grad) return;
                   const int nd2 = static_cast<int>(shape.size());
                   Shape oshape(nd2);
                   for (int i = 0; i < nd2; ++i) oshape[i] = shape[perm[i]];
                   std::vector<std::int64_t> idx(nd2, 0);
                   std::int64_t src = 0;
                   const std::int64_t total2 = self.numel();
                   for (std::int64_t o = 0; o < total2; ++o) {
                     xn->grad[src] += self.grad[o];
                     for (int d = nd2 - 1; d >= 0; --d) {
                       if (++idx[d] < oshape[d]) {
                         src += map_strides[d];
                         break;
                       }
                       src -= map_strides[d] * (oshape[d] - 1);
                       idx[d] = 0;
                     }
                   }
                 });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  require_ndim("add_bias (bias)", b, 1);
  const int width = x.dim(x.ndim() - 1);
  if (b.dim(0) != width)
    throw DimensionError("add_bias: bias length " + std::to_string(b.dim(0)) +
                         " != last dim of " + shape_str(x.shape()));
  std::vector<double> out(x.values());
  const std::vector<double>& bv = b.values();
  const std::int64_t rows = x.numel() / width;
  for (std::int64_t r = 0; r < rows; ++r)
    for (int i = 0; i < width; ++i) out[static_cast<size_t>(r) * width + i] += bv[i];
  auto xn = x.node(), bn = b.node();
  return make_op(x.shape(), std::move(out), {x, b},
                 [xn, bn, rows, width](Node& self) {
                   if (xn->requires_grad) accumulate(*xn, self.grad);
                   if (bn->requires_grad)
                     for (std::int64_t r = 0; r < rows; ++r)
                       for (int i = 0; i < width; ++i)
                         bn->grad[i] += self.grad[static_cast<size_t>(r) * width + i];
                 });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  require_ndim("add_channel_bias (bias)", b, 1);
  if (x.ndim() < 2)
    throw DimensionError("add_channel_bias: input must have a channel axis");
  const int channels = x.dim(1);
  if (b.dim(0) != channels)
    throw DimensionError("add_channel_bias: bias length " +
                         std::to_string(b.dim(0)) + " != channels of " +
                         shape_str(x.shape()));
  std::int64_t inner = 1;
  for (int i = 2; i < x.ndim(); ++i) inner *= x.dim(i);
  const int batch = x.dim(0);
  std::vector<double> out(x.values());
  const std::vector<double>& bv = b.values();
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c) {
      const size_t off = (static_cast<size_t>(n) * channels + c) * inner;
      for (std::int64_t i = 0; i < inner; ++i) out[off + i] += bv[c];
    }
  auto xn = x.node(), bn = b.node();
  return make_op(x.shape(), std::move(out), {x, b},
                 [xn, bn, batch, channels, inner](Node& self) {
                   if (xn->requires_grad) accumulate(*xn, self.grad);
                   if (bn->requires_grad)
                     for (int n = 0; n < batch; ++n)
                       for (int c = 0; c < channels; ++c) {
                         const size_t off =
                             (static_cast<size_t>(n) * channels + c) * inner;
                         double acc = 0.0;
                         for (std::int64_t i = 0; i < inner; ++i)
                           acc += self.grad[off + i];
                         bn->grad[c] += acc;
                       }
                 });
}

Tensor temporal_conv(const Tensor& x, const Tensor& w, const Tensor* bias,
                     int stride, int pad) {
  require_ndim("temporal_conv (input)", x, 4);
  require_ndim("temporal_conv (weight)", w, 3);
  if (stride < 1) throw DimensionError("temporal_conv: stride must be >= 1");
  if (pad < 0) throw DimensionError("temporal_conv: pad must be >= 0");
  const int batch = x.dim(0), c_in = x.dim(1), t_in = x.dim(2), v = x.dim(3);
  const int c_out = w.dim(0), kernel = w.dim(2);
  if (w.dim(1) != c_in)
    throw DimensionError("temporal_conv: weight " + shape_str(w.shape()) +
                         " does not match input channels of " +
                         shape_str(x.shape()));
  const int t_out = (t_in + 2 * pad - kernel) / stride + 1;
  if (t_out < 1)
    throw DimensionError("temporal_conv: kernel " + std::to_string(kernel) +
                         " too large for length " + std::to_string(t_in));
  if (bias && (bias->ndim() != 1 || bias->dim(0) != c_out))
    throw DimensionError("temporal_conv: bias must have shape (C_out)");

  std::vector<double> out(static_cast<size_t>(batch) * c_out * t_out * v, 0.0);
  const std::vector<double>& xv = x.values();
  const std::vector<double>& wv = w.values();
  for (int n = 0; n < batch; ++n)
    for (int o = 0; o < c_out; ++o) {
      for (int to = 0; to < t_out; ++to) {
        const size_t yoff =
            ((static_cast<size_t>(n) * c_out + o) * t_out + to) * v;
        for (int i = 0; i < c_in; ++i)
          for (int k = 0; k < kernel; ++k) {
            const int t = to * stride + k - pad;
            if (t < 0 || t >= t_in) continue;
            const double wk =
                wv[(static_cast<size_t>(o) * c_in + i) * kernel + k];
            if (wk == 0.0) continue;
            const size_t xoff =
                ((static_cast<size_t>(n) * c_in + i) * t_in + t) * v;
            for (int j = 0; j < v; ++j) out[yoff + j] += wk * xv[xoff + j];
          }
      }
      if (bias) {
        const double bv = bias->values()[o];
        const size_t yoff = (static_cast<size_t>(n) * c_out + o) *
                            static_cast<size_t>(t_out) * v;
        for (std::int64_t j = 0; j < static_cast<std::int64_t>(t_out) * v; ++j)
          out[yoff + j] += bv;
      }
    }

  std::vector<Tensor> parents = {x, w};
  if (bias) parents.push_back(*bias);
  auto xn = x.node(), wn = w.node();
  auto bn = bias ? bias->node() : nullptr;
  return make_op(
      {batch, c_out, t_out, v}, std::move(out), parents,
      [xn, wn, bn, batch, c_in, c_out, t_in, t_out, v, kernel, stride,
       pad](Node& self) {
        for (int n = 0; n < batch; ++n)
          for (int o = 0; o < c_out; ++o)
            for (int to = 0; to < t_out; ++to) {
              const size_t yoff =
                  ((static_cast<size_t>(n) * c_out + o) * t_out + to) * v;
              for (int i = 0; i < c_in; ++i)
                for (int k = 0; k < kernel; ++k) {
                  const int t = to * stride + k - pad;
                  if (t < 0 || t >= t_in) continue;
                  const size_t widx =
                      (static_cast<size_t>(o) * c_in + i) * kernel + k;
                  const size_t xoff =
                      ((static_cast<size_t>(n) * c_in + i) * t_in + t) * v;
                  if (wn->requires_grad) {
                    double acc = 0.0;
                    for (int j = 0; j < v; ++j)
                      acc += self.grad[yoff + j] * xn->values[xoff + j];
                    wn->grad[widx] += acc;
                  }
                  if (xn->requires_grad) {
                    const double wk = wn->values[widx];
                    if (wk != 0.0)
                      for (int j = 0; j < v; ++j)
                        xn->grad[xoff + j] += wk * self.grad[yoff + j];
                  }
                }
            }
        if (bn && bn->requires_grad) {
          for (int n = 0; n < batch; ++n)
            for (int o = 0; o < c_out; ++o) {
              const size_t yoff = (static_cast<size_t>(n) * c_out + o) *
                                  static_cast<size_t>(t_out) * v;
              double acc = 0.0;
              for (std::int64_t j = 0; j < static_cast<std::int64_t>(t_out) * v;
                   ++j)
                acc += self.grad[yoff + j];
              bn->grad[o] += acc;
            }
        }
      });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training, double momentum,
                  double eps) {
  if (x.ndim() < 2)
    throw DimensionError("batch_norm: input must have a channel axis");
  const int channels = x.dim(1);
  if (gamma.ndim() != 1 || gamma.dim(0) != channels || beta.ndim() != 1 ||
      beta.dim(0) != channels)
    throw DimensionError("batch_norm: gamma/beta must have shape (C)");
  if (state.channels() != channels)
    throw DimensionError("batch_norm: state has " +
                         std::to_string(state.channels()) +
                         " channels, input " + std::to_string(channels));
  const int batch = x.dim(0);
  std::int64_t inner = 1;
  for (int i = 2; i < x.ndim(); ++i) inner *= x.dim(i);
  const std::int64_t per_channel = static_cast<std::int64_t>(batch) * inner;

  std::vector<double> mean(channels, 0.0), var(channels, 0.0);
  const std::vector<double>& xv = x.values();
  if (training) {
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < channels; ++c) {
        const size_t off = (static_cast<size_t>(n) * channels + c) * inner;
        for (std::int64_t i = 0; i < inner; ++i) mean[c] += xv[off + i];
      }
    for (int c = 0; c < channels; ++c) mean[c] /= per_channel;
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < channels; ++c) {
        const size_t off = (static_cast<size_t>(n) * channels + c) * inner;
        for (std::int64_t i = 0; i < inner; ++i) {
          const double d = xv[off + i] - mean[c];
          var[c] += d * d;
        }
      }
    for (int c = 0; c < channels; ++c) var[c] /= per_channel;
    // fold into the running buffers; running variance keeps the unbiased form
    const double unbias =
        per_channel > 1 ? static_cast<double>(per_channel) / (per_channel - 1)
                        : 1.0;
    for (int c = 0; c < channels; ++c) {
      state.running_mean[c] =
          momentum * state.running_mean[c] + (1.0 - momentum) * mean[c];
      state.running_var[c] =
          momentum * state.running_var[c] + (1.0 - momentum) * var[c] * unbias;
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  std::vector<double> inv_std(channels);
  for (int c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

  std::vector<double> out(x.numel());
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  const std::vector<double>& gv = gamma.values();
  const std::vector<double>& bv = beta.values();
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c) {
      const size_t off = (static_cast<size_t>(n) * channels + c) * inner;
      for (std::int64_t i = 0; i < inner; ++i) {
        const double h = (xv[off + i] - mean[c]) * inv_std[c];
        (*xhat)[off + i] = h;
        out[off + i] = gv[c] * h + bv[c];
      }
    }

  auto xn = x.node(), gn = gamma.node(), betn = beta.node();
  return make_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [xn, gn, betn, xhat, inv_std, batch, channels, inner, per_channel,
       training](Node& self) {
        const std::vector<double>& h = *xhat;
        std::vector<double> sum_g(channels, 0.0), sum_gh(channels, 0.0);
        for (int n = 0; n < batch; ++n)
          for (int c = 0; c < channels; ++c) {
            const size_t off = (static_cast<size_t>(n) * channels + c) * inner;
            for (std::int64_t i = 0; i < inner; ++i) {
              sum_g[c] += self.grad[off + i];
              sum_gh[c] += self.grad[off + i] * h[off + i];
            }
          }
        if (gn->requires_grad)
          for (int c = 0; c < channels; ++c) gn->grad[c] += sum_gh[c];
        if (betn->requires_grad)
          for (int c = 0; c < channels; ++c) betn->grad[c] += sum_g[c];
        if (!xn->requires_grad) return;
        const double m = static_cast<double>(per_channel);
        for (int n = 0; n < batch; ++n)
          for (int c = 0; c < channels; ++c) {
            const size_t off = (static_cast<size_t>(n) * channels + c) * inner;
            const double g_scale = gn->values[c] * inv_std[c];
            for (std::int64_t i = 0; i < inner; ++i) {
              if (training) {
                xn->grad[off + i] +=
                    g_scale * (self.grad[off + i] - sum_g[c] / m -
                               h[off + i] * sum_gh[c] / m);
              } else {
                xn->grad[off + i] += g_scale * self.grad[off + i];
              }
            }
          }
      });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0)
    throw ValidationError("dropout: probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  std::vector<double> out(x.numel());
  const std::vector<double>& xv = x.values();
  for (size_t i = 0; i < out.size(); ++i) {
    const double m = rng.uniform() >= p ? keep_scale : 0.0;
    (*mask)[i] = m;
    out[i] = xv[i] * m;
  }
  auto xn = x.node();
  return make_op(x.shape(), std::move(out), {x}, [xn, mask](Node& self) {
    if (!xn->requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i)
      xn->grad[i] += self.grad[i] * (*mask)[i];
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require_ndim("cross_entropy", logits, 2);
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  for (int i = 0; i < n; ++i)
    if (labels[i] < 0 || labels[i] >= k)
      throw ValidationError("cross_entropy: label " + std::to_string(labels[i]) +
                            " outside [0, " + std::to_string(k) + ")");
  auto probs = std::make_shared<std::vector<double>>(logits.numel());
  const std::vector<double>& lv = logits.values();
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const size_t off = static_cast<size_t>(i) * k;
    double mx = lv[off];
    for (int j = 1; j < k; ++j) mx = std::max(mx, lv[off + j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      (*probs)[off + j] = std::exp(lv[off + j] - mx);
      sum += (*probs)[off + j];
    }
    for (int j = 0; j < k; ++j) (*probs)[off + j] /= sum;
    loss -= std::log(std::max((*probs)[off + labels[i]], 1e-12));
  }
  loss /= n;
  auto ln = logits.node();
  return make_op({1}, {loss}, {logits}, [ln, probs, labels, n, k](Node& self) {
    if (!ln->requires_grad) return;
    const double g = self.grad[0] / n;
    for (int i = 0; i < n; ++i) {
      const size_t off = static_cast<size_t>(i) * k;
      for (int j = 0; j < k; ++j) {
        const double onehot = j == labels[i] ? 1.0 : 0.0;
        ln->grad[off + j] += g * ((*probs)[off + j] - onehot);
      }
    }
  });
}

Tensor joint_transform(const Tensor& x, const Matrix& g, int axis) {
  if (axis < 0 || axis >= x.ndim())
    throw DimensionError("joint_transform: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(x.shape()));
  const int width = x.dim(axis);
  if (g.rows != width || g.cols != width)
    throw DimensionError("joint_transform: matrix " + std::to_string(g.rows) +
                         "x" + std::to_string(g.cols) + " does not match axis " +
                         "size " + std::to_string(width));
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);

  std::vector<double> out(x.numel(), 0.0);
  const std::vector<double>& xv = x.values();
  for (std::int64_t o = 0; o < outer; ++o) {
    const size_t base = static_cast<size_t>(o) * width * inner;
    for (int i = 0; i < width; ++i) {
      const size_t ybase = base + static_cast<size_t>(i) * inner;
      for (int j = 0; j < width; ++j) {
        const double gij = g.at(i, j);
        if (gij == 0.0) continue;
        const size_t xbase = base + static_cast<size_t>(j) * inner;
        for (std::int64_t t = 0; t < inner; ++t)
          out[ybase + t] += gij * xv[xbase + t];
      }
    }
  }
  auto xn = x.node();
  auto gm = std::make_shared<Matrix>(g);
  return make_op(x.shape(), std::move(out), {x},
                 [xn, gm, outer, width, inner](Node& self) {
                   if (!xn->requires_grad) return;
                   for (std::int64_t o = 0; o < outer; ++o) {
                     const size_t base = static_cast<size_t>(o) * width * inner;
                     for (int i = 0; i < width; ++i) {
                       const size_t gbase = base + static_cast<size_t>(i) * inner;
                       for (int j = 0; j < width; ++j) {
                         const double gij = gm->at(i, j);
                         if (gij == 0.0) continue;
                         const size_t xbase =
                             base + static_cast<size_t>(j) * inner;
                         for (std::int64_t t = 0; t < inner; ++t)
                           xn->grad[xbase + t] += gij * self.grad[gbase + t];
                       }
                     }
                   }
                 });
}

Tensor add_vertex_embedding(const Tensor& x, const Tensor& e) {
  require_ndim("add_vertex_embedding (input)", x, 4);
  require_ndim("add_vertex_embedding (embedding)", e, 2);
  const int joints = x.dim(2), width = x.dim(3);
  if (e.dim(0) != joints || e.dim(1) != width)
    throw DimensionError("add_vertex_embedding: embedding " +
                         shape_str(e.shape()) + " does not match input " +
                         shape_str(x.shape()));
  const std::int64_t rows = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
  std::vector<double> out(x.values());
  const std::vector<double>& ev = e.values();
  for (std::int64_t r = 0; r < rows; ++r) {
    const size_t off = static_cast<size_t>(r) * joints * width;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(joints) * width; ++i)
      out[off + i] += ev[i];
  }
  auto xn = x.node(), en = e.node();
  return make_op(x.shape(), std::move(out), {x, e},
                 [xn, en, rows, joints, width](Node& self) {
                   if (xn->requires_grad) accumulate(*xn, self.grad);
                   if (en->requires_grad)
                     for (std::int64_t r = 0; r < rows; ++r) {
                       const size_t off = static_cast<size_t>(r) * joints * width;
                       for (std::int64_t i = 0;
                            i < static_cast<std::int64_t>(joints) * width; ++i)
                         en->grad[i] += self.grad[off + i];
                     }
                 });
}

Tensor add_relation_bias(const Tensor& scores,
                         const std::vector<std::uint8_t>& mask,
                         const Tensor& b_same, const Tensor& b_diff, int heads) {
  require_ndim("add_relation_bias", scores, 3);
  const int slices = scores.dim(0), v = scores.dim(1);
  if (scores.dim(2) != v)
    throw DimensionError("add_relation_bias: score slices must be square, got " +
                         shape_str(scores.shape()));
  if (mask.size() != static_cast<size_t>(v) * v)
    throw DimensionError("add_relation_bias: mask size does not match V");
  if (heads < 1 || slices % heads != 0)
    throw DimensionError("add_relation_bias: slice count " +
                         std::to_string(slices) + " not divisible by heads " +
                         std::to_string(heads));
  if (b_same.ndim() != 1 || b_same.dim(0) != heads || b_diff.ndim() != 1 ||
      b_diff.dim(0) != heads)
    throw DimensionError("add_relation_bias: bias tensors must have shape (heads)");

  std::vector<double> out(scores.values());
  const std::vector<double>& sv = b_same.values();
  const std::vector<double>& dv = b_diff.values();
  const size_t area = static_cast<size_t>(v) * v;
  for (int s = 0; s < slices; ++s) {
    const int h = s % heads;
    const size_t off = static_cast<size_t>(s) * area;
    for (size_t i = 0; i < area; ++i) out[off + i] += mask[i] ? sv[h] : dv[h];
  }
  auto sn = scores.node(), samen = b_same.node(), diffn = b_diff.node();
  auto mask_copy = std::make_shared<std::vector<std::uint8_t>>(mask);
  return make_op(scores.shape(), std::move(out), {scores, b_same, b_diff},
                 [sn, samen, diffn, mask_copy, slices, heads, area](Node& self) {
                   if (sn->requires_grad) accumulate(*sn, self.grad);
                   const bool need_same = samen->requires_grad;
                   const bool need_diff = diffn->requires_grad;
                   if (!need_same && !need_diff) return;
                   for (int s = 0; s < slices; ++s) {
                     const int h = s % heads;
                     const size_t off = static_cast<size_t>(s) * area;
                     double acc_same = 0.0, acc_diff = 0.0;
                     for (size_t i = 0; i < area; ++i) {
                       if ((*mask_copy)[i])
                         acc_same += self.grad[off + i];
                       else
                         acc_diff += self.grad[off + i];
                     }
                     if (need_same) samen->grad[h] += acc_same;
                     if (need_diff) diffn->grad[h] += acc_diff;
                   }
                 });
}

}  // namespace skeltk::nn
