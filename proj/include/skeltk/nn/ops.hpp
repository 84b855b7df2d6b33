#pragma once

#include <cstdint>
#include <vector>

#include "skeltk/matrix.hpp"
#include "skeltk/nn/tensor.hpp"
#include "skeltk/rng.hpp"

namespace skeltk::nn {

// Elementwise; shapes must match exactly (no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

Tensor relu(const Tensor& x);

// (m,k) x (k,n) -> (m,n).
Tensor matmul(const Tensor& a, const Tensor& b);

// Batched: (B,m,k) x (B,k,n) -> (B,m,n); transpose_b treats b as (B,n,k).
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

// Softmax over the last dimension; rows sum to 1.
Tensor softmax_lastdim(const Tensor& x);

// Mean over the trailing ndims dimensions; shape loses them.
Tensor mean_lastdims(const Tensor& x, int ndims);

Tensor sum_all(const Tensor& x);   // scalar
Tensor mean_all(const Tensor& x);  // scalar

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);

// Bias over the last dimension: y[..., i] = x[..., i] + b[i].
Tensor add_bias(const Tensor& x, const Tensor& b);

// Bias over dimension 1 (the channel axis of (N,C,...) layouts).
Tensor add_channel_bias(const Tensor& x, const Tensor& b);

// 1-D convolution along T of an (N,C,T,V) tensor, shared across V.
// w is (C_out, C_in, K); out length (T + 2*pad - K)/stride + 1. bias may be
// null. K=1 doubles as the pointwise (1x1) convolution, including strided
// residual adapters.
Tensor temporal_conv(const Tensor& x, const Tensor& w, const Tensor* bias,
                     int stride, int pad);

// Per-channel running statistics for batch norm (channel axis 1).
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;

  explicit BatchNormState(int channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
  int channels() const { return static_cast<int>(running_mean.size()); }
};

// Training mode normalizes with batch statistics and folds them into the
// running buffers (keep fraction `momentum`); eval mode uses the running
// buffers. gamma/beta are per-channel.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training, double momentum = 0.9,
                  double eps = 1e-5);

// Inverted dropout: keep probability 1-p, kept values scaled by 1/(1-p).
// Identity when not training or p == 0. The mask is drawn from rng.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// Mean over the batch of -log softmax(logits)[label]; the log argument is
// floored at 1e-12. logits (N,K), labels length N.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Applies a constant square matrix along one axis:
// y[..., i, ...] = sum_j g(i, j) * x[..., j, ...]. Used for adjacency
// partitions and hypergraph aggregation inside models.
Tensor joint_transform(const Tensor& x, const Matrix& g, int axis);

// x (N,T,V,d) + e (V,d) broadcast over N,T.
Tensor add_vertex_embedding(const Tensor& x, const Tensor& e);

// scores (G,V,V) where slice g belongs to attention head g % heads; adds the
// learned scalar b_same[h] where mask marks a shared hyperedge and b_diff[h]
// elsewhere. mask is row-major V*V.
Tensor add_relation_bias(const Tensor& scores,
                         const std::vector<std::uint8_t>& mask,
                         const Tensor& b_same, const Tensor& b_diff, int heads);

}  // namespace skeltk::nn
