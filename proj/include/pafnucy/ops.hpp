#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "pafnucy/errors.hpp"
#include "pafnucy/parallel.hpp"
#include "pafnucy/rng.hpp"
#include "pafnucy/tensor.hpp"

namespace pafnucy {

// Layer kernels for the conv/dense stack. Inputs are rank-4 (D, H, W, C)
// spatial tensors or rank-1 vectors; weights follow (k, k, k, Cin, Cout)
// and (N, M). Every output element is an independently computed sum, so
// parallel partitioning cannot change results.

// Cross-correlation, stride 1, symmetric zero padding of (k-1)/2 per side
// (output spatial size equals input spatial size).
template <class T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& weights,
                         const Tensor<T>& bias) {
  if (input.shape.size() != 4 || weights.shape.size() != 5) {
    throw ConfigError("conv3d expects a rank-4 input and rank-5 weights");
  }
  const int D = input.shape[0], H = input.shape[1], W = input.shape[2];
  const int cin = input.shape[3];
  const int K = weights.shape[0];
  const int cout = weights.shape[4];
  if (weights.shape[1] != K || weights.shape[2] != K ||
      weights.shape[3] != cin) {
    throw ConfigError("conv3d weight shape does not match input channels");
  }
  if (bias.shape != std::vector<int>{cout}) {
    throw ConfigError("conv3d bias shape does not match output channels");
  }
  const int P = (K - 1) / 2;

  Tensor<T> out({D, H, W, cout});
  const T* in = input.data();
  const T* w = weights.data();
  const T* b = bias.data();
  T* o = out.data();

  const int64_t conv_work = static_cast<int64_t>(D) * H * W * K * K * K *
                            cin * cout;
  parallel_for(D, conv_work, [&](int64_t z0, int64_t z1) {
    for (int64_t z = z0; z < z1; ++z) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          T* cell = o + (((z * H + y) * W + x) * cout);
          for (int co = 0; co < cout; ++co) cell[co] = b[co];
          for (int kz = 0; kz < K; ++kz) {
            const int iz = static_cast<int>(z) + kz - P;
            if (iz < 0 || iz >= D) continue;
            for (int ky = 0; ky < K; ++ky) {
              const int iy = y + ky - P;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < K; ++kx) {
                const int ix = x + kx - P;
                if (ix < 0 || ix >= W) continue;
                const T* ivec = in + (((static_cast<size_t>(iz) * H + iy) * W + ix) * cin);
                const T* wvec =
                    w + ((((static_cast<size_t>(kz) * K + ky) * K + kx) * cin) * cout);
                for (int ci = 0; ci < cin; ++ci) {
                  const T iv = ivec[ci];
                  const T* wrow = wvec + static_cast<size_t>(ci) * cout;
                  for (int co = 0; co < cout; ++co) {
                    cell[co] += iv * wrow[co];
                  }
                }
              }
            }
          }
        }
      }
    }
  });
  debug_check_finite(out);
  return out;
}

template <class T>
void conv3d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                     const Tensor<T>& grad_out, Tensor<T>& grad_input,
                     Tensor<T>& grad_weights, Tensor<T>& grad_bias) {
  const int D = input.shape[0], H = input.shape[1], W = input.shape[2];
  const int cin = input.shape[3];
  const int K = weights.shape[0];
  const int cout = weights.shape[4];
  const int P = (K - 1) / 2;

  grad_input = Tensor<T>(input.shape);
  grad_weights = Tensor<T>(weights.shape);
  grad_bias = Tensor<T>({cout});

  const T* in = input.data();
  const T* w = weights.data();
  const T* go = grad_out.data();

  for (size_t i = 0; i < grad_out.numel(); ++i) {
    grad_bias[i % static_cast<size_t>(cout)] += go[i];
  }

  // d/d(input): each input cell gathers from the output positions whose
  // kernel window covers it.
  const int64_t conv_work = static_cast<int64_t>(D) * H * W * K * K * K *
                            cin * cout;
  T* gi = grad_input.data();
  parallel_for(D, conv_work, [&](int64_t z0, int64_t z1) {
    for (int64_t iz = z0; iz < z1; ++iz) {
      for (int iy = 0; iy < H; ++iy) {
        for (int ix = 0; ix < W; ++ix) {
          T* gcell = gi + (((iz * H + iy) * W + ix) * cin);
          for (int kz = 0; kz < K; ++kz) {
            const int z = static_cast<int>(iz) - kz + P;
            if (z < 0 || z >= D) continue;
            for (int ky = 0; ky < K; ++ky) {
              const int y = iy - ky + P;
              if (y < 0 || y >= H) continue;
              for (int kx = 0; kx < K; ++kx) {
                const int x = ix - kx + P;
                if (x < 0 || x >= W) continue;
                const T* gvec = go + (((static_cast<size_t>(z) * H + y) * W + x) * cout);
                const T* wvec =
                    w + ((((static_cast<size_t>(kz) * K + ky) * K + kx) * cin) * cout);
                for (int ci = 0; ci < cin; ++ci) {
                  const T* wrow = wvec + static_cast<size_t>(ci) * cout;
                  T acc = T(0);
                  for (int co = 0; co < cout; ++co) acc += wrow[co] * gvec[co];
                  gcell[ci] += acc;
                }
              }
            }
          }
        }
      }
    }
  });

  // d/d(weights): partitioned over kernel z-planes; each tap owns its slice.
  T* gw = grad_weights.data();
  parallel_for(K, conv_work, [&](int64_t k0, int64_t k1) {
    for (int64_t kz = k0; kz < k1; ++kz) {
      for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
          T* gslice = gw + ((((kz * K + ky) * K + kx) * cin) * cout);
          for (int z = 0; z < D; ++z) {
            const int iz = z + static_cast<int>(kz) - P;
            if (iz < 0 || iz >= D) continue;
            for (int y = 0; y < H; ++y) {
              const int iy = y + ky - P;
              if (iy < 0 || iy >= H) continue;
              for (int x = 0; x < W; ++x) {
                const int ix = x + kx - P;
                if (ix < 0 || ix >= W) continue;
                const T* ivec = in + (((static_cast<size_t>(iz) * H + iy) * W + ix) * cin);
                const T* gvec = go + (((static_cast<size_t>(z) * H + y) * W + x) * cout);
                for (int ci = 0; ci < cin; ++ci) {
                  const T iv = ivec[ci];
                  T* grow = gslice + static_cast<size_t>(ci) * cout;
                  for (int co = 0; co < cout; ++co) grow[co] += iv * gvec[co];
                }
              }
            }
          }
        }
      }
    }
  });
}

template <class T>
struct PoolResult {
  Tensor<T> output;
  std::vector<int64_t> argmax;  // flat input index per output element
};

// Non-overlapping cubic windows, ceil mode: odd tails are padded at the
// high-index end with -inf, so the real elements always win.
template <class T>
PoolResult<T> maxpool3d_forward(const Tensor<T>& input, int pool) {
  const int D = input.shape[0], H = input.shape[1], W = input.shape[2];
  const int C = input.shape[3];
  const int OD = (D + pool - 1) / pool;
  const int OH = (H + pool - 1) / pool;
  const int OW = (W + pool - 1) / pool;

  PoolResult<T> result;
  result.output = Tensor<T>({OD, OH, OW, C});
  result.argmax.assign(result.output.numel(), -1);

  const T* in = input.data();
  T* out = result.output.data();
  int64_t* arg = result.argmax.data();

  for (int oz = 0; oz < OD; ++oz) {
    for (int oy = 0; oy < OH; ++oy) {
      for (int ox = 0; ox < OW; ++ox) {
        for (int c = 0; c < C; ++c) {
          T best = -std::numeric_limits<T>::infinity();
          int64_t best_idx = -1;
          for (int dz = 0; dz < pool; ++dz) {
            const int z = oz * pool + dz;
            if (z >= D) break;
            for (int dy = 0; dy < pool; ++dy) {
              const int y = oy * pool + dy;
              if (y >= H) break;
              for (int dx = 0; dx < pool; ++dx) {
                const int x = ox * pool + dx;
                if (x >= W) break;
                const int64_t idx =
                    ((static_cast<int64_t>(z) * H + y) * W + x) * C + c;
                if (in[idx] > best) {
                  best = in[idx];
                  best_idx = idx;
                }
              }
            }
          }
          const int64_t oidx =
              ((static_cast<int64_t>(oz) * OH + oy) * OW + ox) * C + c;
          out[oidx] = best;
          arg[oidx] = best_idx;
        }
      }
    }
  }
  return result;
}

// Routes each output gradient to the recorded argmax position.
template <class T>
Tensor<T> maxpool3d_backward(const Tensor<T>& grad_out,
                             const std::vector<int64_t>& argmax,
                             const std::vector<int>& input_shape) {
  Tensor<T> grad_input(input_shape);
  for (size_t i = 0; i < grad_out.numel(); ++i) {
    grad_input[static_cast<size_t>(argmax[i])] += grad_out[i];
  }
  return grad_input;
}

template <class T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights,
                        const Tensor<T>& bias) {
  const int n = static_cast<int>(input.numel());
  if (weights.shape.size() != 2 || weights.shape[0] != n) {
    throw ConfigError("dense weight shape does not match input size " +
                      std::to_string(n));
  }
  const int m = weights.shape[1];
  if (static_cast<int>(bias.numel()) != m) {
    throw ConfigError("dense bias shape does not match output size");
  }
  Tensor<T> out({m});
  const T* x = input.data();
  const T* w = weights.data();
  T* y = out.data();
  for (int j = 0; j < m; ++j) y[j] = bias[static_cast<size_t>(j)];
  parallel_for(m, static_cast<int64_t>(n) * m, [&](int64_t j0, int64_t j1) {
    for (int64_t j = j0; j < j1; ++j) {
      T acc = T(0);
      for (int i = 0; i < n; ++i) acc += x[i] * w[static_cast<size_t>(i) * m + static_cast<size_t>(j)];
      y[j] += acc;
    }
  });
  debug_check_finite(out);
  return out;
}

template <class T>
void dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                    const Tensor<T>& grad_out, Tensor<T>& grad_input,
                    Tensor<T>& grad_weights, Tensor<T>& grad_bias) {
  const int n = static_cast<int>(input.numel());
  const int m = weights.shape[1];
  grad_input = Tensor<T>(input.shape);
  grad_weights = Tensor<T>(weights.shape);
  grad_bias = grad_out;

  const T* x = input.data();
  const T* w = weights.data();
  const T* gy = grad_out.data();

  T* gx = grad_input.data();
  T* gw = grad_weights.data();
  parallel_for(n, static_cast<int64_t>(n) * m, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      const T* wrow = w + static_cast<size_t>(i) * m;
      T* gwrow = gw + static_cast<size_t>(i) * m;
      T acc = T(0);
      const T xi = x[i];
      for (int j = 0; j < m; ++j) {
        acc += wrow[j] * gy[j];
        gwrow[j] = xi * gy[j];
      }
      gx[i] = acc;
    }
  });
}

template <class T>
void relu_inplace(Tensor<T>& t) {
  for (T& v : t.values) v = v > T(0) ? v : T(0);
}

// grad *= (activated > 0); `activated` is the post-ReLU buffer, whose
// positive entries coincide with positive pre-activations.
template <class T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& activated) {
  for (size_t i = 0; i < grad.numel(); ++i) {
    if (!(activated[i] > T(0))) grad[i] = T(0);
  }
}

// Inverted dropout. Training: keep each unit with probability keep_prob and
// scale by 1/keep_prob; the mask is recorded for the backward pass.
// Inference (or keep_prob == 1): identity, no randomness consumed.
template <class T>
void dropout_forward_inplace(Tensor<T>& t, double keep_prob, bool training,
                             RngStream* rng, std::vector<uint8_t>* mask) {
  if (mask) mask->assign(t.numel(), 1);
  if (!training || keep_prob >= 1.0) return;
  if (!(keep_prob > 0.0)) throw ConfigError("dropout keep probability must be in (0, 1]");
  if (!rng) throw ConfigError("training-mode dropout needs an RNG");
  const T scale = static_cast<T>(1.0 / keep_prob);
  for (size_t i = 0; i < t.numel(); ++i) {
    const bool keep = rng->uniform() < keep_prob;
    if (mask) (*mask)[i] = keep ? 1 : 0;
    t[i] = keep ? t[i] * scale : T(0);
  }
}

template <class T>
void dropout_backward_inplace(Tensor<T>& grad, double keep_prob,
                              const std::vector<uint8_t>& mask) {
  if (keep_prob >= 1.0) return;
  const T scale = static_cast<T>(1.0 / keep_prob);
  for (size_t i = 0; i < grad.numel(); ++i) {
    grad[i] = mask[i] ? grad[i] * scale : T(0);
  }
}

// Samples beyond two standard deviations from the mean are redrawn.
template <class T>
Tensor<T> trunc_normal(std::vector<int> shape, double mean, double std,
                       RngStream& rng) {
  if (!(std > 0.0)) throw DomainError("trunc_normal std must be positive");
  Tensor<T> out(std::move(shape));
  for (T& v : out.values) {
    double x;
    do {
      x = rng.normal() * std;
    } while (std::abs(x) > 2.0 * std);
    v = static_cast<T>(mean + x);
  }
  return out;
}

}  // namespace pafnucy
