#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pafnucy/ops.hpp"
#include "pafnucy/rng.hpp"
#include "pafnucy/tensor.hpp"

namespace pafnucy {

// Architecture and optimizer hyperparameters. Defaults are the production
// values; tests shrink them.
struct NetworkConfig {
  std::array<int, 4> input_shape{21, 21, 21, 19};
  std::vector<int> conv_filters{64, 128, 256};
  int conv_kernel = 5;
  int pool_size = 2;
  std::vector<int> dense_sizes{1000, 500, 200};
  double dropout_keep = 0.5;
  double lambda_l2 = 0.001;
  double learning_rate = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;

  // Flattened size after the conv/pool stack.
  int flatten_size() const;

  struct LayerShape {
    std::string name;
    std::vector<int> dims;
  };
  // Shapes of every layer output, input excluded, head included.
  std::vector<LayerShape> layer_shapes() const;

  bool operator==(const NetworkConfig&) const = default;
};

template <class T>
struct AdamState {
  std::vector<Tensor<T>> m;  // aligned with parameter order
  std::vector<Tensor<T>> v;
  int64_t step = 0;
};

// Parameter blocks in fixed order: conv weight/bias pairs, then dense
// weight/bias pairs; the last dense pair is the single-output head.
template <class T>
struct NetworkT {
  NetworkConfig config;
  double charge_scaler_std = 0.0;  // travels with checkpoints
  std::vector<Tensor<T>> conv_w, conv_b;
  std::vector<Tensor<T>> dense_w, dense_b;
  AdamState<T> adam;

  size_t parameter_count() const;

  // Visits parameters in checkpoint order. is_weight is false for biases
  // (the L2 penalty skips them).
  void for_each_parameter(
      const std::function<void(const Tensor<T>&, bool is_weight)>& fn) const;
  void for_each_parameter(
      const std::function<void(Tensor<T>&, bool is_weight)>& fn);

  template <class U>
  NetworkT<U> cast() const {
    NetworkT<U> out;
    out.config = config;
    out.charge_scaler_std = charge_scaler_std;
    for (const auto& t : conv_w) out.conv_w.push_back(t.template cast<U>());
    for (const auto& t : conv_b) out.conv_b.push_back(t.template cast<U>());
    for (const auto& t : dense_w) out.dense_w.push_back(t.template cast<U>());
    for (const auto& t : dense_b) out.dense_b.push_back(t.template cast<U>());
    for (const auto& t : adam.m) out.adam.m.push_back(t.template cast<U>());
    for (const auto& t : adam.v) out.adam.v.push_back(t.template cast<U>());
    out.adam.step = adam.step;
    return out;
  }
};

using Network = NetworkT<float>;

// Conv weights ~ N(0, 0.001) truncated at 2 sigma, conv biases 0.1; dense
// weights ~ N(0, 1/sqrt(n_in)) truncated, dense biases 1.0. Adam moments
// zeroed.
template <class T>
NetworkT<T> init_network(const NetworkConfig& config, RngStream& rng);

// Gradients aligned with the network's parameter blocks.
template <class T>
struct Gradients {
  std::vector<Tensor<T>> conv_w, conv_b;
  std::vector<Tensor<T>> dense_w, dense_b;
};

// Per-layer activation snapshots from one forward pass.
struct TraceEntry {
  std::string name;
  std::vector<int> dims;
  int spatial = 0;            // cube edge for conv layers, 0 for dense
  std::vector<float> values;  // flattened activation
};
using ForwardTrace = std::vector<TraceEntry>;

// Forward pass. Training mode applies dropout (consuming rng); inference
// is deterministic and rng may be null.
template <class T>
T forward(const NetworkT<T>& net, const Tensor<T>& grid, bool training,
          RngStream* rng, ForwardTrace* trace = nullptr);

template <class T>
struct LabeledGrid {
  const Tensor<T>* grid;
  double label;
};

// Mean squared error over the batch plus lambda * sum of squared weights
// (biases excluded), with full backpropagation through the dropout masks
// drawn in this call.
template <class T>
T loss_and_gradients(const NetworkT<T>& net,
                     const std::vector<LabeledGrid<T>>& batch, RngStream* rng,
                     Gradients<T>& grads);

// Bias-corrected Adam update; increments the step counter.
template <class T>
void adam_step(NetworkT<T>& net, const Gradients<T>& grads);

extern template struct NetworkT<float>;
extern template struct NetworkT<double>;
extern template NetworkT<float> init_network<float>(const NetworkConfig&,
                                                    RngStream&);
extern template NetworkT<double> init_network<double>(const NetworkConfig&,
                                                      RngStream&);
extern template float forward<float>(const NetworkT<float>&,
                                     const Tensor<float>&, bool, RngStream*,
                                     ForwardTrace*);
extern template double forward<double>(const NetworkT<double>&,
                                       const Tensor<double>&, bool,
                                       RngStream*, ForwardTrace*);
extern template float loss_and_gradients<float>(
    const NetworkT<float>&, const std::vector<LabeledGrid<float>>&,
    RngStream*, Gradients<float>&);
extern template double loss_and_gradients<double>(
    const NetworkT<double>&, const std::vector<LabeledGrid<double>>&,
    RngStream*, Gradients<double>&);
extern template void adam_step<float>(NetworkT<float>&,
                                      const Gradients<float>&);
extern template void adam_step<double>(NetworkT<double>&,
                                       const Gradients<double>&);

}  // namespace pafnucy
