#include "pafnucy/network.hpp"

#include <cmath>

#include "pafnucy/errors.hpp"

namespace pafnucy {

void NetworkConfig::validate() const {
  for (int d : input_shape) {
    if (d <= 0) throw ConfigError("input shape entries must be positive");
  }
  if (conv_filters.empty() || dense_sizes.empty()) {
    throw ConfigError("network needs at least one conv and one dense layer");
  }
  for (int f : conv_filters) {
    if (f <= 0) throw ConfigError("conv filter counts must be positive");
  }
  for (int s : dense_sizes) {
    if (s <= 0) throw ConfigError("dense sizes must be positive");
  }
  if (conv_kernel <= 0 || conv_kernel % 2 == 0) {
    throw ConfigError("conv kernel must be a positive odd size");
  }
  if (pool_size <= 0) throw ConfigError("pool size must be positive");
  if (!(dropout_keep > 0.0) || dropout_keep > 1.0) {
    throw ConfigError("dropout keep probability must be in (0, 1]");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (lambda_l2 < 0.0) throw ConfigError("L2 lambda must be non-negative");
}

int NetworkConfig::flatten_size() const {
  int d = input_shape[0];
  for (size_t i = 0; i < conv_filters.size(); ++i) {
    d = (d + pool_size - 1) / pool_size;  // ceil-mode pooling
  }
  return d * d * d * conv_filters.back();
}

std::vector<NetworkConfig::LayerShape> NetworkConfig::layer_shapes() const {
  std::vector<LayerShape> shapes;
  int d = input_shape[0];
  for (size_t i = 0; i < conv_filters.size(); ++i) {
    const int f = conv_filters[i];
    shapes.push_back({"conv" + std::to_string(i + 1), {d, d, d, f}});
    d = (d + pool_size - 1) / pool_size;
    shapes.push_back({"pool" + std::to_string(i + 1), {d, d, d, f}});
  }
  shapes.push_back({"flatten", {flatten_size()}});
  for (size_t i = 0; i < dense_sizes.size(); ++i) {
    shapes.push_back({"dense" + std::to_string(i + 1), {dense_sizes[i]}});
  }
  shapes.push_back({"output", {1}});
  return shapes;
}

template <class T>
size_t NetworkT<T>::parameter_count() const {
  size_t n = 0;
  for_each_parameter([&](const Tensor<T>& t, bool) { n += t.numel(); });
  return n;
}

template <class T>
void NetworkT<T>::for_each_parameter(
    const std::function<void(const Tensor<T>&, bool)>& fn) const {
  for (size_t i = 0; i < conv_w.size(); ++i) {
    fn(conv_w[i], true);
    fn(conv_b[i], false);
  }
  for (size_t i = 0; i < dense_w.size(); ++i) {
    fn(dense_w[i], true);
    fn(dense_b[i], false);
  }
}

template <class T>
void NetworkT<T>::for_each_parameter(
    const std::function<void(Tensor<T>&, bool)>& fn) {
  for (size_t i = 0; i < conv_w.size(); ++i) {
    fn(conv_w[i], true);
    fn(conv_b[i], false);
  }
  for (size_t i = 0; i < dense_w.size(); ++i) {
    fn(dense_w[i], true);
    fn(dense_b[i], false);
  }
}

template <class T>
NetworkT<T> init_network(const NetworkConfig& config, RngStream& rng) {
  config.validate();
  NetworkT<T> net;
  net.config = config;

  const int K = config.conv_kernel;
  int cin = config.input_shape[3];
  for (int cout : config.conv_filters) {
    net.conv_w.push_back(trunc_normal<T>({K, K, K, cin, cout}, 0.0, 0.001, rng));
    Tensor<T> b({cout});
    for (T& v : b.values) v = static_cast<T>(0.1);
    net.conv_b.push_back(std::move(b));
    cin = cout;
  }

  int n_in = config.flatten_size();
  std::vector<int> dense_out = config.dense_sizes;
  dense_out.push_back(1);  // affinity head
  for (int n_out : dense_out) {
    const double std = 1.0 / std::sqrt(static_cast<double>(n_in));
    net.dense_w.push_back(trunc_normal<T>({n_in, n_out}, 0.0, std, rng));
    Tensor<T> b({n_out});
    for (T& v : b.values) v = static_cast<T>(1.0);
    net.dense_b.push_back(std::move(b));
    n_in = n_out;
  }

  net.for_each_parameter([&](Tensor<T>& t, bool) {
    net.adam.m.push_back(Tensor<T>(t.shape));
    net.adam.v.push_back(Tensor<T>(t.shape));
  });
  net.adam.step = 0;
  return net;
}

namespace {

// Buffers retained by the training-mode forward pass for backpropagation.
template <class T>
struct ForwardCache {
  std::vector<Tensor<T>> conv_in;       // input to each conv layer
  std::vector<Tensor<T>> conv_act;      // post-ReLU conv output
  std::vector<std::vector<int64_t>> pool_argmax;
  std::vector<std::vector<int>> pool_in_shape;
  std::vector<Tensor<T>> dense_in;      // input to each dense layer
  std::vector<Tensor<T>> dense_act;     // post-ReLU (pre-dropout buffer reused)
  std::vector<std::vector<uint8_t>> dropout_mask;
  T output = T(0);
};

template <class T>
void check_input_shape(const NetworkT<T>& net, const Tensor<T>& grid) {
  const auto& s = net.config.input_shape;
  if (grid.shape != std::vector<int>{s[0], s[1], s[2], s[3]}) {
    throw ConfigError("input grid shape does not match the network config");
  }
}

template <class T>
void run_forward(const NetworkT<T>& net, const Tensor<T>& grid, bool training,
                 RngStream* rng, ForwardCache<T>* cache, ForwardTrace* trace) {
  check_input_shape(net, grid);

  auto record = [&](const std::string& name, const Tensor<T>& t, int spatial) {
    if (!trace) return;
    TraceEntry e;
    e.name = name;
    e.dims = t.shape;
    e.spatial = spatial;
    e.values.reserve(t.numel());
    for (const T& v : t.values) e.values.push_back(static_cast<float>(v));
    trace->push_back(std::move(e));
  };

  Tensor<T> x = grid;
  for (size_t i = 0; i < net.conv_w.size(); ++i) {
    if (cache) cache->conv_in.push_back(x);
    Tensor<T> y = conv3d_forward(x, net.conv_w[i], net.conv_b[i]);
    relu_inplace(y);
    record("conv" + std::to_string(i + 1), y, y.shape[0]);
    if (cache) cache->conv_act.push_back(y);
    auto pooled = maxpool3d_forward(y, net.config.pool_size);
    if (cache) {
      cache->pool_argmax.push_back(std::move(pooled.argmax));
      cache->pool_in_shape.push_back(y.shape);
    }
    x = std::move(pooled.output);
    record("pool" + std::to_string(i + 1), x, x.shape[0]);
  }

  // flatten
  x.shape = {static_cast<int>(x.numel())};
  record("flatten", x, 0);

  const size_t n_dense = net.dense_w.size();
  for (size_t i = 0; i < n_dense; ++i) {
    if (cache) cache->dense_in.push_back(x);
    Tensor<T> y = dense_forward(x, net.dense_w[i], net.dense_b[i]);
    const bool is_head = (i + 1 == n_dense);
    if (!is_head) {
      relu_inplace(y);
      if (cache) cache->dense_act.push_back(y);
      std::vector<uint8_t> mask;
      dropout_forward_inplace(y, net.config.dropout_keep, training, rng,
                              cache ? &mask : nullptr);
      if (cache) cache->dropout_mask.push_back(std::move(mask));
      record("dense" + std::to_string(i + 1), y, 0);
    } else {
      record("output", y, 0);
    }
    x = std::move(y);
  }

  if (cache) cache->output = x[0];
}

template <class T>
void zero_like_network(const NetworkT<T>& net, Gradients<T>& grads) {
  grads.conv_w.clear();
  grads.conv_b.clear();
  grads.dense_w.clear();
  grads.dense_b.clear();
  for (const auto& t : net.conv_w) grads.conv_w.push_back(Tensor<T>(t.shape));
  for (const auto& t : net.conv_b) grads.conv_b.push_back(Tensor<T>(t.shape));
  for (const auto& t : net.dense_w) grads.dense_w.push_back(Tensor<T>(t.shape));
  for (const auto& t : net.dense_b) grads.dense_b.push_back(Tensor<T>(t.shape));
}

template <class T>
void accumulate(Tensor<T>& into, const Tensor<T>& from) {
  for (size_t i = 0; i < into.numel(); ++i) into[i] += from[i];
}

// Backpropagates d(loss)/d(output) through one cached forward pass,
// accumulating into grads.
template <class T>
void run_backward(const NetworkT<T>& net, const ForwardCache<T>& cache,
                  T d_output, Gradients<T>& grads) {
  const size_t n_dense = net.dense_w.size();
  Tensor<T> grad({1});
  grad[0] = d_output;

  for (size_t ri = 0; ri < n_dense; ++ri) {
    const size_t i = n_dense - 1 - ri;
    const bool is_head = (i + 1 == n_dense);
    if (!is_head) {
      dropout_backward_inplace(grad, net.config.dropout_keep,
                               cache.dropout_mask[i]);
      relu_backward_inplace(grad, cache.dense_act[i]);
    }
    Tensor<T> gx, gw, gb;
    dense_backward(cache.dense_in[i], net.dense_w[i], grad, gx, gw, gb);
    accumulate(grads.dense_w[i], gw);
    accumulate(grads.dense_b[i], gb);
    grad = std::move(gx);
  }

  const size_t n_conv = net.conv_w.size();
  for (size_t ri = 0; ri < n_conv; ++ri) {
    const size_t i = n_conv - 1 - ri;
    // reshape flat gradient back to the pooled spatial block
    const auto& in_shape = cache.pool_in_shape[i];
    const int pooled =
        (in_shape[0] + net.config.pool_size - 1) / net.config.pool_size;
    grad.shape = {pooled, pooled, pooled, in_shape[3]};
    Tensor<T> unpooled =
        maxpool3d_backward(grad, cache.pool_argmax[i], in_shape);
    relu_backward_inplace(unpooled, cache.conv_act[i]);
    Tensor<T> gx, gw, gb;
    conv3d_backward(cache.conv_in[i], net.conv_w[i], unpooled, gx, gw, gb);
    accumulate(grads.conv_w[i], gw);
    accumulate(grads.conv_b[i], gb);
    grad = std::move(gx);
  }
}

}  // namespace

template <class T>
T forward(const NetworkT<T>& net, const Tensor<T>& grid, bool training,
          RngStream* rng, ForwardTrace* trace) {
  ForwardCache<T> cache;
  run_forward(net, grid, training, rng, &cache, trace);
  return cache.output;
}

template <class T>
T loss_and_gradients(const NetworkT<T>& net,
                     const std::vector<LabeledGrid<T>>& batch, RngStream* rng,
                     Gradients<T>& grads) {
  if (batch.empty()) throw DomainError("gradient step on an empty batch");
  for (const auto& item : batch) {
    if (!std::isfinite(item.label)) {
      throw DomainError("batch contains a missing or non-finite label");
    }
  }
  zero_like_network(net, grads);

  const T inv_n = static_cast<T>(1.0 / static_cast<double>(batch.size()));
  T data_loss = T(0);
  for (const auto& item : batch) {
    ForwardCache<T> cache;
    run_forward(net, *item.grid, true, rng, &cache, nullptr);
    const T err = cache.output - static_cast<T>(item.label);
    data_loss += err * err * inv_n;
    run_backward(net, cache, T(2) * err * inv_n, grads);
  }

  // L2 weight decay on weights only, differentiated through the loss.
  const T lambda = static_cast<T>(net.config.lambda_l2);
  T penalty = T(0);
  if (lambda > T(0)) {
    for (size_t i = 0; i < net.conv_w.size(); ++i) {
      for (size_t j = 0; j < net.conv_w[i].numel(); ++j) {
        const T w = net.conv_w[i][j];
        penalty += w * w;
        grads.conv_w[i][j] += T(2) * lambda * w;
      }
    }
    for (size_t i = 0; i < net.dense_w.size(); ++i) {
      for (size_t j = 0; j < net.dense_w[i].numel(); ++j) {
        const T w = net.dense_w[i][j];
        penalty += w * w;
        grads.dense_w[i][j] += T(2) * lambda * w;
      }
    }
  }
  return data_loss + lambda * penalty;
}

template <class T>
void adam_step(NetworkT<T>& net, const Gradients<T>& grads) {
  const double beta1 = net.config.adam_beta1;
  const double beta2 = net.config.adam_beta2;
  const double eps = net.config.adam_epsilon;
  const double lr = net.config.learning_rate;

  net.adam.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(net.adam.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(net.adam.step));

  size_t slot = 0;
  auto update = [&](Tensor<T>& param, const Tensor<T>& grad) {
    Tensor<T>& m = net.adam.m[slot];
    Tensor<T>& v = net.adam.v[slot];
    if (!param.same_shape(grad)) {
      throw ConfigError("gradient shape does not match parameter " +
                        std::to_string(slot));
    }
    for (size_t i = 0; i < param.numel(); ++i) {
      const double g = static_cast<double>(grad[i]);
      const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
      const double vi =
          beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      param[i] = static_cast<T>(static_cast<double>(param[i]) -
                                lr * m_hat / (std::sqrt(v_hat) + eps));
    }
    ++slot;
  };

  for (size_t i = 0; i < net.conv_w.size(); ++i) {
    update(net.conv_w[i], grads.conv_w[i]);
    update(net.conv_b[i], grads.conv_b[i]);
  }
  for (size_t i = 0; i < net.dense_w.size(); ++i) {
    update(net.dense_w[i], grads.dense_w[i]);
    update(net.dense_b[i], grads.dense_b[i]);
  }
}

template struct NetworkT<float>;
template struct NetworkT<double>;
template NetworkT<float> init_network<float>(const NetworkConfig&, RngStream&);
template NetworkT<double> init_network<double>(const NetworkConfig&,
                                               RngStream&);
template float forward<float>(const NetworkT<float>&, const Tensor<float>&,
                              bool, RngStream*, ForwardTrace*);
template double forward<double>(const NetworkT<double>&, const Tensor<double>&,
                                bool, RngStream*, ForwardTrace*);
template float loss_and_gradients<float>(const NetworkT<float>&,
                                         const std::vector<LabeledGrid<float>>&,
                                         RngStream*, Gradients<float>&);
template double loss_and_gradients<double>(
    const NetworkT<double>&, const std::vector<LabeledGrid<double>>&,
    RngStream*, Gradients<double>&);
template void adam_step<float>(NetworkT<float>&, const Gradients<float>&);
template void adam_step<double>(NetworkT<double>&, const Gradients<double>&);

}  // namespace pafnucy
