#include "pafnucy/checkpoint.hpp"

#include <fstream>
#include <vector>

#include "pafnucy/binio.hpp"

namespace pafnucy {
namespace {

constexpr char kMagic[4] = {'P', 'F', 'N', 'C'};
constexpr uint32_t kVersion = 1;

void write_config(std::ostream& out, const NetworkConfig& c) {
  for (int d : c.input_shape) write_le<uint32_t>(out, static_cast<uint32_t>(d));
  write_le<uint32_t>(out, static_cast<uint32_t>(c.conv_filters.size()));
  for (int f : c.conv_filters) write_le<uint32_t>(out, static_cast<uint32_t>(f));
  write_le<uint32_t>(out, static_cast<uint32_t>(c.conv_kernel));
  write_le<uint32_t>(out, static_cast<uint32_t>(c.pool_size));
  write_le<uint32_t>(out, static_cast<uint32_t>(c.dense_sizes.size()));
  for (int s : c.dense_sizes) write_le<uint32_t>(out, static_cast<uint32_t>(s));
  write_le<double>(out, c.dropout_keep);
  write_le<double>(out, c.lambda_l2);
  write_le<double>(out, c.learning_rate);
  write_le<double>(out, c.adam_beta1);
  write_le<double>(out, c.adam_beta2);
  write_le<double>(out, c.adam_epsilon);
}

NetworkConfig read_config(std::istream& in) {
  NetworkConfig c;
  for (int& d : c.input_shape) {
    d = static_cast<int>(read_le<uint32_t>(in, "config input shape"));
  }
  const uint32_t n_conv = read_le<uint32_t>(in, "config conv count");
  if (n_conv == 0 || n_conv > 64) throw IoError("implausible conv layer count");
  c.conv_filters.resize(n_conv);
  for (auto& f : c.conv_filters) {
    f = static_cast<int>(read_le<uint32_t>(in, "config conv filters"));
  }
  c.conv_kernel = static_cast<int>(read_le<uint32_t>(in, "config kernel"));
  c.pool_size = static_cast<int>(read_le<uint32_t>(in, "config pool size"));
  const uint32_t n_dense = read_le<uint32_t>(in, "config dense count");
  if (n_dense == 0 || n_dense > 64) throw IoError("implausible dense layer count");
  c.dense_sizes.resize(n_dense);
  for (auto& s : c.dense_sizes) {
    s = static_cast<int>(read_le<uint32_t>(in, "config dense sizes"));
  }
  c.dropout_keep = read_le<double>(in, "config dropout");
  c.lambda_l2 = read_le<double>(in, "config lambda");
  c.learning_rate = read_le<double>(in, "config learning rate");
  c.adam_beta1 = read_le<double>(in, "config adam beta1");
  c.adam_beta2 = read_le<double>(in, "config adam beta2");
  c.adam_epsilon = read_le<double>(in, "config adam epsilon");
  return c;
}

void write_tensor(std::ostream& out, const TensorF& t) {
  write_le<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
  for (int d : t.shape) write_le<uint32_t>(out, static_cast<uint32_t>(d));
  for (float v : t.values) write_le<float>(out, v);
}

// Expected parameter shapes in checkpoint order, with layer names for
// error messages.
std::vector<std::pair<std::string, std::vector<int>>> expected_shapes(
    const NetworkConfig& c) {
  std::vector<std::pair<std::string, std::vector<int>>> shapes;
  const int K = c.conv_kernel;
  int cin = c.input_shape[3];
  for (size_t i = 0; i < c.conv_filters.size(); ++i) {
    const int cout = c.conv_filters[i];
    const std::string layer = "conv" + std::to_string(i + 1);
    shapes.push_back({layer + " weights", {K, K, K, cin, cout}});
    shapes.push_back({layer + " bias", {cout}});
    cin = cout;
  }
  int n_in = c.flatten_size();
  std::vector<int> dense_out = c.dense_sizes;
  dense_out.push_back(1);
  for (size_t i = 0; i < dense_out.size(); ++i) {
    const std::string layer = i + 1 == dense_out.size()
                                  ? std::string("output head")
                                  : "dense" + std::to_string(i + 1);
    shapes.push_back({layer + " weights", {n_in, dense_out[i]}});
    shapes.push_back({layer + " bias", {dense_out[i]}});
    n_in = dense_out[i];
  }
  return shapes;
}

TensorF read_tensor(std::istream& in, const std::string& layer,
                    const std::vector<int>& expected) {
  const uint32_t ndim = read_le<uint32_t>(in, "tensor rank");
  if (ndim == 0 || ndim > 8) throw IoError("implausible tensor rank");
  std::vector<int> shape(ndim);
  for (auto& d : shape) {
    d = static_cast<int>(read_le<uint32_t>(in, "tensor shape"));
  }
  if (shape != expected) {
    throw ConfigError("checkpoint shape mismatch for " + layer);
  }
  TensorF t;
  t.shape = shape;
  t.values.resize(TensorF::numel_of(shape));
  for (float& v : t.values) v = read_le<float>(in, "tensor values");
  return t;
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path,
                     bool include_adam) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  write_bytes(out, kMagic, sizeof(kMagic));
  write_le<uint32_t>(out, kVersion);
  write_config(out, net.config);
  write_le<double>(out, net.charge_scaler_std);

  uint32_t n_tensors = 0;
  net.for_each_parameter([&](const TensorF&, bool) { ++n_tensors; });
  write_le<uint32_t>(out, n_tensors);
  net.for_each_parameter(
      [&](const TensorF& t, bool) { write_tensor(out, t); });

  const bool has_adam =
      include_adam && net.adam.m.size() == static_cast<size_t>(n_tensors);
  write_le<uint8_t>(out, has_adam ? 1 : 0);
  if (has_adam) {
    write_le<uint64_t>(out, static_cast<uint64_t>(net.adam.step));
    for (const auto& t : net.adam.m) {
      for (float v : t.values) write_le<float>(out, v);
    }
    for (const auto& t : net.adam.v) {
      for (float v : t.values) write_le<float>(out, v);
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing checkpoint to " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  char magic[4];
  read_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file (bad magic): " + path.string());
  }
  const uint32_t version = read_le<uint32_t>(in, "version");
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }

  Network net;
  net.config = read_config(in);
  net.config.validate();
  net.charge_scaler_std = read_le<double>(in, "charge scaler");

  const auto shapes = expected_shapes(net.config);
  const uint32_t n_tensors = read_le<uint32_t>(in, "tensor count");
  if (n_tensors != shapes.size()) {
    throw ConfigError("checkpoint has " + std::to_string(n_tensors) +
                      " tensors, config implies " +
                      std::to_string(shapes.size()));
  }

  std::vector<TensorF> tensors;
  tensors.reserve(n_tensors);
  for (const auto& [layer, shape] : shapes) {
    tensors.push_back(read_tensor(in, layer, shape));
  }
  size_t slot = 0;
  const size_t n_conv = net.config.conv_filters.size();
  for (size_t i = 0; i < n_conv; ++i) {
    net.conv_w.push_back(std::move(tensors[slot++]));
    net.conv_b.push_back(std::move(tensors[slot++]));
  }
  const size_t n_dense = net.config.dense_sizes.size() + 1;
  for (size_t i = 0; i < n_dense; ++i) {
    net.dense_w.push_back(std::move(tensors[slot++]));
    net.dense_b.push_back(std::move(tensors[slot++]));
  }

  const uint8_t has_adam = read_le<uint8_t>(in, "adam flag");
  if (has_adam) {
    net.adam.step = static_cast<int64_t>(read_le<uint64_t>(in, "adam step"));
    for (const auto& [layer, shape] : shapes) {
      TensorF t;
      t.shape = shape;
      t.values.resize(TensorF::numel_of(shape));
      for (float& v : t.values) v = read_le<float>(in, "adam m");
      net.adam.m.push_back(std::move(t));
    }
    for (const auto& [layer, shape] : shapes) {
      TensorF t;
      t.shape = shape;
      t.values.resize(TensorF::numel_of(shape));
      for (float& v : t.values) v = read_le<float>(in, "adam v");
      net.adam.v.push_back(std::move(t));
    }
  } else {
    for (const auto& [layer, shape] : shapes) {
      net.adam.m.push_back(TensorF(shape));
      net.adam.v.push_back(TensorF(shape));
    }
    net.adam.step = 0;
  }
  return net;
}

double read_checkpoint_scaler_std(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  read_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file (bad magic): " + path.string());
  }
  const uint32_t version = read_le<uint32_t>(in, "version");
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  read_config(in);
  return read_le<double>(in, "charge scaler");
}

}  // namespace pafnucy
