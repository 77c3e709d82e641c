#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pafnucy/checkpoint.hpp"
#include "pafnucy/errors.hpp"
#include "pafnucy/network.hpp"
#include "support.hpp"

using namespace pafnucy;
namespace fs = std::filesystem;

namespace {

// Small all-double config for oracle work.
NetworkConfig tiny_config() {
  NetworkConfig c;
  c.input_shape = {4, 4, 4, 3};
  c.conv_filters = {2, 2, 2};
  c.dense_sizes = {5, 4, 3};
  c.conv_kernel = 5;
  c.pool_size = 2;
  c.dropout_keep = 0.5;
  c.lambda_l2 = 0.001;
  c.learning_rate = 1e-3;
  return c;
}

template <class T>
Tensor<T> random_tensor(std::vector<int> shape, RngStream& rng,
                        double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  for (T& v : t.values) {
    v = static_cast<T>((rng.uniform() * 2.0 - 1.0) * scale);
  }
  return t;
}

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("trunc_normal respects the 2-sigma bound and the seed") {
  RngStream rng(2024);
  const auto t = trunc_normal<double>({1000000}, 0.0, 0.001, rng);
  double sum = 0.0;
  for (double v : t.values) {
    CHECK(std::abs(v) <= 0.002);
    sum += v;
  }
  // mean within 3 standard errors (truncated-normal std is ~0.88 sigma)
  const double se = 0.001 / std::sqrt(1e6);
  CHECK(std::abs(sum / 1e6) < 3.0 * se);

  RngStream rng_a(7);
  RngStream rng_b(7);
  const auto a = trunc_normal<double>({64}, 0.0, 0.5, rng_a);
  const auto b = trunc_normal<double>({64}, 0.0, 0.5, rng_b);
  CHECK(a.values == b.values);
}

TEST_CASE("network initialization constants") {
  RngStream rng(5);
  const auto net = init_network<float>(tiny_config(), rng);
  for (const auto& b : net.conv_b) {
    for (float v : b.values) CHECK(v == 0.1f);
  }
  for (const auto& b : net.dense_b) {
    for (float v : b.values) CHECK(v == 1.0f);
  }
  for (const auto& w : net.conv_w) {
    for (float v : w.values) CHECK(std::abs(v) <= 0.002f);
  }
  // dense weights bounded by 2/sqrt(n_in)
  for (size_t i = 0; i < net.dense_w.size(); ++i) {
    const double bound = 2.0 / std::sqrt(net.dense_w[i].shape[0]);
    for (float v : net.dense_w[i].values) {
      CHECK(std::abs(v) <= bound + 1e-7);
    }
  }
  // Adam moments start at zero
  for (const auto& m : net.adam.m) {
    for (float v : m.values) CHECK(v == 0.0f);
  }
  CHECK(net.adam.step == 0);
}

TEST_CASE("first dense fan-in matches the flatten arithmetic") {
  NetworkConfig standard;  // production defaults
  CHECK(standard.flatten_size() == 6912);
  RngStream rng(3);
  // empirical std of the first dense weights ~ 1/sqrt(6912)
  const auto w = trunc_normal<double>({6912 * 4}, 0.0,
                                      1.0 / std::sqrt(6912.0), rng);
  double var = 0.0;
  for (double v : w.values) var += v * v;
  var /= static_cast<double>(w.numel());
  const double expected = 1.0 / std::sqrt(6912.0);  // 0.012028...
  CHECK(expected == doctest::Approx(0.0120281).epsilon(1e-4));
  // truncation shrinks the std to ~0.88 sigma
  CHECK(std::sqrt(var) == doctest::Approx(0.88 * expected).epsilon(0.03));
}

TEST_CASE("conv3d: zeros give bias, delta kernel gives identity") {
  Tensor<double> zero({3, 3, 3, 2});
  Tensor<double> w({5, 5, 5, 2, 4});
  RngStream rng(1);
  w = random_tensor<double>({5, 5, 5, 2, 4}, rng);
  Tensor<double> b({4});
  b.values = {0.5, -1.0, 2.0, 0.25};
  const auto out = conv3d_forward(zero, w, b);
  for (int i = 0; i < 27; ++i) {
    for (int c = 0; c < 4; ++c) {
      CHECK(out.values[static_cast<size_t>(i * 4 + c)] == b.values[static_cast<size_t>(c)]);
    }
  }

  // 1x1x1 input with only the center tap set
  Tensor<double> one({1, 1, 1, 1});
  one.values = {3.25};
  Tensor<double> delta({5, 5, 5, 1, 1});
  delta.values[Tensor<double>::numel_of({5, 5, 5, 1, 1}) / 2] = 1.0;
  Tensor<double> zb({1});
  const auto echo = conv3d_forward(one, delta, zb);
  CHECK(echo.values[0] == 3.25);
}

TEST_CASE("conv3d matches the naive reference on random instances") {
  RngStream rng(404);
  for (int round = 0; round < 25; ++round) {
    const int d = 1 + static_cast<int>(rng.uniform_below(6));
    const int cin = 1 + static_cast<int>(rng.uniform_below(4));
    const int cout = 1 + static_cast<int>(rng.uniform_below(4));
    const int k = rng.uniform_below(2) ? 3 : 5;
    const auto input = random_tensor<double>({d, d, d, cin}, rng);
    const auto w = random_tensor<double>({k, k, k, cin, cout}, rng);
    const auto b = random_tensor<double>({cout}, rng);
    const auto got = conv3d_forward(input, w, b);
    const auto expected = testsupport::conv3d_reference(input, w, b);
    REQUIRE(got.shape == expected.shape);
    for (size_t i = 0; i < got.numel(); ++i) {
      CHECK(std::abs(got[i] - expected[i]) < 1e-10);
    }
  }
}

TEST_CASE("conv3d rejects channel mismatches") {
  Tensor<double> input({3, 3, 3, 2});
  Tensor<double> w({3, 3, 3, 5, 4});
  Tensor<double> b({4});
  CHECK_THROWS_AS(conv3d_forward(input, w, b), ConfigError);
}

TEST_CASE("maxpool: shapes, constants and argmax routing") {
  // constant input stays constant
  Tensor<double> c({4, 4, 4, 2});
  for (auto& v : c.values) v = 0.7;
  const auto pooled = maxpool3d_forward(c, 2);
  CHECK(pooled.output.shape == std::vector<int>{2, 2, 2, 2});
  for (double v : pooled.output.values) CHECK(v == 0.7);

  // 21 -> 11 with ceil mode
  Tensor<double> odd({21, 21, 21, 1});
  CHECK(maxpool3d_forward(odd, 2).output.shape ==
        std::vector<int>{11, 11, 11, 1});

  // backward: every gradient lands on exactly one recorded argmax
  RngStream rng(88);
  const auto input = random_tensor<double>({5, 5, 5, 3}, rng);
  const auto result = maxpool3d_forward(input, 2);
  auto grad_out = random_tensor<double>(result.output.shape, rng);
  const auto grad_in = maxpool3d_backward(grad_out, result.argmax, input.shape);
  double in_sum = 0.0, out_sum = 0.0;
  int nonzero = 0;
  for (double v : grad_in.values) {
    in_sum += v;
    if (v != 0.0) ++nonzero;
  }
  for (double v : grad_out.values) out_sum += v;
  CHECK(in_sum == doctest::Approx(out_sum).epsilon(1e-12));
  CHECK(nonzero <= static_cast<int>(grad_out.numel()));
}

TEST_CASE("relu and dropout basics") {
  Tensor<double> t({4});
  t.values = {-3.5, 2.0, 0.0, -0.0};
  relu_inplace(t);
  CHECK(t.values == std::vector<double>{0.0, 2.0, 0.0, 0.0});

  // keep_prob 1 is the identity and consumes no randomness
  Tensor<double> u({3});
  u.values = {1.0, -2.0, 3.0};
  RngStream rng(1);
  const uint64_t before = rng.next_u64();
  RngStream rng2(1);
  dropout_forward_inplace(u, 1.0, true, &rng2, nullptr);
  CHECK(u.values == std::vector<double>{1.0, -2.0, 3.0});
  CHECK(rng2.next_u64() == before);

  // inference mode is the identity at any keep probability
  Tensor<double> v({2});
  v.values = {5.0, -5.0};
  dropout_forward_inplace(v, 0.5, false, nullptr, nullptr);
  CHECK(v.values == std::vector<double>{5.0, -5.0});
}

TEST_CASE("inverted dropout is unbiased in expectation") {
  RngStream rng(31337);
  const double keep = 0.5;
  const int trials = 100000;
  Tensor<double> x({4});
  x.values = {1.0, -2.0, 0.5, 3.0};
  std::vector<double> mean(4, 0.0);
  for (int i = 0; i < trials; ++i) {
    Tensor<double> y = x;
    dropout_forward_inplace(y, keep, true, &rng, nullptr);
    for (int j = 0; j < 4; ++j) mean[static_cast<size_t>(j)] += y.values[static_cast<size_t>(j)];
  }
  for (int j = 0; j < 4; ++j) {
    mean[static_cast<size_t>(j)] /= trials;
    CHECK(std::abs(mean[static_cast<size_t>(j)] - x.values[static_cast<size_t>(j)]) <
          0.01 * std::abs(x.values[static_cast<size_t>(j)]) + 0.01);
  }
}

TEST_CASE("forward: zeroed weights propagate only the biases") {
  RngStream rng(9);
  auto net = init_network<double>(tiny_config(), rng);
  for (auto& w : net.conv_w) {
    for (auto& v : w.values) v = 0.0;
  }
  for (auto& w : net.dense_w) {
    for (auto& v : w.values) v = 0.0;
  }
  Tensor<double> zero_grid({4, 4, 4, 3});
  // conv outputs are all 0.1, dense outputs all 1.0, head bias 1.0
  const double pred = forward(net, zero_grid, false, nullptr);
  CHECK(pred == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inference forward is bit-deterministic") {
  RngStream rng(42);
  const auto net = init_network<float>(tiny_config(), rng);
  RngStream data_rng(43);
  const auto grid = random_tensor<float>({4, 4, 4, 3}, data_rng);
  const float a = forward(net, grid, false, nullptr);
  const float b = forward(net, grid, false, nullptr);
  CHECK(a == b);
}

TEST_CASE("forward trace reports the full shape chain") {
  RngStream rng(2);
  const auto net = init_network<float>(tiny_config(), rng);
  RngStream data_rng(3);
  const auto grid = random_tensor<float>({4, 4, 4, 3}, data_rng);
  ForwardTrace trace;
  forward(net, grid, false, nullptr, &trace);
  const auto expected = net.config.layer_shapes();
  REQUIRE(trace.size() == expected.size());
  for (size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace[i].name == expected[i].name);
    CHECK(trace[i].dims == expected[i].dims);
  }
}

TEST_CASE("loss: perfect predictions and zero weights give zero loss") {
  RngStream rng(10);
  auto net = init_network<double>(tiny_config(), rng);
  for (auto& w : net.conv_w) {
    for (auto& v : w.values) v = 0.0;
  }
  for (auto& w : net.dense_w) {
    for (auto& v : w.values) v = 0.0;
  }
  Tensor<double> grid({4, 4, 4, 3});
  // zeroed weights predict exactly 1.0; label 1.0 and no weight norm -> 0
  std::vector<LabeledGrid<double>> batch{{&grid, 1.0}};
  Gradients<double> grads;
  RngStream step_rng(1);
  const double loss = loss_and_gradients(net, batch, &step_rng, grads);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("output-bias gradient equals the MSE derivative") {
  RngStream rng(11);
  auto net = init_network<double>(tiny_config(), rng);
  net.config.dropout_keep = 1.0;
  net.config.lambda_l2 = 0.0;
  RngStream data_rng(12);
  const auto grid = random_tensor<double>({4, 4, 4, 3}, data_rng, 0.5);
  const double label = 4.0;
  const double pred = forward(net, grid, false, nullptr);

  std::vector<LabeledGrid<double>> batch{{&grid, label}};
  Gradients<double> grads;
  const double loss = loss_and_gradients(net, batch, nullptr, grads);
  CHECK(loss == doctest::Approx((pred - label) * (pred - label)));
  CHECK(grads.dense_b.back()[0] == doctest::Approx(2.0 * (pred - label)));
}

TEST_CASE("L2 shifts weight gradients by exactly 2 lambda w") {
  RngStream rng(13);
  auto net = init_network<double>(tiny_config(), rng);
  net.config.dropout_keep = 1.0;
  RngStream data_rng(14);
  const auto grid = random_tensor<double>({4, 4, 4, 3}, data_rng, 0.5);
  std::vector<LabeledGrid<double>> batch{{&grid, 2.0}};

  net.config.lambda_l2 = 0.0;
  Gradients<double> without;
  loss_and_gradients(net, batch, nullptr, without);

  net.config.lambda_l2 = 0.01;
  Gradients<double> with;
  loss_and_gradients(net, batch, nullptr, with);

  const auto& w = net.conv_w[0];
  for (size_t i = 0; i < 20; ++i) {
    const double expected = without.conv_w[0][i] + 2.0 * 0.01 * w[i];
    CHECK(with.conv_w[0][i] == doctest::Approx(expected).epsilon(1e-10));
  }
  // biases are exempt from the penalty
  for (size_t i = 0; i < with.conv_b[0].numel(); ++i) {
    CHECK(with.conv_b[0][i] == doctest::Approx(without.conv_b[0][i]));
  }
}

TEST_CASE("analytic gradients match finite differences per layer and composite") {
  NetworkConfig config = tiny_config();
  RngStream rng(20240818);
  auto net = init_network<double>(config, rng);
  testsupport::randomize_parameters(net, 31);
  RngStream data_rng(5150);
  const auto grid_a = random_tensor<double>({4, 4, 4, 3}, data_rng, 0.8);
  const auto grid_b = random_tensor<double>({4, 4, 4, 3}, data_rng, 0.8);
  std::vector<LabeledGrid<double>> batch{{&grid_a, 3.0}, {&grid_b, 7.5}};

  SUBCASE("with dropout active (masks replayed by reseeding)") {
    const double err = testsupport::gradient_check(net, batch, 777, 1e-3);
    CHECK(err < 1e-4);
  }
  SUBCASE("without dropout") {
    net.config.dropout_keep = 1.0;
    const double err = testsupport::gradient_check(net, batch, 777, 1e-3);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("adam: zero gradients leave a fresh network unchanged") {
  RngStream rng(60);
  auto net = init_network<float>(tiny_config(), rng);
  const auto before = net.conv_w[0].values;
  Gradients<float> grads;
  // zero-filled gradients of the right shapes
  for (const auto& t : net.conv_w) grads.conv_w.push_back(TensorF(t.shape));
  for (const auto& t : net.conv_b) grads.conv_b.push_back(TensorF(t.shape));
  for (const auto& t : net.dense_w) grads.dense_w.push_back(TensorF(t.shape));
  for (const auto& t : net.dense_b) grads.dense_b.push_back(TensorF(t.shape));
  adam_step(net, grads);
  CHECK(net.adam.step == 1);
  CHECK(net.conv_w[0].values == before);
}

TEST_CASE("adam: first step moves each parameter by ~lr in the -sign(g) direction") {
  RngStream rng(61);
  auto net = init_network<double>(tiny_config(), rng);
  const double lr = net.config.learning_rate;
  Gradients<double> grads;
  for (const auto& t : net.conv_w) grads.conv_w.push_back(TensorD(t.shape));
  for (const auto& t : net.conv_b) grads.conv_b.push_back(TensorD(t.shape));
  for (const auto& t : net.dense_w) grads.dense_w.push_back(TensorD(t.shape));
  for (const auto& t : net.dense_b) grads.dense_b.push_back(TensorD(t.shape));
  for (auto& g : grads.conv_w[0].values) g = 0.25;  // uniform gradient
  const auto before = net.conv_w[0].values;
  adam_step(net, grads);
  for (size_t i = 0; i < before.size(); ++i) {
    const double delta = net.conv_w[0][i] - before[i];
    CHECK(delta == doctest::Approx(-lr).epsilon(1e-6));
  }
}

TEST_CASE("results do not depend on the worker-thread partition") {
  // instances large enough for the kernels to actually split the work
  RngStream rng(312);
  const auto input = random_tensor<float>({12, 12, 12, 4}, rng);
  const auto w = random_tensor<float>({5, 5, 5, 4, 8}, rng);
  const auto b = random_tensor<float>({8}, rng);
  const auto x = random_tensor<float>({512}, rng);
  const auto dw = random_tensor<float>({512, 256}, rng);
  const auto db = random_tensor<float>({256}, rng);

  set_max_threads(1);
  const auto conv_single = conv3d_forward(input, w, b);
  const auto dense_single = dense_forward(x, dw, db);
  Tensor<float> gi1, gw1, gb1;
  conv3d_backward(input, w, conv_single, gi1, gw1, gb1);

  set_max_threads(8);
  const auto conv_many = conv3d_forward(input, w, b);
  const auto dense_many = dense_forward(x, dw, db);
  Tensor<float> gi2, gw2, gb2;
  conv3d_backward(input, w, conv_many, gi2, gw2, gb2);
  set_max_threads(0);

  CHECK(conv_single.values == conv_many.values);
  CHECK(dense_single.values == dense_many.values);
  CHECK(gi1.values == gi2.values);
  CHECK(gw1.values == gw2.values);
  CHECK(gb1.values == gb2.values);
}

TEST_CASE("adam runs are reproducible given the seed") {
  auto run = [](uint64_t seed) {
    RngStream rng(seed);
    auto net = init_network<float>(tiny_config(), rng);
    RngStream data_rng(seed + 1);
    const auto grid = random_tensor<float>({4, 4, 4, 3}, data_rng, 0.5);
    std::vector<LabeledGrid<float>> batch{{&grid, 5.0}};
    for (int step = 0; step < 5; ++step) {
      Gradients<float> grads;
      loss_and_gradients(net, batch, &rng, grads);
      adam_step(net, grads);
    }
    return net.dense_w.back().values;
  };
  CHECK(run(99) == run(99));
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  RngStream rng(70);
  auto net = init_network<float>(tiny_config(), rng);
  net.charge_scaler_std = 0.31415;
  net.adam.step = 17;
  for (auto& m : net.adam.m) {
    for (auto& v : m.values) v = 0.125f;
  }

  const auto path = temp_file("pafnucy_test_ckpt.bin");
  save_checkpoint(net, path);
  const Network loaded = load_checkpoint(path);

  CHECK(loaded.config == net.config);
  CHECK(loaded.charge_scaler_std == net.charge_scaler_std);
  CHECK(loaded.adam.step == 17);
  for (size_t i = 0; i < net.conv_w.size(); ++i) {
    CHECK(loaded.conv_w[i].values == net.conv_w[i].values);
    CHECK(loaded.conv_b[i].values == net.conv_b[i].values);
  }
  for (size_t i = 0; i < net.dense_w.size(); ++i) {
    CHECK(loaded.dense_w[i].values == net.dense_w[i].values);
    CHECK(loaded.dense_b[i].values == net.dense_b[i].values);
  }
  for (size_t i = 0; i < net.adam.m.size(); ++i) {
    CHECK(loaded.adam.m[i].values == net.adam.m[i].values);
  }
  fs::remove(path);
}

TEST_CASE("truncated checkpoints fail without a partial network") {
  RngStream rng(71);
  auto net = init_network<float>(tiny_config(), rng);
  const auto path = temp_file("pafnucy_test_trunc.bin");
  save_checkpoint(net, path);

  const auto full_size = fs::file_size(path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes(static_cast<size_t>(full_size), '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(full_size));
  in.close();

  for (size_t cut : {size_t(3), size_t(10), full_size / 2, full_size - 5}) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(cut));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }

  // corrupt magic
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  std::string bad = bytes;
  bad[0] = 'X';
  out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  fs::remove(path);
}

TEST_CASE("checkpoint shape mismatches name the offending layer") {
  RngStream rng(72);
  auto net = init_network<float>(tiny_config(), rng);
  const auto path = temp_file("pafnucy_test_shape.bin");
  save_checkpoint(net, path, false);

  // grow conv2's filter count in the config block only: tensor shapes
  // on disk no longer match what the config implies
  std::fstream file(path,
                    std::ios::binary | std::ios::in | std::ios::out);
  // layout: magic(4) version(4) input_shape(16) n_conv(4) conv1(4) conv2(4)...
  file.seekp(4 + 4 + 16 + 4 + 4);
  const uint32_t bigger = 9;
  file.write(reinterpret_cast<const char*>(&bigger), 4);
  file.close();

  try {
    load_checkpoint(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("conv2") != std::string::npos);
  }
  fs::remove(path);
}
