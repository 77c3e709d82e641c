#include "pafnucy/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "pafnucy/errors.hpp"
#include "pafnucy/numfmt.hpp"

namespace pafnucy {
namespace {

constexpr int kRotationCount = 24;

TensorF grid_to_tensor(Grid&& g) {
  TensorF t;
  t.shape = {g.shape[0], g.shape[1], g.shape[2], g.shape[3]};
  t.values = std::move(g.data);
  return t;
}

double rmse_against_labels(const Network& net,
                           std::span<const DatasetRecord> records,
                           const GridParams& params) {
  double sq = 0.0;
  for (const DatasetRecord& r : records) {
    if (!r.affinity) {
      throw DomainError("record " + r.id + " has no affinity label");
    }
    const auto center = ligand_centroid(r.atoms);
    const TensorF grid = grid_to_tensor(voxelize(r.atoms, center, params));
    const double pred = forward(net, grid, false, nullptr);
    const double err = pred - *r.affinity;
    sq += err * err;
  }
  return std::sqrt(sq / static_cast<double>(records.size()));
}

}  // namespace

void SplitManifest::validate_disjoint() const {
  std::unordered_map<std::string, std::string> owner;
  auto claim = [&](const std::vector<std::string>& ids,
                   const std::string& subset) {
    for (const std::string& id : ids) {
      auto [it, inserted] = owner.insert({id, subset});
      if (!inserted) {
        throw ConfigError("id " + id + " appears in both " + it->second +
                          " and " + subset);
      }
    }
  };
  claim(train, "train");
  claim(validation, "validation");
  for (const auto& [name, ids] : tests) claim(ids, name);
}

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open id list " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    std::string id = line.substr(begin, end - begin + 1);
    if (id.empty() || id[0] == '#') continue;
    ids.push_back(std::move(id));
  }
  return ids;
}

std::vector<std::vector<int>> make_batches(int n, int batch_size,
                                           RngStream& rng) {
  if (n < 1) throw DomainError("make_batches needs at least one record");
  if (batch_size < 1) throw DomainError("batch size must be positive");

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());

  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  // A short remainder joins the previous full batch instead of standing
  // alone (11906 -> 2380 batches of 5 plus one of 6).
  if (batches.size() > 1 &&
      static_cast<int>(batches.back().size()) < batch_size) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    auto& last = batches.back();
    last.insert(last.end(), tail.begin(), tail.end());
  }
  return batches;
}

TrainResult train(Network net, std::span<const DatasetRecord> train_records,
                  std::span<const DatasetRecord> val_records,
                  const TrainOptions& options, RngStream& rng) {
  if (train_records.empty() || val_records.empty()) {
    throw DomainError("training needs non-empty train and validation sets");
  }
  if (options.epochs < 1) throw DomainError("epoch count must be positive");
  for (const DatasetRecord& r : train_records) {
    if (!r.affinity) {
      throw DomainError("training record " + r.id + " has no affinity label");
    }
  }

  const auto& rotations = cube_rotations();
  std::vector<std::array<double, 3>> centers;
  centers.reserve(train_records.size());
  for (const DatasetRecord& r : train_records) {
    centers.push_back(ligand_centroid(r.atoms));
  }

  TrainResult result;
  result.best = net;
  double best_val = std::numeric_limits<double>::infinity();

  const int n_pairs = static_cast<int>(train_records.size()) * kRotationCount;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto batches = make_batches(n_pairs, options.batch_size, rng);
    for (const auto& batch : batches) {
      std::vector<TensorF> grids;
      grids.reserve(batch.size());
      for (int flat : batch) {
        const int rec = flat / kRotationCount;
        const int rot = flat % kRotationCount;
        const auto& record = train_records[static_cast<size_t>(rec)];
        const auto rotated =
            rotate_atoms(record.atoms, centers[static_cast<size_t>(rec)], rotations[static_cast<size_t>(rot)]);
        grids.push_back(grid_to_tensor(
            voxelize(rotated, centers[static_cast<size_t>(rec)], options.grid)));
      }
      std::vector<LabeledGrid<float>> labeled;
      labeled.reserve(batch.size());
      for (size_t i = 0; i < batch.size(); ++i) {
        const int rec = batch[i] / kRotationCount;
        labeled.push_back({&grids[i], *train_records[static_cast<size_t>(rec)].affinity});
      }
      Gradients<float> grads;
      loss_and_gradients(net, labeled, &rng, grads);
      adam_step(net, grads);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_rmse = rmse_against_labels(net, train_records, options.grid);
    stats.val_rmse = rmse_against_labels(net, val_records, options.grid);
    result.log.push_back(stats);

    if (stats.val_rmse < best_val) {
      best_val = stats.val_rmse;
      result.best = net;
      result.best_epoch = epoch;
    }
    if (options.stop_train_rmse && stats.train_rmse < *options.stop_train_rmse) {
      break;
    }
  }
  return result;
}

std::vector<double> predict_records(const Network& net,
                                    std::span<const DatasetRecord> records,
                                    const GridParams& params) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const DatasetRecord& r : records) {
    const auto center = ligand_centroid(r.atoms);
    const TensorF grid = grid_to_tensor(voxelize(r.atoms, center, params));
    out.push_back(forward(net, grid, false, nullptr));
  }
  return out;
}

std::vector<std::pair<std::string, double>> predict(const Network& net,
                                                    const Dataset& dataset,
                                                    const GridParams& params) {
  if (std::abs(net.charge_scaler_std - dataset.charge_scaler_std) > 1e-12) {
    throw ConfigError(
        "charge scaler mismatch: checkpoint " +
        format_double(net.charge_scaler_std) + " vs dataset " +
        format_double(dataset.charge_scaler_std) +
        "; the dataset was prepared with a different scaler");
  }
  const auto values = predict_records(net, dataset.records, params);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    out.push_back({dataset.records[i].id, values[i]});
  }
  return out;
}

MetricsReport metrics(std::span<const double> measured,
                      std::span<const double> predicted) {
  if (measured.size() != predicted.size()) {
    throw DomainError("measured and predicted lengths differ");
  }
  const size_t n = measured.size();
  if (n < 3) throw DomainError("metrics need at least 3 points");

  MetricsReport report;
  report.n = static_cast<int>(n);

  double sq = 0.0;
  double abs_sum = 0.0;
  double t_mean = 0.0;
  double y_mean = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double err = predicted[i] - measured[i];
    sq += err * err;
    abs_sum += std::abs(err);
    t_mean += measured[i];
    y_mean += predicted[i];
  }
  report.rmse = std::sqrt(sq / static_cast<double>(n));
  report.mae = abs_sum / static_cast<double>(n);
  t_mean /= static_cast<double>(n);
  y_mean /= static_cast<double>(n);

  double s_tt = 0.0, s_yy = 0.0, s_ty = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dt = measured[i] - t_mean;
    const double dy = predicted[i] - y_mean;
    s_tt += dt * dt;
    s_yy += dy * dy;
    s_ty += dt * dy;
  }
  if (s_yy <= 0.0 || s_tt <= 0.0) {
    return report;  // degenerate regression; error values still stand
  }

  MetricsReport::Regression reg;
  reg.slope = s_ty / s_yy;
  reg.intercept = t_mean - reg.slope * y_mean;
  reg.pearson_r = s_ty / std::sqrt(s_tt * s_yy);
  double residual_sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double resid = measured[i] - (reg.slope * predicted[i] + reg.intercept);
    residual_sq += resid * resid;
  }
  reg.sd = std::sqrt(residual_sq / static_cast<double>(n - 1));
  report.regression = reg;
  return report;
}

void write_epoch_log_csv(std::ostream& out, std::span<const EpochStats> log) {
  out << "epoch,train_rmse,val_rmse\n";
  for (const EpochStats& e : log) {
    out << e.epoch << "," << format_double(e.train_rmse) << ","
        << format_double(e.val_rmse) << "\n";
  }
}

}  // namespace pafnucy
