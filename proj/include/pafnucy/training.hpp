#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pafnucy/dataset.hpp"
#include "pafnucy/network.hpp"
#include "pafnucy/voxelizer.hpp"

namespace pafnucy {

// Disjoint id lists naming the dataset subsets. Test lists are named
// (e.g. "core2016", "astex").
struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::map<std::string, std::vector<std::string>> tests;

  // Throws ConfigError when any id appears in two subsets.
  void validate_disjoint() const;
};

// One id per line; blank lines and '#' comments are skipped.
std::vector<std::string> read_id_list(const std::filesystem::path& path);

// Shuffles [0, n) and cuts it into groups of batch_size. A trailing
// remainder smaller than batch_size is merged into the last full batch, so
// with n = 11906 and batch 5 the final batch holds 6.
std::vector<std::vector<int>> make_batches(int n, int batch_size,
                                           RngStream& rng);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_rmse = 0.0;
  double val_rmse = 0.0;
};

struct TrainOptions {
  int epochs = 20;
  int batch_size = 5;
  GridParams grid{};
  // Optional early exit once the original-orientation training RMSE falls
  // below this value (used by capacity sanity checks).
  std::optional<double> stop_train_rmse;
};

struct TrainResult {
  Network best;
  int best_epoch = 0;  // 1-based
  std::vector<EpochStats> log;
};

// Epoch loop with rotation augmentation: each epoch the records are
// expanded to all 24 (record, rotation) pairs, shuffled jointly and cut
// into batches. Validation RMSE uses the original orientation only; the
// checkpoint with the lowest validation RMSE is returned.
TrainResult train(Network net, std::span<const DatasetRecord> train_records,
                  std::span<const DatasetRecord> val_records,
                  const TrainOptions& options, RngStream& rng);

// Original-orientation inference over a whole dataset. Validates that the
// checkpoint and dataset agree on the charge scaler.
std::vector<std::pair<std::string, double>> predict(
    const Network& net, const Dataset& dataset, const GridParams& params = {});

// Inference without the scaler cross-check (internal epoch metrics, tests).
std::vector<double> predict_records(const Network& net,
                                    std::span<const DatasetRecord> records,
                                    const GridParams& params = {});

struct MetricsReport {
  int n = 0;
  double rmse = 0.0;
  double mae = 0.0;
  struct Regression {
    double pearson_r = 0.0;
    double sd = 0.0;  // RMS residual about the fitted line, N-1 divisor
    double slope = 0.0;
    double intercept = 0.0;
  };
  // Absent when the predictions (or measurements) are constant and the
  // regression is degenerate; rmse/mae are still filled in.
  std::optional<Regression> regression;
};

// Four evaluation metrics for measured t against predicted y. The fitted
// line is t ~ slope * y + intercept.
MetricsReport metrics(std::span<const double> measured,
                      std::span<const double> predicted);

void write_epoch_log_csv(std::ostream& out, std::span<const EpochStats> log);

}  // namespace pafnucy
