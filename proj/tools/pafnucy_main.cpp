// pafnucy command-line interface: prepare, train, predict, analyze.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pafnucy/analysis.hpp"
#include "pafnucy/checkpoint.hpp"
#include "pafnucy/dataset.hpp"
#include "pafnucy/errors.hpp"
#include "pafnucy/network.hpp"
#include "pafnucy/numfmt.hpp"
#include "pafnucy/parallel.hpp"
#include "pafnucy/prepare.hpp"
#include "pafnucy/training.hpp"

namespace fs = std::filesystem;
using namespace pafnucy;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

// Reads the charge-scaler std from either a dataset or a checkpoint,
// sniffing the magic.
double scaler_std_from_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scaler source " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  in.close();
  if (std::string_view(magic, 4) == "PFDS") {
    return read_dataset(path).charge_scaler_std;
  }
  if (std::string_view(magic, 4) == "PFNC") {
    return read_checkpoint_scaler_std(path);
  }
  throw IoError("scaler source " + path.string() +
                " is neither a dataset nor a checkpoint");
}

void print_metrics(const MetricsReport& report) {
  std::cout << "N " << report.n << "\n";
  std::cout << "RMSE " << format_double(report.rmse) << "\n";
  std::cout << "MAE " << format_double(report.mae) << "\n";
  if (report.regression) {
    std::cout << "SD " << format_double(report.regression->sd) << "\n";
    std::cout << "R " << format_double(report.regression->pearson_r) << "\n";
    std::cout << "slope " << format_double(report.regression->slope) << "\n";
    std::cout << "intercept " << format_double(report.regression->intercept)
              << "\n";
  } else {
    std::cout << "SD n/a (degenerate regression)\n";
    std::cout << "R n/a (degenerate regression)\n";
  }
}

struct PrepareArgs {
  std::vector<std::string> ligands;
  std::vector<std::string> pockets;
  std::string affinity_table;
  std::string scaler_source;
  double scaler_std = 0.0;
  std::string output;
};

int cmd_prepare(const PrepareArgs& args) {
  if (args.ligands.size() != args.pockets.size()) {
    std::cerr << "[usage] needs one pocket per ligand (got "
              << args.ligands.size() << " ligands, " << args.pockets.size()
              << " pockets)\n";
    return kExitUsage;
  }

  std::optional<double> scaler_std;
  if (args.scaler_std > 0.0) {
    scaler_std = args.scaler_std;
  } else if (!args.scaler_source.empty()) {
    scaler_std = scaler_std_from_file(args.scaler_source);
  }

  std::optional<std::map<std::string, double>> affinities;
  if (!args.affinity_table.empty()) {
    affinities = read_affinity_table(args.affinity_table);
  }

  std::vector<fs::path> ligands(args.ligands.begin(), args.ligands.end());
  std::vector<fs::path> pockets(args.pockets.begin(), args.pockets.end());
  std::vector<PreparedComplexStats> stats;
  std::vector<std::string> warnings;
  Dataset ds = prepare_dataset(ligands, pockets,
                               affinities ? &*affinities : nullptr, scaler_std,
                               &stats, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";

  write_dataset(ds, args.output);
  std::cout << "charge scaler std " << format_double(ds.charge_scaler_std)
            << (scaler_std ? " (supplied)" : " (fitted)") << "\n";
  std::cout << "id,ligand_heavy_atoms,pocket_heavy_atoms,atoms_in_box\n";
  for (const PreparedComplexStats& s : stats) {
    std::cout << s.id << "," << s.ligand_heavy_atoms << ","
              << s.pocket_heavy_atoms << "," << s.atoms_in_box << "\n";
  }
  std::cout << "wrote " << ds.records.size() << " record(s) to "
            << args.output << "\n";
  return 0;
}

std::vector<DatasetRecord> select_records(const Dataset& ds,
                                          const std::vector<std::string>& ids,
                                          const std::string& subset) {
  std::vector<DatasetRecord> out;
  std::vector<std::string> missing;
  for (const std::string& id : ids) {
    if (const DatasetRecord* r = ds.find(id)) {
      out.push_back(*r);
    } else {
      missing.push_back(id);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& id : missing) {
      if (!list.empty()) list += ", ";
      list += id;
    }
    throw ConfigError(subset + " manifest ids missing from dataset: " + list);
  }
  return out;
}

struct TrainArgs {
  std::string dataset;
  std::string train_ids;
  std::string val_ids;
  std::string checkpoint_out;
  std::string log_out;
  uint64_t seed = 42;
  int epochs = 20;
  int batch_size = 5;
  double learning_rate = 1e-5;
  double lambda_l2 = 0.001;
  double dropout_keep = 0.5;
  std::vector<int> conv_filters{64, 128, 256};
  std::vector<int> dense_sizes{1000, 500, 200};
};

int cmd_train(const TrainArgs& args) {
  const Dataset ds = read_dataset(args.dataset);

  SplitManifest manifest;
  manifest.train = read_id_list(args.train_ids);
  manifest.validation = read_id_list(args.val_ids);
  manifest.validate_disjoint();

  const auto train_records = select_records(ds, manifest.train, "train");
  const auto val_records = select_records(ds, manifest.validation, "validation");

  NetworkConfig config;
  config.conv_filters = args.conv_filters;
  config.dense_sizes = args.dense_sizes;
  config.learning_rate = args.learning_rate;
  config.lambda_l2 = args.lambda_l2;
  config.dropout_keep = args.dropout_keep;
  config.validate();

  RngStream rng(args.seed);
  Network net = init_network<float>(config, rng);
  net.charge_scaler_std = ds.charge_scaler_std;

  TrainOptions options;
  options.epochs = args.epochs;
  options.batch_size = args.batch_size;
  TrainResult result = train(std::move(net), train_records, val_records,
                             options, rng);

  save_checkpoint(result.best, args.checkpoint_out);
  if (!args.log_out.empty()) {
    auto log = open_output(args.log_out);
    write_epoch_log_csv(log, result.log);
  }
  std::cout << "best epoch " << result.best_epoch << " (validation RMSE "
            << format_double(result.log[static_cast<size_t>(result.best_epoch - 1)].val_rmse)
            << ")\n";
  std::cout << "wrote checkpoint to " << args.checkpoint_out << "\n";
  return 0;
}

struct PredictArgs {
  std::string dataset;
  std::string checkpoint;
  std::string output;
};

int cmd_predict(const PredictArgs& args) {
  const Dataset ds = read_dataset(args.dataset);
  const Network net = load_checkpoint(args.checkpoint);

  const auto predictions = predict(net, ds);
  auto out = open_output(args.output);
  out << "id,prediction\n";
  for (const auto& [id, value] : predictions) {
    out << id << "," << format_double(value) << "\n";
  }

  const bool labeled = !ds.records.empty() &&
                       std::all_of(ds.records.begin(), ds.records.end(),
                                   [](const DatasetRecord& r) {
                                     return r.affinity.has_value();
                                   });
  if (labeled && ds.records.size() >= 3) {
    std::vector<double> measured, predicted;
    for (size_t i = 0; i < ds.records.size(); ++i) {
      measured.push_back(*ds.records[i].affinity);
      predicted.push_back(predictions[i].second);
    }
    print_metrics(metrics(measured, predicted));
  }
  std::cout << "wrote " << predictions.size() << " prediction(s) to "
            << args.output << "\n";
  return 0;
}

struct AnalyzeArgs {
  std::string checkpoint;
  std::string dataset;
  std::string mode;
  std::string id;
  int rotation = -1;
  std::string output;
};

const DatasetRecord& record_by_id(const Dataset& ds, const std::string& id) {
  if (id.empty()) {
    throw DomainError("this analysis mode needs --id");
  }
  const DatasetRecord* r = ds.find(id);
  if (!r) throw DomainError("id '" + id + "' not found in dataset");
  return *r;
}

int cmd_analyze(const AnalyzeArgs& args) {
  if (args.mode != "importance" && args.mode != "occlusion" &&
      args.mode != "activations" && args.mode != "stability") {
    std::cerr << "[usage] unknown analysis mode '" << args.mode << "'\n";
    return kExitUsage;
  }
  const Network net = load_checkpoint(args.checkpoint);

  if (args.mode == "importance") {
    const auto rows = feature_importance(net);
    auto out = open_output(args.output);
    write_importance_csv(out, rows);
    std::cout << "wrote " << rows.size() << " channel rows to " << args.output
              << "\n";
    return 0;
  }

  const Dataset ds = read_dataset(args.dataset);
  const auto& rotations = cube_rotations();

  if (args.mode == "occlusion") {
    const int rot = args.rotation < 0 ? 0 : args.rotation;
    if (rot >= static_cast<int>(rotations.size())) {
      throw DomainError("rotation index must be in [0, 23]");
    }
    const auto scan =
        occlusion_scan(net, record_by_id(ds, args.id), rotations[static_cast<size_t>(rot)]);
    auto out = open_output(args.output);
    write_occlusion_csv(out, scan);
    std::cout << "baseline " << format_double(scan.baseline) << ", "
              << scan.results.size() << " variants -> " << args.output << "\n";
    return 0;
  }

  if (args.mode == "activations") {
    // default comparison pairs the original orientation with the 180-degree
    // rotation about X
    const CubeRotation half_turn_x{{{{1, 0, 0}, {0, -1, 0}, {0, 0, -1}}}};
    const int rot = args.rotation < 0 ? cube_rotation_index(half_turn_x)
                                      : args.rotation;
    if (rot < 0 || rot >= static_cast<int>(rotations.size())) {
      throw DomainError("rotation index must be in [0, 23]");
    }
    const auto rows =
        activation_comparison(net, record_by_id(ds, args.id),
                              identity_rotation(), rotations[static_cast<size_t>(rot)]);
    auto out = open_output(args.output);
    write_activation_csv(out, rows);
    std::cout << "wrote " << rows.size() << " layer rows to " << args.output
              << "\n";
    return 0;
  }

  // mode == "stability"
  const auto rows = rotation_stability(net, ds.records);
  auto out = open_output(args.output);
  write_stability_csv(out, rows);
  std::cout << "wrote " << rows.size() << " stability rows to " << args.output
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D-CNN scoring toolkit for protein-ligand binding affinity"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "cap worker threads (0 = hardware default)");

  PrepareArgs prepare_args;
  auto* prepare = app.add_subcommand(
      "prepare", "featurize ligand/pocket mol2 pairs into a dataset");
  prepare->add_option("-l,--ligand", prepare_args.ligands, "ligand mol2 files")
      ->required();
  prepare->add_option("-p,--pocket", prepare_args.pockets, "pocket mol2 files")
      ->required();
  prepare->add_option("-a,--affinities", prepare_args.affinity_table,
                      "CSV affinity table (id,pKa)");
  prepare->add_option("--scaler", prepare_args.scaler_source,
                      "reuse the charge scaler of a dataset or checkpoint");
  prepare->add_option("--scaler-std", prepare_args.scaler_std,
                      "use this charge scaler std directly");
  prepare->add_option("-o,--output", prepare_args.output, "output dataset")
      ->required();

  TrainArgs train_args;
  auto* train_cmd =
      app.add_subcommand("train", "train a network on a prepared dataset");
  train_cmd->add_option("-i,--input", train_args.dataset, "dataset file")
      ->required();
  train_cmd->add_option("--train-ids", train_args.train_ids,
                        "training id manifest")
      ->required();
  train_cmd->add_option("--val-ids", train_args.val_ids,
                        "validation id manifest")
      ->required();
  train_cmd->add_option("-o,--output", train_args.checkpoint_out,
                        "output checkpoint")
      ->required();
  train_cmd->add_option("--log", train_args.log_out, "epoch log CSV");
  train_cmd->add_option("--seed", train_args.seed, "RNG seed");
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--batch-size", train_args.batch_size, "mini-batch size");
  train_cmd->add_option("--learning-rate", train_args.learning_rate,
                        "Adam learning rate");
  train_cmd->add_option("--lambda-l2", train_args.lambda_l2,
                        "L2 weight decay");
  train_cmd->add_option("--dropout-keep", train_args.dropout_keep,
                        "dropout keep probability");
  train_cmd->add_option("--conv-filters", train_args.conv_filters,
                        "conv filter counts");
  train_cmd->add_option("--dense-sizes", train_args.dense_sizes,
                        "dense layer sizes");

  PredictArgs predict_args;
  auto* predict_cmd =
      app.add_subcommand("predict", "predict affinities for a dataset");
  predict_cmd->add_option("-i,--input", predict_args.dataset, "dataset file")
      ->required();
  predict_cmd->add_option("-m,--model", predict_args.checkpoint, "checkpoint")
      ->required();
  predict_cmd->add_option("-o,--output", predict_args.output,
                          "predictions CSV")
      ->required();

  AnalyzeArgs analyze_args;
  auto* analyze_cmd =
      app.add_subcommand("analyze", "interpretability analyses");
  analyze_cmd->add_option("-m,--model", analyze_args.checkpoint, "checkpoint")
      ->required();
  analyze_cmd->add_option("-i,--input", analyze_args.dataset, "dataset file");
  analyze_cmd
      ->add_option("--mode", analyze_args.mode,
                   "importance | occlusion | activations | stability")
      ->required();
  analyze_cmd->add_option("--id", analyze_args.id, "complex id");
  analyze_cmd->add_option("--rotation", analyze_args.rotation,
                          "rotation index 0..23");
  analyze_cmd->add_option("-o,--output", analyze_args.output, "output CSV")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  set_max_threads(threads);
  try {
    if (prepare->parsed()) return cmd_prepare(prepare_args);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (predict_cmd->parsed()) return cmd_predict(predict_args);
    if (analyze_cmd->parsed()) return cmd_analyze(analyze_args);
    std::cerr << "[usage] no subcommand given\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "[data] " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "[data] " << e.what() << "\n";
    return kExitData;
  } catch (const DomainError& e) {
    std::cerr << "[data] " << e.what() << "\n";
    return kExitData;
  } catch (const ConfigError& e) {
    std::cerr << "[data] " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "[internal] " << e.what() << "\n";
    return kExitInternal;
  }
}
