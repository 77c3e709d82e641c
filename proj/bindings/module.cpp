// Python bindings for the core pipeline: mol2 parsing, featurization,
// voxelization, the network, dataset files and the evaluation metrics.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pafnucy/analysis.hpp"
#include "pafnucy/checkpoint.hpp"
#include "pafnucy/dataset.hpp"
#include "pafnucy/errors.hpp"
#include "pafnucy/network.hpp"
#include "pafnucy/parallel.hpp"
#include "pafnucy/prepare.hpp"
#include "pafnucy/training.hpp"

namespace py = pybind11;
using namespace pafnucy;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<FeaturizedAtom> atoms_from_arrays(const DoubleArray& positions,
                                              const FloatArray& features) {
  if (positions.ndim() != 2 || positions.shape(1) != 3) {
    throw DomainError("positions must have shape (N, 3)");
  }
  if (features.ndim() != 2 || features.shape(1) != kFeatureCount) {
    throw DomainError("features must have shape (N, 19)");
  }
  if (positions.shape(0) != features.shape(0)) {
    throw DomainError("positions and features disagree on atom count");
  }
  const auto n = static_cast<size_t>(positions.shape(0));
  std::vector<FeaturizedAtom> atoms(n);
  const double* p = positions.data();
  const float* f = features.data();
  for (size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) atoms[i].position[k] = p[i * 3 + k];
    for (int k = 0; k < kFeatureCount; ++k) {
      atoms[i].features[k] = f[i * kFeatureCount + k];
    }
  }
  return atoms;
}

py::tuple atoms_to_arrays(const std::vector<FeaturizedAtom>& atoms) {
  const auto n = static_cast<py::ssize_t>(atoms.size());
  DoubleArray positions({n, py::ssize_t(3)});
  FloatArray features({n, py::ssize_t(kFeatureCount)});
  double* p = positions.mutable_data();
  float* f = features.mutable_data();
  for (size_t i = 0; i < atoms.size(); ++i) {
    for (int k = 0; k < 3; ++k) p[i * 3 + k] = atoms[i].position[k];
    for (int k = 0; k < kFeatureCount; ++k) {
      f[i * kFeatureCount + k] = atoms[i].features[k];
    }
  }
  return py::make_tuple(positions, features);
}

std::array<double, 3> center_from_object(const DoubleArray& center) {
  if (center.ndim() != 1 || center.shape(0) != 3) {
    throw DomainError("center must be a 3-vector");
  }
  return {center.data()[0], center.data()[1], center.data()[2]};
}

FloatArray grid_to_array(Grid&& g) {
  FloatArray out({py::ssize_t(g.shape[0]), py::ssize_t(g.shape[1]),
                  py::ssize_t(g.shape[2]), py::ssize_t(g.shape[3])});
  std::memcpy(out.mutable_data(), g.data.data(),
              g.data.size() * sizeof(float));
  return out;
}

TensorF tensor_from_grid_array(const FloatArray& grid) {
  if (grid.ndim() != 4) throw DomainError("grid must be a rank-4 array");
  TensorF t;
  t.shape = {static_cast<int>(grid.shape(0)), static_cast<int>(grid.shape(1)),
             static_cast<int>(grid.shape(2)), static_cast<int>(grid.shape(3))};
  t.values.assign(grid.data(), grid.data() + grid.size());
  return t;
}

NetworkConfig config_from_kwargs(std::vector<int> conv_filters,
                                 std::vector<int> dense_sizes,
                                 std::array<int, 4> input_shape,
                                 double dropout_keep, double lambda_l2,
                                 double learning_rate) {
  NetworkConfig config;
  config.conv_filters = std::move(conv_filters);
  config.dense_sizes = std::move(dense_sizes);
  config.input_shape = input_shape;
  config.dropout_keep = dropout_keep;
  config.lambda_l2 = lambda_l2;
  config.learning_rate = learning_rate;
  config.validate();
  return config;
}

py::dict metrics_to_dict(const MetricsReport& report) {
  py::dict d;
  d["n"] = report.n;
  d["rmse"] = report.rmse;
  d["mae"] = report.mae;
  if (report.regression) {
    d["pearson_r"] = report.regression->pearson_r;
    d["sd"] = report.regression->sd;
    d["slope"] = report.regression->slope;
    d["intercept"] = report.regression->intercept;
  } else {
    d["pearson_r"] = py::none();
    d["sd"] = py::none();
    d["slope"] = py::none();
    d["intercept"] = py::none();
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_pafnucy, m) {
  m.doc() = "3D-CNN scoring toolkit for protein-ligand binding affinity";

  py::register_exception<ParseError>(m, "MolParseError", PyExc_ValueError);
  py::register_exception<IoError>(m, "FileFormatError", PyExc_OSError);
  py::register_exception<ConfigError>(m, "ConfigMismatchError",
                                      PyExc_ValueError);
  py::register_exception<DomainError>(m, "InputError", PyExc_ValueError);

  py::class_<Atom>(m, "Atom")
      .def_readonly("id", &Atom::id)
      .def_readonly("element", &Atom::element)
      .def_readonly("sybyl_type", &Atom::sybyl_type)
      .def_readonly("position", &Atom::position)
      .def_readonly("partial_charge", &Atom::partial_charge)
      .def_readonly("is_hydrogen", &Atom::is_hydrogen);

  py::class_<Bond>(m, "Bond")
      .def_readonly("a", &Bond::a)
      .def_readonly("b", &Bond::b)
      .def_readonly("order_label", &Bond::order_label);

  py::class_<Molecule>(m, "Molecule")
      .def_readonly("name", &Molecule::name)
      .def_readonly("atoms", &Molecule::atoms)
      .def_readonly("bonds", &Molecule::bonds)
      .def("__repr__", [](const Molecule& mol) {
        return "<Molecule '" + mol.name + "' with " +
               std::to_string(mol.atoms.size()) + " atoms, " +
               std::to_string(mol.bonds.size()) + " bonds>";
      });

  m.def(
      "parse_mol2",
      [](const std::string& text) { return parse_mol2(text); },
      py::arg("text"), "Parse mol2 text into a Molecule.");
  m.def(
      "parse_mol2_file",
      [](const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_mol2(buf.str());
      },
      py::arg("path"), "Parse a mol2 file into a Molecule.");
  m.def("write_mol2", &write_mol2, py::arg("molecule"),
        "Serialize a Molecule back to mol2 text.");
  m.def(
      "heavy_atom_count",
      [](const Molecule& mol) { return heavy_atoms(mol).size(); },
      py::arg("molecule"));

  m.def("feature_names", [] {
    std::vector<std::string> names;
    for (auto n : feature_names()) names.emplace_back(n);
    return names;
  });

  m.def(
      "fit_charge_scaler",
      [](const DoubleArray& charges) {
        std::span<const double> view(charges.data(),
                                     static_cast<size_t>(charges.size()));
        return fit_charge_scaler(view).std;
      },
      py::arg("charges"),
      "Population standard deviation of raw partial charges.");

  m.def(
      "featurize",
      [](const Molecule& protein, const Molecule& ligand, double scaler_std) {
        const auto atoms =
            featurize_complex(protein, ligand, ChargeScaler{scaler_std});
        return atoms_to_arrays(atoms);
      },
      py::arg("protein"), py::arg("ligand"), py::arg("scaler_std"),
      "Featurize the heavy atoms of a complex. Returns (positions (N,3) "
      "float64, features (N,19) float32); ligand atoms come first.");

  m.def(
      "ligand_centroid",
      [](const DoubleArray& positions, const FloatArray& features) {
        return ligand_centroid(atoms_from_arrays(positions, features));
      },
      py::arg("positions"), py::arg("features"));

  m.def(
      "voxelize",
      [](const DoubleArray& positions, const FloatArray& features,
         const DoubleArray& center, double box_size, double resolution) {
        GridParams params{box_size, resolution};
        return grid_to_array(voxelize(atoms_from_arrays(positions, features),
                                      center_from_object(center), params));
      },
      py::arg("positions"), py::arg("features"), py::arg("center"),
      py::arg("box_size") = 20.0, py::arg("resolution") = 1.0,
      "Crop to the box around center and discretize to a (D,D,D,19) grid.");

  m.def("cube_rotations", [] {
    const auto& rotations = cube_rotations();
    py::array_t<int> out({py::ssize_t(rotations.size()), py::ssize_t(3),
                          py::ssize_t(3)});
    int* p = out.mutable_data();
    for (const CubeRotation& r : rotations) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) *p++ = r.m[i][j];
      }
    }
    return out;
  });

  m.def(
      "rotate_atoms",
      [](const DoubleArray& positions, const FloatArray& features,
         const DoubleArray& center, int rotation_index) {
        const auto& rotations = cube_rotations();
        if (rotation_index < 0 ||
            rotation_index >= static_cast<int>(rotations.size())) {
          throw DomainError("rotation index must be in [0, 23]");
        }
        const auto atoms = rotate_atoms(atoms_from_arrays(positions, features),
                                        center_from_object(center),
                                        rotations[static_cast<size_t>(rotation_index)]);
        return atoms_to_arrays(atoms);
      },
      py::arg("positions"), py::arg("features"), py::arg("center"),
      py::arg("rotation_index"));

  m.def(
      "occlusion_variant_count",
      [](const DoubleArray& positions, const FloatArray& features,
         const DoubleArray& center) {
        return occlusion_variants(atoms_from_arrays(positions, features),
                                  center_from_object(center))
            .size();
      },
      py::arg("positions"), py::arg("features"), py::arg("center"));

  py::class_<Network>(m, "Network")
      .def_static(
          "init",
          [](uint64_t seed, std::vector<int> conv_filters,
             std::vector<int> dense_sizes, std::array<int, 4> input_shape,
             double dropout_keep, double lambda_l2, double learning_rate) {
            RngStream rng(seed);
            return init_network<float>(
                config_from_kwargs(std::move(conv_filters),
                                   std::move(dense_sizes), input_shape,
                                   dropout_keep, lambda_l2, learning_rate),
                rng);
          },
          py::arg("seed") = 42,
          py::arg("conv_filters") = std::vector<int>{64, 128, 256},
          py::arg("dense_sizes") = std::vector<int>{1000, 500, 200},
          py::arg("input_shape") = std::array<int, 4>{21, 21, 21, 19},
          py::arg("dropout_keep") = 0.5, py::arg("lambda_l2") = 0.001,
          py::arg("learning_rate") = 1e-5)
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def(
          "save",
          [](const Network& net, const std::filesystem::path& path) {
            save_checkpoint(net, path);
          },
          py::arg("path"))
      .def_property_readonly("charge_scaler_std",
                             [](const Network& net) {
                               return net.charge_scaler_std;
                             })
      .def_property_readonly("parameter_count",
                             [](const Network& net) {
                               return net.parameter_count();
                             })
      .def_property_readonly("layer_shapes",
                             [](const Network& net) {
                               py::list shapes;
                               for (const auto& s :
                                    net.config.layer_shapes()) {
                                 shapes.append(
                                     py::make_tuple(s.name, s.dims));
                               }
                               return shapes;
                             })
      .def(
          "predict_grid",
          [](const Network& net, const FloatArray& grid) {
            return forward(net, tensor_from_grid_array(grid), false, nullptr);
          },
          py::arg("grid"),
          "Inference-mode forward pass over one (D,D,D,19) grid.")
      .def("__repr__", [](const Network& net) {
        return "<Network with " + std::to_string(net.parameter_count()) +
               " parameters>";
      });

  m.def(
      "prepare_dataset",
      [](const std::vector<std::filesystem::path>& ligands,
         const std::vector<std::filesystem::path>& pockets,
         const std::filesystem::path& output,
         const std::optional<std::map<std::string, double>>& affinities,
         std::optional<double> scaler_std) {
        Dataset ds = prepare_dataset(ligands, pockets,
                                     affinities ? &*affinities : nullptr,
                                     scaler_std);
        write_dataset(ds, output);
        return ds.charge_scaler_std;
      },
      py::arg("ligands"), py::arg("pockets"), py::arg("output"),
      py::arg("affinities") = py::none(), py::arg("scaler_std") = py::none(),
      "Featurize ligand/pocket mol2 pairs into a dataset file; returns the "
      "charge scaler std.");

  m.def(
      "read_dataset",
      [](const std::filesystem::path& path) {
        const Dataset ds = read_dataset(path);
        py::list records;
        for (const DatasetRecord& r : ds.records) {
          py::dict d;
          d["id"] = r.id;
          auto arrays = atoms_to_arrays(r.atoms);
          d["positions"] = arrays[0];
          d["features"] = arrays[1];
          d["affinity"] = r.affinity ? py::cast(*r.affinity) : py::none();
          records.append(d);
        }
        return py::make_tuple(ds.charge_scaler_std, records);
      },
      py::arg("path"),
      "Read a dataset file; returns (charge_scaler_std, records).");

  m.def(
      "train_network",
      [](const std::filesystem::path& dataset_path,
         const std::vector<std::string>& train_ids,
         const std::vector<std::string>& val_ids,
         const std::filesystem::path& checkpoint_out, uint64_t seed,
         int epochs, int batch_size, std::vector<int> conv_filters,
         std::vector<int> dense_sizes, double dropout_keep, double lambda_l2,
         double learning_rate) {
        const Dataset ds = read_dataset(dataset_path);
        std::vector<DatasetRecord> train_records, val_records;
        for (const auto& id : train_ids) {
          const DatasetRecord* r = ds.find(id);
          if (!r) throw ConfigError("train id '" + id + "' not in dataset");
          train_records.push_back(*r);
        }
        for (const auto& id : val_ids) {
          const DatasetRecord* r = ds.find(id);
          if (!r) throw ConfigError("val id '" + id + "' not in dataset");
          val_records.push_back(*r);
        }
        RngStream rng(seed);
        Network net = init_network<float>(
            config_from_kwargs(std::move(conv_filters),
                               std::move(dense_sizes), {21, 21, 21, 19},
                               dropout_keep, lambda_l2, learning_rate),
            rng);
        net.charge_scaler_std = ds.charge_scaler_std;
        TrainOptions options;
        options.epochs = epochs;
        options.batch_size = batch_size;
        const TrainResult result =
            train(std::move(net), train_records, val_records, options, rng);
        save_checkpoint(result.best, checkpoint_out);
        py::list log;
        for (const EpochStats& e : result.log) {
          log.append(py::make_tuple(e.epoch, e.train_rmse, e.val_rmse));
        }
        return py::make_tuple(result.best_epoch, log);
      },
      py::arg("dataset"), py::arg("train_ids"), py::arg("val_ids"),
      py::arg("checkpoint_out"), py::arg("seed") = 42, py::arg("epochs") = 20,
      py::arg("batch_size") = 5,
      py::arg("conv_filters") = std::vector<int>{64, 128, 256},
      py::arg("dense_sizes") = std::vector<int>{1000, 500, 200},
      py::arg("dropout_keep") = 0.5, py::arg("lambda_l2") = 0.001,
      py::arg("learning_rate") = 1e-5,
      "Train on a dataset file and write the best checkpoint. Returns "
      "(best_epoch, [(epoch, train_rmse, val_rmse), ...]).");

  m.def(
      "predict_dataset",
      [](const std::filesystem::path& dataset_path,
         const std::filesystem::path& checkpoint_path) {
        const Dataset ds = read_dataset(dataset_path);
        const Network net = load_checkpoint(checkpoint_path);
        return predict(net, ds);
      },
      py::arg("dataset"), py::arg("checkpoint"),
      "Original-orientation predictions; returns [(id, pKa), ...].");

  m.def(
      "metrics",
      [](const DoubleArray& measured, const DoubleArray& predicted) {
        std::span<const double> t(measured.data(),
                                  static_cast<size_t>(measured.size()));
        std::span<const double> y(predicted.data(),
                                  static_cast<size_t>(predicted.size()));
        return metrics_to_dict(metrics(t, y));
      },
      py::arg("measured"), py::arg("predicted"),
      "RMSE, MAE, Pearson R and regression SD for measured vs predicted.");

  m.def(
      "feature_importance",
      [](const std::filesystem::path& checkpoint_path) {
        const Network net = load_checkpoint(checkpoint_path);
        py::list rows;
        for (const ChannelWeightRange& r : feature_importance(net)) {
          py::dict d;
          d["channel"] = r.channel;
          d["min"] = r.min;
          d["q1"] = r.q1;
          d["median"] = r.median;
          d["q3"] = r.q3;
          d["max"] = r.max;
          rows.append(d);
        }
        return rows;
      },
      py::arg("checkpoint"),
      "First-conv-layer weight ranges per input channel.");

  m.def("set_max_threads", &set_max_threads, py::arg("n"),
        "Cap worker threads (0 = hardware default).");
}
