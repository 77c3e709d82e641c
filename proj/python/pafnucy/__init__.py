"""3D-CNN scoring toolkit for protein-ligand binding affinity."""

from ._pafnucy import (
    Atom,
    Bond,
    ConfigMismatchError,
    FileFormatError,
    InputError,
    MolParseError,
    Molecule,
    Network,
    cube_rotations,
    feature_importance,
    feature_names,
    featurize,
    fit_charge_scaler,
    heavy_atom_count,
    ligand_centroid,
    metrics,
    occlusion_variant_count,
    parse_mol2,
    parse_mol2_file,
    predict_dataset,
    prepare_dataset,
    read_dataset,
    rotate_atoms,
    set_max_threads,
    train_network,
    voxelize,
    write_mol2,
)

__all__ = [
    "Atom",
    "Bond",
    "ConfigMismatchError",
    "FileFormatError",
    "InputError",
    "MolParseError",
    "Molecule",
    "Network",
    "cube_rotations",
    "feature_importance",
    "feature_names",
    "featurize",
    "fit_charge_scaler",
    "heavy_atom_count",
    "ligand_centroid",
    "metrics",
    "occlusion_variant_count",
    "parse_mol2",
    "parse_mol2_file",
    "predict_dataset",
    "prepare_dataset",
    "read_dataset",
    "rotate_atoms",
    "set_max_threads",
    "train_network",
    "voxelize",
    "write_mol2",
]

__version__ = "0.1.0"
