"""Training companion for the boxcert verifier.

Produces abstraction nets, distilled students, koopman model triples, and
trajectory datasets, all in the file formats the verifier consumes.
"""

from .koopman import KoopmanModel, KoopmanResult, KoopmanSpec, train_koopman
from .specs import TrainSpec
from .systems import (
    System,
    builtin_names,
    builtin_system,
    domain_only,
    load_system_config,
    resolve_system,
)
from .trajectories import (
    TrajectoryBatch,
    generate_trajectories,
    load_trajectories,
    save_trajectories,
)
from .training import TrainingDiverged, TrainResult, distill, train_abstraction
from .weights import build_mlp, export_koopman, export_network, import_network

__all__ = [
    "KoopmanModel", "KoopmanResult", "KoopmanSpec", "System", "TrainResult",
    "TrainSpec", "TrainingDiverged", "TrajectoryBatch", "build_mlp",
    "builtin_names", "builtin_system", "distill", "domain_only",
    "export_koopman", "export_network", "generate_trajectories",
    "import_network", "load_system_config", "load_trajectories",
    "resolve_system", "save_trajectories", "train_abstraction",
    "train_koopman",
]
