"""boxcert: certified closeness checking between nonlinear vector fields
and feed-forward ReLU-family networks over box domains."""

from .crown import backward_crown, concretize, linearize_network
from .dynamics import DynamicalSystem, builtin_systems, get_system, parse_expr
from .geometry import Hyperrectangle, total_volume
from .network import Network, chain, load_weights, make_layer, save_weights
from .partitioner import (
    CoverageReport,
    PartitionConfig,
    export_regions,
    initial_partition,
    load_regions,
    split_box,
    verify_domain,
)
from .taylor import CertifiedEnclosure, taylor_expand
from .verifier import (
    AnalyticRef,
    LipschitzRef,
    NetworkRef,
    VerificationTask,
    check_box,
    confirm_counterexample,
    residual_bound,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticRef",
    "CertifiedEnclosure",
    "CoverageReport",
    "DynamicalSystem",
    "Hyperrectangle",
    "LipschitzRef",
    "Network",
    "NetworkRef",
    "PartitionConfig",
    "VerificationTask",
    "backward_crown",
    "builtin_systems",
    "chain",
    "check_box",
    "concretize",
    "confirm_counterexample",
    "export_regions",
    "get_system",
    "initial_partition",
    "linearize_network",
    "load_regions",
    "load_weights",
    "make_layer",
    "parse_expr",
    "residual_bound",
    "save_weights",
    "split_box",
    "taylor_expand",
    "total_volume",
    "verify_domain",
    "__version__",
]
