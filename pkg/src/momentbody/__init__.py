"""Moment body membership via the log-partition dual.

Decides whether ``b`` lies in ``{(tr A_i X)_i : X >= 0, tr X = 1}`` by
minimizing ``f(y) = log tr exp(sum_i y_i A_i) - b.y`` with L-BFGS after
centering and whitening the map, and returns a checked certificate.
"""
from .errors import (
    BlockViolation,
    InvalidConfig,
    InvalidInput,
    LineSearchFailed,
    MissingBlockStructure,
    MomentBodyError,
    NotASeparator,
    NotPreconditioned,
    NotUnit,
    RankDeficient,
    SchemaError,
)
from .instances import (
    gen_example_2_1,
    gen_example_2_2,
    gen_infeasible,
    gen_interval,
    gen_random,
    read_certificate,
    read_instance,
    write_certificate,
    write_instance,
)
from .logpart import evaluate, evaluate_blocks, hessian
from .moment_map import Instance, MomentMap
from .oracle import (
    MembershipReport,
    boundary_sample,
    decide,
    quick_reject,
    support,
    verify_feasible,
    verify_infeasible,
    width,
)
from .precondition import PreconditionedInstance, TransformRecord, precondition, whiten_map
from .solver import (
    Feasible,
    Indeterminate,
    Infeasible,
    NotInterior,
    SolverConfig,
    minimize,
)

__version__ = "0.1.0"

__all__ = [
    "BlockViolation", "InvalidConfig", "InvalidInput", "LineSearchFailed",
    "MissingBlockStructure", "MomentBodyError", "NotASeparator", "NotPreconditioned",
    "NotUnit", "RankDeficient", "SchemaError",
    "gen_example_2_1", "gen_example_2_2", "gen_infeasible", "gen_interval", "gen_random",
    "read_certificate", "read_instance", "write_certificate", "write_instance",
    "evaluate", "evaluate_blocks", "hessian",
    "Instance", "MomentMap",
    "MembershipReport", "boundary_sample", "decide", "quick_reject", "support",
    "verify_feasible", "verify_infeasible", "width",
    "PreconditionedInstance", "TransformRecord", "precondition", "whiten_map",
    "Feasible", "Indeterminate", "Infeasible", "NotInterior", "SolverConfig", "minimize",
]
