from .expr import (
    Add,
    Cbrt,
    Constant,
    Cos,
    Div,
    Exp,
    ExprNode,
    Mul,
    Neg,
    Pow,
    Sin,
    Sqrt,
    Variable,
    as_expr,
    cbrt,
    cos,
    exp,
    parse_expr,
    sin,
    sqrt,
    var,
)
from .system import CONTINUOUS, DISCRETE, DynamicalSystem
from .benchmarks import (
    LARGE_NET_EPSILON,
    builtin_systems,
    get_system,
    lorenz_reduced_domain,
    quadratic_step_map,
)
from .config import load_system, save_system, system_from_dict, system_to_dict

__all__ = [
    "Add", "Cbrt", "Constant", "Cos", "Div", "Exp", "ExprNode", "Mul", "Neg",
    "Pow", "Sin", "Sqrt", "Variable", "as_expr", "cbrt", "cos", "exp",
    "parse_expr", "sin", "sqrt", "var",
    "CONTINUOUS", "DISCRETE", "DynamicalSystem",
    "LARGE_NET_EPSILON", "builtin_systems", "get_system",
    "lorenz_reduced_domain", "quadratic_step_map",
    "load_system", "save_system", "system_from_dict", "system_to_dict",
]
