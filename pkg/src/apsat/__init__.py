"""Access-pattern tensor IR with equality saturation for accelerator mapping."""
from .egraph import EGraph, ENode, SaturationLimits, SaturationReport, saturate
from .extract import CostModel, ExtractionResult, default_cost_model, extract
from .interp import evaluate
from .ir import (
    APShape, Access, CartProd, Compute, Concat, Expr, Flatten, Op, Pair, Reshape,
    ShapeError, Slice, Squeeze, SystolicArray, TensorRef, Transpose, Windows, infer_shape,
)
from .pattern import RewriteRule, parse_pattern
from .rewrites import rule_sets, rule_systolic_array, rules_blocking, rules_cleanup, rules_im2col
from .syntax import ParseError, parse, pretty_print

__all__ = [
    "APShape", "Access", "CartProd", "Compute", "Concat", "CostModel", "EGraph", "ENode",
    "Expr", "ExtractionResult", "Flatten", "Op", "Pair", "ParseError", "Reshape",
    "RewriteRule", "SaturationLimits", "SaturationReport", "ShapeError", "Slice", "Squeeze",
    "SystolicArray", "TensorRef", "Transpose", "Windows", "default_cost_model", "evaluate",
    "extract", "infer_shape", "parse", "parse_pattern", "pretty_print", "rule_sets",
    "rule_systolic_array", "rules_blocking", "rules_cleanup", "rules_im2col", "saturate",
]
