from .engine import Diagnosis, bindings, run_tsg
from .expr import ExprSyntaxError, ExprTypeError, decision_eval, evaluate, parse_expr
from .snapshots import build_snapshot, renamed_snapshot, snapshot_config
from .tools import ToolResult, UnknownTarget, UnknownTool, UnresolvedReference, tool_adapter
from .tsg import (
    CycleError,
    DecisionNode,
    Edge,
    ParseError,
    SinkNode,
    ToolNode,
    Tsg,
    TsgError,
    UnlabeledBranchError,
    elastic_firewall_tsg,
    load_tsg,
    parse_tsg,
)

__all__ = [
    "CycleError",
    "DecisionNode",
    "Diagnosis",
    "Edge",
    "ExprSyntaxError",
    "ExprTypeError",
    "ParseError",
    "SinkNode",
    "ToolNode",
    "ToolResult",
    "Tsg",
    "TsgError",
    "UnknownTarget",
    "UnknownTool",
    "UnlabeledBranchError",
    "UnresolvedReference",
    "bindings",
    "build_snapshot",
    "decision_eval",
    "elastic_firewall_tsg",
    "evaluate",
    "load_tsg",
    "parse_expr",
    "renamed_snapshot",
    "run_tsg",
    "snapshot_config",
    "tool_adapter",
]
