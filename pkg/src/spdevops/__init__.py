"""Pre-deployment verification, monitoring and troubleshooting for VNF service chains."""

from .nffg import NFFG, GraphUpdate, apply_update, extract_chains, validate
from .packets import EMPTY, FULL, IntervalSet, PacketClass, PacketSet, pc_intersect, pc_subtract
from .verifier import (
    Policy,
    PolicyKind,
    Verdict,
    check_isolation,
    check_reachability,
    root_cause_isolation,
    verify_policy_set,
)

__version__ = "0.1.0"
