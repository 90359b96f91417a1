"""Cost model for traversal, pattern matching, and cross-model joins.

Costs are expressed in abstract units: each disk access costs `io`,
each function call or predicate evaluation costs `cpu`. The model only
needs to rank alternatives correctly, not predict wall time.
"""

from __future__ import annotations

from dataclasses import dataclass

# Traversal operand shapes (also re-exported by graphops).
CASE_RECORDS_TO_NODES = "records->nodes"
CASE_NODES_TO_RECORDS = "nodes->records"
CASE_NODES_TO_NODES = "nodes->nodes"
CASE_NODES_TO_EDGES = "nodes->edges"


@dataclass(frozen=True)
class CostConstants:
    cpu: float = 1.0
    io: float = 100.0
    block_records: int = 100  # records per disk block
    buffer_records: int = 1_000_000  # row buffer pool capacity

    def __post_init__(self):
        if self.cpu <= 0 or self.io <= 0 or self.block_records <= 0 or self.buffer_records <= 0:
            raise ValueError("cost constants must be positive")


def cost_traverse(case, n_input, avg_out_degree, consts):
    """Cost of one traversal operation over n_input first-operand members."""
    if case == CASE_RECORDS_TO_NODES:
        return n_input * consts.cpu
    if case == CASE_NODES_TO_RECORDS:
        return n_input * (consts.cpu + consts.io)
    if case == CASE_NODES_TO_NODES:
        return n_input * avg_out_degree * consts.cpu
    if case == CASE_NODES_TO_EDGES:
        return n_input * avg_out_degree * (2 * consts.cpu + consts.io)
    raise ValueError(f"unknown traversal case {case!r}")


def cost_match(alpha, beta, v_count, e_count, traversal_cost, est_rows, consts):
    """Match cost: pushed-predicate evaluation over the candidate tables,
    plus the traversal work, plus residual predicate evaluation on the
    output rows."""
    pushdown = (alpha * v_count + beta * e_count) * (consts.io + consts.cpu)
    residual = est_rows * consts.cpu
    return pushdown + traversal_cost + residual


# Join operand placement relative to the buffer pool.
PLACE_IN_MEMORY = "in-memory"
PLACE_BOTH_FIT = "both-fit"
PLACE_LEFT_FITS = "left-fits"


def join_placement(n_left, n_right, consts):
    if n_left + n_right <= consts.buffer_records:
        return PLACE_IN_MEMORY
    if n_left <= consts.buffer_records:
        return PLACE_LEFT_FITS
    return PLACE_LEFT_FITS


def cost_join(n_left, n_right, placement, consts):
    """Nested-loop join cost under three buffer placements."""
    cpu_part = n_left * n_right * consts.cpu
    if placement == PLACE_IN_MEMORY:
        return cpu_part
    b = consts.block_records
    if placement == PLACE_BOTH_FIT:
        return (n_left / b + n_right / b) * consts.io + cpu_part
    if placement == PLACE_LEFT_FITS:
        return (n_left / b + n_left * n_right / b) * consts.io + cpu_part
    raise ValueError(f"unknown join placement {placement!r}")


def cost_scan(n_rows, consts):
    """Full scan: block reads plus one predicate evaluation per record."""
    return (n_rows / consts.block_records) * consts.io + n_rows * consts.cpu


def lambda_estimate(avg_out_degree, hops, cap=1_000_000.0):
    """Average traversal fan-out per start record over a hop chain."""
    lam = 1.0
    for _ in range(hops):
        lam = min(lam * max(avg_out_degree, 0.0), cap)
    return lam
