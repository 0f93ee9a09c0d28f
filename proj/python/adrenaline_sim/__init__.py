"""Discrete-event simulator for PD-disaggregated LLM serving with attention offloading."""

import json

from . import _core
from ._core import (
    ConfigError,
    CurveError,
    Error,
    InfeasibleSlo,
    SimulationError,
    TraceError,
    arithmetic_intensity,
    attn_bw_fraction,
    b_max_for_balance,
    build_grid,
    combined_bound,
    content_hash,
    kv_bytes,
    launch_overhead,
    need_offload,
    ob_comp,
    ob_mem,
    percentile,
    prefill_slowdown,
    select_graph,
)

__all__ = [
    "ConfigError",
    "CurveError",
    "Error",
    "InfeasibleSlo",
    "SimulationError",
    "TraceError",
    "arithmetic_intensity",
    "attn_bw_fraction",
    "b_max_for_balance",
    "build_grid",
    "combined_bound",
    "content_hash",
    "fit_curves",
    "kv_bytes",
    "launch_overhead",
    "need_offload",
    "ob_comp",
    "ob_mem",
    "percentile",
    "prefill_slowdown",
    "run",
    "select_graph",
]


def run(config=None, **workload):
    """Run one experiment.

    `config` uses the same schema as the CLI's --config file. Keyword
    arguments override fields of its "workload" section.
    """
    cfg = dict(config or {})
    if workload:
        cfg["workload"] = {**cfg.get("workload", {}), **workload}
    return json.loads(_core.simulate(json.dumps(cfg)))


def fit_curves(bw, slowdown):
    """Normalize profiled points into a curves dict ({"bw": ..., "slowdown": ...})."""
    return json.loads(_core.fit_curves([tuple(p) for p in bw], [tuple(p) for p in slowdown]))
