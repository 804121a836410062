"""Multiplier and squarer synthesis by two-phase e-graph rewriting."""
from .arrays import ArraySpec, build_and_array, pad_rows
from .cost import Cost, CostModel, ShapeUnreachable, extract, node_cost
from .egraph import EGraph, RunLimits, StopReason, ematch, run
from .netlist import Netlist, emit_verilog, lower, stats
from .pipeline import PipelineConfig, RunReport, optimize, run_phase
from .rewrites import Rewrite, phase1_rules, phase2_rules, prepass_rules, soundness_check
from .term import Term, eval_term, free_vars, parse, serialize
from .verify import Verdict, check_ta_pa_fixtures, eclass_consistency, exhaustive_check

__version__ = "0.1.0"
