"""Shared-wire gate netlists and Verilog emission."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .term import ONE, ZERO, Term, TermError, postorder, var

# signal numbering: 0 = constant 0, 1 = constant 1, then inputs, then wires
CONST0, CONST1 = 0, 1
GATE_KINDS = ("and", "or", "xor", "not")
_SYMBOL = {"and": "&", "or": "|", "xor": "^"}

VERILOG_KEYWORDS = frozenset("""
always and assign automatic begin buf bufif0 bufif1 case casex casez cell cmos config
deassign default defparam design disable edge else end endcase endconfig endfunction
endgenerate endmodule endprimitive endspecify endtable endtask event for force forever
fork function generate genvar highz0 highz1 if ifnone incdir include initial inout input
instance integer join large liblist library localparam macromodule medium module nand
negedge nmos nor noshowcancelled not notif0 notif1 or output parameter pmos posedge
primitive pull0 pull1 pulldown pullup pulsestyle_ondetect pulsestyle_onevent rcmos real
realtime reg release repeat rnmos rpmos rtran rtranif0 rtranif1 scalared showcancelled
signed small specify specparam strong0 strong1 supply0 supply1 table task time tran
tranif0 tranif1 tri tri0 tri1 triand trior trireg unsigned use uwire vectored wait wand
weak0 weak1 while wire wor xnor xor
""".split())
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*$")


class NetlistError(ValueError):
    pass


@dataclass
class Netlist:
    width: int
    square: bool
    gates: list[tuple[str, int, int]] = field(default_factory=list)  # (kind, a, b); b=-1 for not
    outputs: list[int] = field(default_factory=list)  # LSB first

    @property
    def n_inputs(self) -> int:
        return self.width if self.square else 2 * self.width

    @property
    def first_wire(self) -> int:
        return 2 + self.n_inputs

    def input_signal(self, name: str, index: int) -> int:
        if index >= self.width or (name == "q" and self.square) or name not in "pq":
            raise NetlistError(f"input {name}{index} outside a {self.width}-bit "
                               f"{'squarer' if self.square else 'multiplier'}")
        return 2 + index + (self.width if name == "q" else 0)

    def signal_name(self, s: int) -> str:
        if s == CONST0:
            return "1'b0"
        if s == CONST1:
            return "1'b1"
        if s < self.first_wire:
            i = s - 2
            return f"p[{i}]" if i < self.width else f"q[{i - self.width}]"
        return f"w{s - self.first_wire}"

    def arrays(self):
        ops = np.array([kernels.OPCODES[k] for k, _, _ in self.gates], dtype=np.int8)
        a = np.array([x for _, x, _ in self.gates], dtype=np.int32)
        b = np.array([max(y, 0) for _, _, y in self.gates], dtype=np.int32)
        outs = np.array(self.outputs, dtype=np.int32)
        return ops, a, b, outs


def _infer(bits: list[Term]):
    width = 0
    has_q = False
    for t in bits:
        for n in postorder(t):
            if n.op == "var":
                width = max(width, n.arg[1] + 1)
                has_q |= n.arg[0] == "q"
    return width, not has_q


def lower(bits: list[Term], width: int | None = None, square: bool | None = None,
          share: bool = True) -> Netlist:
    """Gate terms (LSB first) -> netlist with hash-consed wires."""
    w0, sq0 = _infer(bits)
    nl = Netlist(width if width is not None else max(w0, 1),
                 square if square is not None else sq0)
    table: dict[tuple, int] = {}
    memo: dict[Term, int] = {}

    def signal(t: Term) -> int:
        for n in postorder(t):
            if n in memo:
                continue
            if n.op == "const":
                memo[n] = CONST1 if n.arg else CONST0
            elif n.op == "var":
                memo[n] = nl.input_signal(*n.arg)
            elif n.op in GATE_KINDS:
                ops = [memo[c] for c in n.children]
                if n.op == "not":
                    key = ("not", ops[0], -1)
                else:
                    x, y = ops
                    key = (n.op, min(x, y), max(x, y))
                s = table.get(key) if share else None
                if s is None:
                    s = nl.first_wire + len(nl.gates)
                    nl.gates.append(key)
                    if share:
                        table[key] = s
                memo[n] = s
            else:
                raise NetlistError(f"cannot lower {n.op!r} node to gates")
        return memo[t]

    if not share:
        # rebuild memo per output so subterms are duplicated across bits
        outs = []
        for t in bits:
            memo.clear()
            outs.append(signal(t))
        nl.outputs = outs
    else:
        nl.outputs = [signal(t) for t in bits]
    return nl


def to_terms(nl: Netlist) -> list[Term]:
    sig: list[Term] = [ZERO, ONE]
    sig += [var("p", i) for i in range(nl.width)]
    if not nl.square:
        sig += [var("q", i) for i in range(nl.width)]
    for kind, a, b in nl.gates:
        sig.append(Term(kind, [sig[a]] if kind == "not" else [sig[a], sig[b]]))
    return [sig[s] for s in nl.outputs]


def check_module_name(name: str) -> None:
    if not _IDENT.match(name):
        raise NetlistError(f"invalid Verilog identifier {name!r}")
    if name in VERILOG_KEYWORDS:
        raise NetlistError(f"module name {name!r} is a Verilog reserved word")


def emit_verilog(nl: Netlist, module_name: str) -> str:
    check_module_name(module_name)
    n = nl.width
    m = len(nl.outputs)
    ports = "p, r" if nl.square else "p, q, r"
    lines = [f"module {module_name} ({ports});"]
    lines.append(f"  input [{n - 1}:0] p;" if nl.square else f"  input [{n - 1}:0] p, q;")
    lines.append(f"  output [{m - 1}:0] r;")
    name = nl.signal_name
    base = nl.first_wire
    for k in range(len(nl.gates)):
        lines.append(f"  wire w{k};")
    for k, (kind, a, b) in enumerate(nl.gates):
        if kind == "not":
            expr = f"~{name(a)}"
        else:
            expr = f"{name(a)} {_SYMBOL[kind]} {name(b)}"
        lines.append(f"  assign {name(base + k)} = {expr};")
    for i, s in enumerate(nl.outputs):
        lines.append(f"  assign r[{i}] = {name(s)};")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def depths(nl: Netlist) -> list[int]:
    """Gate depth of every signal."""
    d = [0] * (nl.first_wire + len(nl.gates))
    base = nl.first_wire
    for k, (kind, a, b) in enumerate(nl.gates):
        d[base + k] = 1 + (d[a] if kind == "not" else max(d[a], d[b]))
    return d


def stats(nl: Netlist) -> dict:
    by_kind = {k: 0 for k in GATE_KINDS}
    for kind, _, _ in nl.gates:
        by_kind[kind] += 1
    d = depths(nl)
    out_depths = [d[s] for s in nl.outputs]
    return {
        "gates": {k: v for k, v in by_kind.items() if v},
        "total": len(nl.gates),
        "depth": max(out_depths, default=0),
        "output_depths": out_depths,
    }


def simulate(nl: Netlist, n_cases: int | None = None, use_numba: bool | None = None) -> np.ndarray:
    """Integer output value for assignments 0..n_cases-1 (default: all)."""
    ops, a, b, outs = nl.arrays()
    total = 1 << nl.n_inputs
    n_cases = total if n_cases is None else n_cases
    words = np.arange((n_cases + 63) // 64, dtype=np.int64)
    vals = kernels.simulate(ops, a, b, nl.n_inputs, words, use_numba)
    _, got = kernels.output_values_np(vals, outs, words, n_cases)
    return got


__all__ = ["Netlist", "NetlistError", "lower", "emit_verilog", "stats", "simulate",
           "to_terms", "depths", "TermError"]
