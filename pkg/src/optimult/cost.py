"""Delay cost models and best-tree extraction.

Costs are ``(delay, area)`` pairs compared lexicographically. Delay composes
max-plus, so extraction uses Knuth's generalization of Dijkstra's algorithm:
every node cost dominates its children's, which makes the first node to
settle a class optimal for it.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple

from .egraph import EGraph
from .term import Term, postorder

PENALTY = 1 << 32

# per-kind gate delay in unit gates
GATE_DELAY = {
    "var": 0, "const": 0,
    "and": 1, "or": 1, "xor": 1, "not": 1,
    "has": 1, "hac": 1,
    "fas": 2, "fac": 2,
}
# own area of a kind when it is not penalized
GATE_AREA = {
    "var": 0, "const": 0,
    "and": 1, "or": 1, "xor": 1, "not": 1,
    "has": 1, "hac": 1, "fas": 2, "fac": 3,
    "row": 0,
}


class Cost(NamedTuple):
    delay: int
    area: int

    def __str__(self):
        return f"delay={self.delay} area={self.area}"


class ShapeUnreachable(RuntimeError):
    def __init__(self, phase: str, cost: Cost | None, detail: str = ""):
        msg = f"phase {phase}: target shape unreachable"
        if cost is not None:
            msg += f" (best cost {cost.delay}"
            if cost.delay >= PENALTY:
                msg += f" = {cost.delay // PENALTY} x penalty + {cost.delay % PENALTY}"
            msg += ")"
        if detail:
            msg += f"; {detail}"
        super().__init__(msg)
        self.phase = phase
        self.cost = cost


@dataclass(frozen=True)
class CostModel:
    phase: str  # "one" or "two"
    penalty: int = PENALTY
    gate_delay: dict = field(default_factory=lambda: dict(GATE_DELAY))
    # own area charged to a penalized node, so that among designs of equal
    # delay the one with fewer leftover arithmetic nodes wins
    penalty_area: int = 1 << 16

    def __post_init__(self):
        if self.phase not in ("one", "two"):
            raise ValueError(f"unknown phase {self.phase!r}")

    def offends(self, kind: str, slots_are_bits: bool = False, is_root: bool = False) -> bool:
        if kind in ("add", "sum", "mul", "shl"):
            return True
        if kind == "row":
            if self.phase == "one":
                return not slots_are_bits
            return not (is_root and slots_are_bits)
        if kind in ("fas", "fac", "has", "hac"):
            return self.phase == "two"
        if kind in self.gate_delay:
            return False
        raise ValueError(f"unknown node kind {kind!r}")

    def table(self) -> dict:
        out = {}
        for kind in ("var", "const", "and", "or", "xor", "not", "has", "hac", "fas", "fac"):
            out[kind] = "penalty" if self.offends(kind) else self.gate_delay[kind]
        for kind in ("add", "sum", "mul", "shl"):
            out[kind] = "penalty"
        out["row"] = ("max over single-bit slots" if self.phase == "one"
                      else "max over single-bit slots at the root, else penalty")
        return out


def node_cost(model: CostModel, kind: str, child_costs, slots_are_bits: bool = False,
              is_root: bool = False, weight: int = 1) -> Cost:
    """Cost of one node given its children's costs.

    Delay is encoded as ``penalty * pending + real``: penalized nodes add
    ``weight`` units of pending work (summed over the fan-out-one tree) and
    pass the real max-plus delay of their operands through.
    """
    child_costs = list(child_costs)
    P = model.penalty
    pending = sum(c.delay // P for c in child_costs)
    real = max((c.delay % P for c in child_costs), default=0)
    a = sum(c.area for c in child_costs)
    if model.offends(kind, slots_are_bits, is_root):
        return Cost(P * (pending + max(weight, 1)) + real, a + model.penalty_area)
    if kind == "row":
        return Cost(P * pending + real, a + 1)
    return Cost(P * pending + model.gate_delay[kind] + real, a + GATE_AREA[kind])


def _row_len(node) -> int:
    return len(node[2]) if node is not None and node[0] == "row" else 1


def pending_weight(kind: str, kids_choice: list) -> int:
    """Work units an offending node stands for; ``kids_choice`` holds the
    chosen node of each child class."""
    if kind == "add":
        return 1 + sum(_row_len(k) - 1 for k in kids_choice)
    if kind == "row":
        return sum(_row_len(k) - 1 for k in kids_choice)
    if kind == "sum":
        return sum(_row_len(k) for k in kids_choice)
    if kind == "mul":
        return _row_len(kids_choice[0]) * _row_len(kids_choice[1])
    return 1


def term_cost(model: CostModel, t: Term, root_is_output: bool = True) -> Cost:
    """Fan-out-one cost of a term tree (shared subterms counted per use)."""
    memo: dict[Term, Cost] = {}
    for n in postorder(t):
        kids = [memo[c] for c in n.children]
        bits = n.op == "row" and all(c.is_bit for c in n.children)
        w = pending_weight(n.op, [(c.op, c.arg, c.children) for c in n.children])
        memo[n] = node_cost(model, n.op, kids, bits, n is t and root_is_output, w)
    return memo[t]


def gate_depth(t: Term) -> int:
    """Longest gate path of a gate-level term (cells count their delay)."""
    memo: dict[Term, int] = {}
    for n in postorder(t):
        d = max((memo[c] for c in n.children), default=0)
        memo[n] = d + GATE_DELAY.get(n.op, 0)
    return memo[t]


def best_costs(g: EGraph, model: CostModel):
    """Settle every reachable class; returns (class -> Cost, class -> node)."""
    find = g.find
    nodes = []
    for node, cid in g.memo.items():
        nodes.append((node, find(cid)))
    parents: dict[int, list[int]] = {}
    pending = [0] * len(nodes)
    heap = []
    for i, (node, cid) in enumerate(nodes):
        kids = set(node[2])
        pending[i] = len(kids)
        for k in kids:
            parents.setdefault(k, []).append(i)
    best: dict[int, Cost] = {}
    choice: dict[int, tuple] = {}
    bits = g.bits
    root = g.root

    def cost_of(i):
        node, cid = nodes[i]
        kids = node[2]
        slots_bits = node[0] == "row" and all(k in bits for k in kids)
        w = pending_weight(node[0], [choice[k] for k in kids])
        return node_cost(model, node[0], [best[k] for k in kids], slots_bits, cid == root, w)

    for i, (node, cid) in enumerate(nodes):
        if pending[i] == 0:
            c = cost_of(i)
            heapq.heappush(heap, (c.delay, c.area, i))
    while heap:
        d, a, i = heapq.heappop(heap)
        node, cid = nodes[i]
        if cid in best:
            continue
        best[cid] = Cost(d, a)
        choice[cid] = node
        for j in parents.get(cid, ()):
            pending[j] -= 1
            if pending[j] == 0 and nodes[j][1] not in best:
                c = cost_of(j)
                heapq.heappush(heap, (c.delay, c.area, j))
    return best, choice


def realize(choice: dict[int, tuple], cid: int) -> Term:
    memo: dict[int, Term] = {}
    stack = [cid]
    while stack:
        c = stack[-1]
        if c in memo:
            stack.pop()
            continue
        node = choice[c]
        todo = [k for k in node[2] if k not in memo]
        if todo:
            stack.extend(todo)
            continue
        stack.pop()
        memo[c] = Term(node[0], [memo[k] for k in node[2]], node[1])
    return memo[cid]


def extract(g: EGraph, root: int | None, model: CostModel, allow_penalty: bool = False):
    """Cheapest fan-out-one realization of ``root`` -> (Term, Cost)."""
    g.rebuild()
    root = g.find(g.root if root is None else root)
    saved = g.root
    g.root = root
    try:
        best, choice = best_costs(g, model)
    finally:
        g.root = saved
    if root not in best:
        raise ShapeUnreachable(model.phase, None, "root has no finite realization")
    cost = best[root]
    if cost.delay >= model.penalty and not allow_penalty:
        raise ShapeUnreachable(model.phase, cost)
    return realize(choice, root), cost
