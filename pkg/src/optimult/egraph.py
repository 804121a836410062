"""Congruence-closed e-graph with pattern e-matching and a saturation loop.

E-nodes are plain tuples ``(op, arg, kids)`` where ``kids`` is a tuple of
e-class ids. Rewrite right-hand sides are "recipes": either an e-class id or
a tuple ``(op, arg, kids)`` whose kids are again recipes.
"""
from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from typing import Iterator

from .term import BIT_OPS, Term, TermError, postorder, tokenize, ParseError


class StopReason(str, enum.Enum):
    SATURATED = "saturated"
    ITERATION_LIMIT = "iteration_limit"
    NODE_LIMIT = "node_limit"


@dataclass
class RunLimits:
    max_iterations: int = 16
    max_nodes: int = 100_000
    match_cap: int = 100_000
    # backoff scheduling: a rule yielding more than backoff_matches << k
    # matches is skipped for ban_length << k iterations (k = times banned);
    # 0 disables it
    backoff_matches: int = 2_000
    ban_length: int = 4


@dataclass
class RunResult:
    stop_reason: StopReason
    iterations: int
    nodes: int
    classes: int
    seconds: float
    applied: dict = field(default_factory=dict)


class EGraph:
    def __init__(self, output_width: int | None = None):
        self._uf: list[int] = []
        self.memo: dict[tuple, int] = {}
        self.classes: dict[int, list[tuple]] = {}
        self.bits: set[int] = set()
        # classes that only agree modulo 2**output_width
        self.modulo: set[int] = set()
        self.output_width = output_width
        self.root: int | None = None
        self.version = 0
        self._dirty = False
        self._index: dict[str, list[tuple[int, tuple]]] | None = None
        self._index_version = -1

    # union-find

    def find(self, x: int) -> int:
        uf = self._uf
        r = x
        while uf[r] != r:
            r = uf[r]
        while uf[x] != r:
            uf[x], x = r, uf[x]
        return r

    def canon(self, node: tuple) -> tuple:
        find = self.find
        return (node[0], node[1], tuple([find(k) for k in node[2]]))

    @property
    def node_count(self) -> int:
        return len(self.memo)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    # construction

    def add(self, node: tuple) -> int:
        node = self.canon(node)
        cid = self.memo.get(node)
        if cid is not None:
            return self.find(cid)
        cid = len(self._uf)
        self._uf.append(cid)
        self.memo[node] = cid
        self.classes[cid] = [node]
        if node[0] in BIT_OPS:
            self.bits.add(cid)
        self.version += 1
        return cid

    def add_term(self, t: Term, ids: dict | None = None) -> int:
        ids = {} if ids is None else ids
        for n in postorder(t):
            if n not in ids:
                ids[n] = self.add((n.op, n.arg, tuple(ids[c] for c in n.children)))
        return ids[t]

    def add_recipe(self, r) -> int:
        if isinstance(r, int):
            return self.find(r)
        # explicit stack: add chains built by some rules can be long
        done: dict[int, int] = {}
        stack = [r]
        while stack:
            cur = stack[-1]
            if id(cur) in done:
                stack.pop()
                continue
            todo = [k for k in cur[2] if not isinstance(k, int) and id(k) not in done]
            if todo:
                stack.extend(todo)
                continue
            stack.pop()
            op, arg, kids = cur
            ids = tuple(self.find(k) if isinstance(k, int) else done[id(k)] for k in kids)
            done[id(cur)] = self.add((op, arg, ids))
        return done[id(r)]

    def union(self, a: int, b: int) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if b < a:
            a, b = b, a
        self._uf[b] = a
        self.classes[a].extend(self.classes.pop(b))
        if b in self.bits:
            self.bits.add(a)
        if b in self.modulo:
            self.modulo.add(a)
        if self.root == b:
            self.root = a
        self._dirty = True
        self.version += 1
        return True

    def rebuild(self) -> None:
        """Restore the congruence invariant (full re-canonicalization)."""
        if not self._dirty:
            return
        find = self.find
        while True:
            merged = False
            new: dict[tuple, int] = {}
            for node, cid in self.memo.items():
                cn = (node[0], node[1], tuple([find(k) for k in node[2]]))
                c = find(cid)
                other = new.get(cn)
                if other is None:
                    new[cn] = c
                else:
                    other = find(other)
                    if other != c:
                        self.union(other, c)
                        merged = True
            self.memo = new
            if not merged:
                break
        classes: dict[int, list[tuple]] = {}
        for node, cid in self.memo.items():
            classes.setdefault(cid, []).append(node)
        self.classes = classes
        self.bits = {find(c) for c in self.bits}
        self.modulo = {find(c) for c in self.modulo}
        if self.root is not None:
            self.root = find(self.root)
        self._dirty = False
        self._index = None

    # queries

    def index(self) -> dict[str, list[tuple[int, tuple]]]:
        """op -> [(class, node)] over the current (rebuilt) graph."""
        if self._index is None or self._index_version != self.version:
            idx: dict[str, list[tuple[int, tuple]]] = {}
            for node, cid in self.memo.items():
                idx.setdefault(node[0], []).append((cid, node))
            self._index = idx
            self._index_version = self.version
        return self._index

    def nodes(self, cid: int) -> list[tuple]:
        return self.classes[self.find(cid)]

    def first(self, cid: int, op: str) -> tuple | None:
        for node in self.classes[self.find(cid)]:
            if node[0] == op:
                return node
        return None

    def is_bit(self, cid: int) -> bool:
        return self.find(cid) in self.bits

    def is_const(self, cid: int, value: int) -> bool:
        for node in self.classes[self.find(cid)]:
            if node[0] == "const" and node[1] == value:
                return True
        return False

    def lookup_term(self, t: Term) -> int | None:
        ids: dict[Term, int] = {}
        for n in postorder(t):
            key = (n.op, n.arg, tuple(ids[c] for c in n.children))
            cid = self.memo.get(self.canon(key))
            if cid is None:
                return None
            ids[n] = self.find(cid)
        return ids[t]

    def dump(self) -> str:
        """Class -> node list, for debugging."""
        out = {}
        for cid in sorted(self.classes):
            out[str(cid)] = [_node_text(n) for n in self.classes[cid]]
        return json.dumps({"root": self.root, "classes": out}, indent=1)


def _node_text(node):
    op, arg, kids = node
    if op == "var":
        return f"{arg[0]}{arg[1]}"
    if op == "const":
        return str(arg)
    head = f"shl{arg}" if op == "shl" else op
    return "(" + " ".join([head] + [f"#{k}" for k in kids]) + ")"


# patterns

@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PRest:
    name: str


@dataclass(frozen=True)
class PNode:
    op: str
    arg: object
    children: tuple
    rest: str | None = None


def parse_pattern(text: str):
    """S-expression pattern: ``?x`` binds a class, ``?x...`` binds the
    trailing operands of a ``row``/``sum``."""
    toks = tokenize(text)
    pat, i = _pat_at(toks, 0)
    if i != len(toks):
        raise ParseError("trailing input in pattern", toks[i][1])
    return pat


def _pat_at(toks, i):
    if i >= len(toks):
        raise ParseError("unexpected end of pattern", 0)
    tok, pos = toks[i]
    if tok == "(":
        head = toks[i + 1][0]
        arg = None
        if head.startswith("shl") and head[3:].isdigit():
            op, arg = "shl", int(head[3:])
        else:
            op = head
        i += 2
        kids = []
        rest = None
        while toks[i][0] != ")":
            if toks[i][0].startswith("?") and toks[i][0].endswith("..."):
                rest = toks[i][0][1:-3]
                i += 1
                if toks[i][0] != ")":
                    raise ParseError("rest binder must be last", toks[i][1])
                break
            kid, i = _pat_at(toks, i)
            kids.append(kid)
        if rest is not None and op not in ("row", "sum"):
            raise ParseError(f"rest binder not allowed under {op}", pos)
        return PNode(op, arg, tuple(kids), rest), i + 1
    if tok.startswith("?"):
        return PVar(tok[1:]), i + 1
    if tok in ("0", "1"):
        return PNode("const", int(tok), ()), i + 1
    if tok[0].isalpha() and tok[1:].isdigit():
        return PNode("var", (tok[0], int(tok[1:])), ()), i + 1
    raise ParseError(f"bad pattern atom {tok!r}", pos)


def pattern_vars(pat) -> list[PVar | PRest]:
    out = []
    def go(x):
        if isinstance(x, PNode):
            for c in x.children:
                go(c)
            if x.rest is not None:
                out.append(PRest(x.rest))
        elif x not in out:
            out.append(x)
    go(pat)
    return out


def _match_class(g: EGraph, pat, cid: int, subst: dict) -> Iterator[dict]:
    if type(pat) is PVar:
        bound = subst.get(pat.name)
        if bound is None:
            s = dict(subst)
            s[pat.name] = cid
            yield s
        elif bound == cid:
            yield subst
        return
    for node in g.classes[cid]:
        if node[0] == pat.op and node[1] == pat.arg:
            yield from _match_node(g, pat, node, subst)


def _match_node(g: EGraph, pat: PNode, node: tuple, subst: dict) -> Iterator[dict]:
    kids = node[2]
    n = len(pat.children)
    if pat.rest is None:
        if len(kids) != n:
            return
    elif len(kids) < n:
        return
    yield from _match_seq(g, pat, kids, 0, subst)


def _match_seq(g, pat, kids, i, subst):
    if i == len(pat.children):
        if pat.rest is not None:
            rest = tuple(kids[i:])
            bound = subst.get(pat.rest)
            if bound is None:
                s = dict(subst)
                s[pat.rest] = rest
                yield s
            elif bound == rest:
                yield subst
        else:
            yield subst
        return
    for s in _match_class(g, pat.children[i], kids[i], subst):
        yield from _match_seq(g, pat, kids, i + 1, s)


def _compile(pat):
    """Pattern -> function(classes, class_id, substs) -> extended substs.

    Substitutions are dicts; the compiled form avoids generator overhead in
    the inner loop, which dominates saturation time."""
    if type(pat) is PVar:
        name = pat.name

        def m_var(classes, cid, substs):
            out = []
            for s in substs:
                b = s.get(name)
                if b is None:
                    s = dict(s)
                    s[name] = cid
                    out.append(s)
                elif b == cid:
                    out.append(s)
            return out
        return m_var
    node_m = _compile_node(pat)
    op, arg = pat.op, pat.arg

    def m_class(classes, cid, substs):
        out = []
        for node in classes[cid]:
            if node[0] == op and node[1] == arg:
                out.extend(node_m(classes, node, substs))
        return out
    return m_class


def _compile_node(pat: PNode):
    kids = [_compile(c) for c in pat.children]
    n = len(kids)
    rest = pat.rest

    def m_node(classes, node, substs):
        ks = node[2]
        if rest is None:
            if len(ks) != n:
                return []
        elif len(ks) < n:
            return []
        for i in range(n):
            substs = kids[i](classes, ks[i], substs)
            if not substs:
                return substs
        if rest is not None:
            tail = tuple(ks[n:])
            out = []
            for s in substs:
                b = s.get(rest)
                if b is None:
                    s = dict(s)
                    s[rest] = tail
                    out.append(s)
                elif b == tail:
                    out.append(s)
            return out
        return substs
    return m_node


_COMPILED: dict = {}


def ematch(g: EGraph, pat, limit: int | None = None) -> list[tuple[int, dict]]:
    """All (class, substitution) matches, in deterministic order; stops
    after ``limit`` matches when given."""
    if isinstance(pat, str):
        pat = parse_pattern(pat)
    if isinstance(pat, PVar):
        out = [(cid, {pat.name: cid}) for cid in sorted(g.classes)]
        return out if limit is None else out[:limit]
    m = _COMPILED.get(pat)
    if m is None:
        m = _COMPILED[pat] = _compile_node(pat)
    classes = g.classes
    out = []
    arg = pat.arg
    for cid, node in g.index().get(pat.op, ()):
        if node[1] != arg:
            continue
        found = m(classes, node, [{}])
        if len(found) > 1:
            seen = set()
            for s in found:
                key = tuple(sorted(s.items()))
                if key not in seen:
                    seen.add(key)
                    out.append((cid, s))
        elif found:
            out.append((cid, found[0]))
        if limit is not None and len(out) >= limit:
            return out[:limit]
    return out


def instantiate(pat, subst: dict):
    """Turn a pattern into a recipe under ``subst``."""
    if type(pat) is PVar:
        return subst[pat.name]
    kids = [instantiate(c, subst) for c in pat.children]
    if pat.rest is not None:
        kids.extend(subst[pat.rest])
    return (pat.op, pat.arg, tuple(kids))


def pattern_to_text(pat) -> str:
    if isinstance(pat, PVar):
        return "?" + pat.name
    if pat.op == "const":
        return str(pat.arg)
    if pat.op == "var":
        return f"{pat.arg[0]}{pat.arg[1]}"
    head = f"shl{pat.arg}" if pat.op == "shl" else pat.op
    parts = [head] + [pattern_to_text(c) for c in pat.children]
    if pat.rest is not None:
        parts.append(f"?{pat.rest}...")
    return "(" + " ".join(parts) + ")"


# saturation

def run(g: EGraph, rules, limits: RunLimits | None = None) -> RunResult:
    """Constructive rewriting until saturation or a limit trips."""
    limits = limits or RunLimits()
    t0 = time.perf_counter()
    g.rebuild()
    applied: dict[str, int] = {}
    banned_until = {r.name: 0 for r in rules}
    times_banned = {r.name: 0 for r in rules}
    iterations = 0
    stop = StopReason.ITERATION_LIMIT
    while iterations < limits.max_iterations:
        start = g.version
        batches = []
        for rule in rules:
            if banned_until[rule.name] > iterations:
                continue
            cap = limits.match_cap
            threshold = None
            if limits.backoff_matches:
                threshold = limits.backoff_matches << times_banned[rule.name]
                cap = min(cap, threshold + 1)
            ms = rule.search(g, cap)
            if threshold is not None and len(ms) > threshold:
                banned_until[rule.name] = iterations + 1 + (limits.ban_length << times_banned[rule.name])
                times_banned[rule.name] += 1
                continue
            batches.append((rule, ms[: limits.match_cap]))
        hit_limit = False
        for rule, ms in batches:
            n = 0
            for cid, rhs in ms:
                new = g.add_recipe(rhs)
                if g.union(cid, new):
                    n += 1
                    if rule.modulo:
                        g.modulo.add(g.find(cid))
                if g.node_count > limits.max_nodes:
                    hit_limit = True
                    break
            if n:
                applied[rule.name] = applied.get(rule.name, 0) + n
            if hit_limit:
                break
        g.rebuild()
        iterations += 1
        if hit_limit or g.node_count > limits.max_nodes:
            stop = StopReason.NODE_LIMIT
            break
        if g.version == start:
            waiting = [u for u in banned_until.values() if u > iterations]
            if not waiting:
                stop = StopReason.SATURATED
                break
            # nothing else to do: lift the bans early
            for name in banned_until:
                banned_until[name] = 0
    return RunResult(stop, iterations, g.node_count, g.class_count,
                     time.perf_counter() - t0, applied)


__all__ = [
    "EGraph", "RunLimits", "RunResult", "StopReason", "PVar", "PRest", "PNode",
    "parse_pattern", "ematch", "instantiate", "run", "pattern_vars", "TermError",
]
