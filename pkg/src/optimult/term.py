"""Arithmetic/logic term IR with an integer valuation semantics.

Terms are interned: structurally equal terms are the same object, so large
fan-out-one trees produced by extraction stay DAG-shaped in memory and every
traversal below memoizes on identity.
"""
from __future__ import annotations

import re
import weakref
from typing import Iterable, Mapping

import numpy as np

# op -> allowed arity (None: variable)
ARITY = {
    "var": 0,
    "const": 0,
    "and": 2,
    "or": 2,
    "xor": 2,
    "not": 1,
    "add": 2,
    "row": None,
    "sum": None,
    "shl": 1,
    "mul": 2,
    "fas": 3,
    "fac": 3,
    "has": 2,
    "hac": 2,
}
MIN_ARITY = {"row": 1, "sum": 2}

GATE_OPS = frozenset({"and", "or", "xor", "not"})
CELL_OPS = frozenset({"fas", "fac", "has", "hac"})
# kinds whose value is always in {0, 1}
BIT_OPS = frozenset({"var", "const"}) | GATE_OPS | CELL_OPS
ARITH_OPS = frozenset({"add", "row", "sum", "shl", "mul"})


class TermError(ValueError):
    pass


class UnboundVariable(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unbound variable {self.name}"


class ParseError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at offset {pos}")
        self.pos = pos


class Term:
    """Immutable, interned expression node.

    ``arg`` carries the node parameter: ``(name, index)`` for variables, the
    bit for constants and the shift amount for ``shl``.
    """

    __slots__ = ("op", "arg", "children", "_hash", "__weakref__")
    _table: "weakref.WeakValueDictionary[tuple, Term]" = weakref.WeakValueDictionary()

    def __new__(cls, op: str, children: Iterable["Term"] = (), arg=None):
        children = tuple(children)
        key = (op, arg, children)
        t = cls._table.get(key)
        if t is not None:
            return t
        _check(op, arg, children)
        t = object.__new__(cls)
        t.op = op
        t.arg = arg
        t.children = children
        t._hash = hash(key)
        cls._table[key] = t
        return t

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __reduce__(self):
        return (Term, (self.op, self.children, self.arg))

    def __repr__(self):
        return serialize(self)

    @property
    def is_bit(self) -> bool:
        return self.op in BIT_OPS

    @property
    def name(self) -> str:
        if self.op != "var":
            raise TermError(f"{self.op} node has no name")
        return f"{self.arg[0]}{self.arg[1]}"


def _check(op, arg, children):
    if op not in ARITY:
        raise TermError(f"unknown operator {op!r}")
    arity = ARITY[op]
    n = len(children)
    if arity is None:
        if n < MIN_ARITY[op]:
            raise TermError(f"{op} needs at least {MIN_ARITY[op]} operands, got {n}")
    elif n != arity:
        raise TermError(f"{op} takes {arity} operands, got {n}")
    if op == "const" and arg not in (0, 1):
        raise TermError(f"constant must be 0 or 1, got {arg!r}")
    if op == "var" and not (isinstance(arg, tuple) and len(arg) == 2 and arg[1] >= 0):
        raise TermError(f"bad variable {arg!r}")
    if op == "shl" and not (isinstance(arg, int) and arg >= 0):
        raise TermError(f"bad shift amount {arg!r}")


# constructors

def var(name: str, index: int) -> Term:
    return Term("var", (), (name, index))


def p(i: int) -> Term:
    return var("p", i)


def q(i: int) -> Term:
    return var("q", i)


def const(c: int) -> Term:
    return Term("const", (), c)


ZERO = const(0)
ONE = const(1)


def and_(a, b):
    return Term("and", (a, b))


def or_(a, b):
    return Term("or", (a, b))


def xor(a, b):
    return Term("xor", (a, b))


def not_(a):
    return Term("not", (a,))


def add(a, b):
    return Term("add", (a, b))


def row(*slots):
    """Row with MSB-first slots."""
    return Term("row", slots)


def sum_(*operands):
    return Term("sum", operands)


def shl(a, k: int):
    return Term("shl", (a,), k)


def mul(a, b):
    return Term("mul", (a, b))


def fas(a, b, c):
    return Term("fas", (a, b, c))


def fac(a, b, c):
    return Term("fac", (a, b, c))


def has(a, b):
    return Term("has", (a, b))


def hac(a, b):
    return Term("hac", (a, b))


def add_chain(items) -> Term:
    """Left-associated ``add`` chain; a single item is returned as is."""
    items = list(items)
    if not items:
        return ZERO
    acc = items[0]
    for t in items[1:]:
        acc = add(acc, t)
    return acc


# traversal

def postorder(t: Term) -> list[Term]:
    """Distinct subterms, children before parents."""
    seen = set()
    out = []
    stack = [(t, False)]
    while stack:
        node, done = stack.pop()
        if done:
            out.append(node)
            continue
        if node in seen:
            continue
        seen.add(node)
        stack.append((node, True))
        for c in reversed(node.children):
            if c not in seen:
                stack.append((c, False))
    return out


def free_vars(t: Term) -> list[Term]:
    """Variables of ``t`` ordered by (name, index)."""
    vs = {n for n in postorder(t) if n.op == "var"}
    return sorted(vs, key=lambda v: v.arg)


def substitute(t: Term, mapping: Mapping[Term, Term]) -> Term:
    memo: dict[Term, Term] = {}
    for node in postorder(t):
        if node in mapping:
            memo[node] = mapping[node]
        elif node.children:
            memo[node] = Term(node.op, (memo[c] for c in node.children), node.arg)
        else:
            memo[node] = node
    return memo[t]


def tree_size(t: Term) -> int:
    """Node count of the fully expanded (fan-out-one) tree."""
    size: dict[Term, int] = {}
    for node in postorder(t):
        size[node] = 1 + sum(size[c] for c in node.children)
    return size[t]


# valuation

def apply_op(op, arg, vals):
    """Value of one node given child values; works on ints and numpy arrays."""
    if op == "and":
        return vals[0] & vals[1]
    if op == "or":
        return vals[0] | vals[1]
    if op == "xor":
        return vals[0] ^ vals[1]
    if op == "not":
        return 1 - vals[0]
    if op in ("add", "sum"):
        acc = vals[0]
        for v in vals[1:]:
            acc = acc + v
        return acc
    if op == "row":
        # slot-positional: slot i (from the LSB end) weighs 2**i
        acc = 0
        for i, v in enumerate(reversed(vals)):
            acc = acc + (v << i)
        return acc
    if op == "shl":
        return vals[0] << arg
    if op == "mul":
        return vals[0] * vals[1]
    if op == "fas":
        return vals[0] ^ vals[1] ^ vals[2]
    if op == "fac":
        a, b, c = vals
        return (a & b) | (c & (a ^ b))
    if op == "has":
        return vals[0] ^ vals[1]
    if op == "hac":
        return vals[0] & vals[1]
    raise TermError(f"cannot evaluate {op}")


def _leaf_value(node, env):
    if node.op == "const":
        return node.arg
    name = node.name
    if name not in env:
        raise UnboundVariable(name)
    return env[name]


def eval_term(t: Term, env: Mapping[str, int]) -> int:
    """Integer value of ``t`` with variables bound by name (``"p0"``)."""
    memo: dict[Term, int] = {}
    for node in postorder(t):
        if node.children:
            memo[node] = int(apply_op(node.op, node.arg, [memo[c] for c in node.children]))
        else:
            memo[node] = int(_leaf_value(node, env))
    return memo[t]


def eval_many(terms: list[Term], env: Mapping[str, np.ndarray]) -> list[np.ndarray]:
    """Vectorized valuation: ``env`` maps names to int64 arrays of samples."""
    memo: dict[Term, np.ndarray] = {}
    out = []
    for t in terms:
        for node in postorder(t):
            if node in memo:
                continue
            if node.children:
                memo[node] = apply_op(node.op, node.arg, [memo[c] for c in node.children])
            else:
                v = _leaf_value(node, env)
                memo[node] = v if isinstance(v, np.ndarray) else np.int64(v)
        out.append(memo[t])
    return out


# s-expression text form

_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")
_VAR = re.compile(r"([a-z])(\d+)$")
_SHL = re.compile(r"shl(\d+)$")


def tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.end() == pos:
            break
        tok = m.group(1) or m.group(2) or m.group(3)
        if tok is None:
            break
        out.append((tok, m.start(m.lastindex)))
        pos = m.end()
    return out


def parse(text: str) -> Term:
    toks = tokenize(text)
    if not toks:
        raise ParseError("empty input", 0)
    t, i = _parse_at(toks, 0, text)
    if i != len(toks):
        raise ParseError(f"trailing input {toks[i][0]!r}", toks[i][1])
    return t


def _parse_atom(tok, pos):
    if tok in ("0", "1"):
        return const(int(tok))
    m = _VAR.match(tok)
    if m:
        return var(m.group(1), int(m.group(2)))
    raise ParseError(f"bad atom {tok!r}", pos)


def _parse_at(toks, i, text):
    if i >= len(toks):
        raise ParseError("unexpected end of input", len(text))
    tok, pos = toks[i]
    if tok == ")":
        raise ParseError("unexpected ')'", pos)
    if tok != "(":
        return _parse_atom(tok, pos), i + 1
    if i + 1 >= len(toks):
        raise ParseError("unexpected end of input", len(text))
    head, hpos = toks[i + 1]
    arg = None
    m = _SHL.match(head)
    if m:
        op, arg = "shl", int(m.group(1))
    elif head in ARITY and head not in ("var", "const", "shl"):
        op = head
    else:
        raise ParseError(f"unknown operator {head!r}", hpos)
    i += 2
    kids = []
    while True:
        if i >= len(toks):
            raise ParseError("missing ')'", len(text))
        if toks[i][0] == ")":
            i += 1
            break
        kid, i = _parse_at(toks, i, text)
        kids.append(kid)
    try:
        return Term(op, kids, arg), i
    except TermError as e:
        raise ParseError(str(e), pos) from None


def serialize(t: Term) -> str:
    memo: dict[Term, str] = {}
    for node in postorder(t):
        if node.op == "const":
            memo[node] = str(node.arg)
        elif node.op == "var":
            memo[node] = node.name
        else:
            head = f"shl{node.arg}" if node.op == "shl" else node.op
            memo[node] = "(" + " ".join([head] + [memo[c] for c in node.children]) + ")"
    return memo[t]
