"""Rewrite catalogue: array reduction (phase one), gate-level Boolean
rewriting (phase two) and the divide-and-conquer pre-pass.

Every rule is a :class:`Rewrite` whose ``search`` returns ``(class, recipe)``
pairs over a rebuilt e-graph. Static rules come from pattern pairs; dynamic
rules build their right-hand side from the matched classes at runtime.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .egraph import (EGraph, PNode, PRest, PVar, ematch, instantiate,
                     parse_pattern, pattern_to_text)
from .term import (ONE, ZERO, Term, add, add_chain, and_, eval_many, fac, fas,
                   free_vars, hac, has, mul, not_, or_, postorder, row, shl,
                   sum_, var, xor)

PRE, ONE_PHASE, TWO_PHASE = "pre", "one", "two"
EXACT, MOD2W = "exact", "mod2w"


@dataclass(eq=False)
class Rewrite:
    name: str
    phase: str
    lhs: str
    rhs: str
    searcher: Callable[[EGraph], list]
    mode: str = EXACT
    samples: Callable[[], list] | None = None
    dynamic: bool = False
    extra: bool = False  # outside the core rule set

    @property
    def modulo(self) -> bool:
        return self.mode == MOD2W

    def search(self, g: EGraph, limit: int | None = None) -> list:
        if self.dynamic:
            return self.searcher(g)
        return self.searcher(g, limit)

    def describe(self) -> dict:
        return {"name": self.name, "phase": self.phase, "mode": self.mode,
                "dynamic": self.dynamic, "lhs": self.lhs, "rhs": self.rhs}


# recipe helpers

def R(op, *kids, arg=None):
    return (op, arg, tuple(kids))


def chain(items):
    items = list(items)
    if not items:
        return R("const", arg=0)
    acc = items[0]
    for x in items[1:]:
        acc = R("add", acc, x)
    return acc


def _zero():
    return R("const", arg=0)


# static rules

def pattern_rule(name, phase, lhs, rhs, guard=None, extra=False, samples=None):
    lp, rp = parse_pattern(lhs), parse_pattern(rhs)

    def searcher(g, limit=None):
        out = []
        for cid, s in ematch(g, lp, limit):
            if guard is None or guard(g, s):
                out.append((cid, instantiate(rp, s)))
        return out

    return Rewrite(name, phase, pattern_to_text(lp), pattern_to_text(rp), searcher,
                   samples=samples or (lambda: pattern_samples(lp)), extra=extra)


def bits_guard(*names):
    def guard(g, s):
        return all(g.is_bit(s[n]) for n in names)
    return guard


def pattern_samples(pat, max_rest=3) -> list[Term]:
    """Ground instances of a pattern: holes become fresh bit variables, rest
    binders expand to 0..max_rest fresh bits (respecting arity)."""
    holes = []
    rests = []

    def scan(x):
        if isinstance(x, PVar):
            if x.name not in holes:
                holes.append(x.name)
        elif isinstance(x, PNode):
            for c in x.children:
                scan(c)
            if x.rest is not None and x.rest not in rests:
                rests.append(x.rest)
    scan(pat)
    hole_terms = {h: var(h, 0) for h in holes}
    out = []
    for lens in itertools.product(range(max_rest + 1), repeat=len(rests)):
        rest_terms = {r: [var(r, i + 1) for i in range(n)] for r, n in zip(rests, lens)}

        def build(x):
            if isinstance(x, PVar):
                return hole_terms[x.name]
            kids = [build(c) for c in x.children]
            if x.rest is not None:
                kids.extend(rest_terms[x.rest])
            return Term(x.op, kids, x.arg)
        try:
            out.append(build(pat))
        except ValueError:
            continue
    return out


# class helpers for dynamic rules

def _is_zero(g, cid):
    return g.is_const(cid, 0)


def _rows(g, cid):
    return [n for n in g.nodes(cid) if n[0] == "row"]


def _first_row(g, cid):
    return g.first(cid, "row")


def _as_row_slots(g, cid):
    """MSB-first slots of a class viewed as a row; bits are 1-slot rows."""
    r = _first_row(g, cid)
    if r is not None:
        return list(r[2])
    if g.is_bit(cid):
        return [g.find(cid)]
    return None


def leaves(g: EGraph, cid: int, limit: int = 64) -> list[int]:
    """Operands of the ``add`` tree rooted at ``cid`` (modulo AC): expands
    non-bit classes through their first ``add`` node."""
    out: list[int] = []

    def go(c, seen):
        c = g.find(c)
        if len(out) >= limit:
            out.append(c)
            return
        if c in g.bits or c in seen:
            out.append(c)
            return
        node = g.first(c, "add")
        if node is None:
            out.append(c)
            return
        seen = seen | {c}
        go(node[2][0], seen)
        go(node[2][1], seen)

    go(cid, frozenset())
    return out


def _add_classes(g):
    seen = set()
    out = []
    for cid, _ in g.index().get("add", ()):
        if cid not in seen and cid not in g.bits:
            seen.add(cid)
            out.append(cid)
    return out


def _split_leaves(g, cid):
    ls = leaves(g, cid)
    nz = [x for x in ls if not _is_zero(g, x)]
    bits = [x for x in nz if x in g.bits]
    others = [x for x in nz if x not in g.bits]
    return ls, nz, bits, others


# phase one: dynamic rules

def _search_place_fa(g):
    out = []
    for cid in _add_classes(g):
        _, _, bits, others = _split_leaves(g, cid)
        if len(bits) < 3:
            continue
        k = len(bits) // 3
        cells = []
        for t in range(k):
            a, b, c = bits[3 * t: 3 * t + 3]
            cells.append(R("row", R("fac", a, b, c), R("fas", a, b, c)))
        out.append((cid, chain(bits[3 * k:] + cells + others)))
    return out


def _search_place_ha(g):
    out = []
    for cid in _add_classes(g):
        _, _, bits, others = _split_leaves(g, cid)
        if len(bits) != 2 or bits[0] == bits[1]:
            continue
        a, b = bits
        out.append((cid, chain(others + [R("row", R("hac", a, b), R("has", a, b))])))
    return out


def _search_add_same(g):
    out = []
    for cid in _add_classes(g):
        _, _, bits, others = _split_leaves(g, cid)
        counts: dict[int, int] = {}
        for b in bits:
            counts[b] = counts.get(b, 0) + 1
        if all(n < 2 for n in counts.values()):
            continue
        singles, pairs = [], []
        done = set()
        for b in bits:
            if b in done:
                continue
            done.add(b)
            pairs.extend([b] * (counts[b] // 2))
            if counts[b] % 2:
                singles.append(b)
        cells = [R("row", b, _zero()) for b in pairs]
        out.append((cid, chain(singles + cells + others)))
    return out


def _search_add_zero(g):
    out = []
    for cid in _add_classes(g):
        ls, nz, _, _ = _split_leaves(g, cid)
        if len(nz) == len(ls):
            continue
        out.append((cid, nz[0] if len(nz) == 1 else chain(nz)))
    return out


def _search_row_add(g):
    out = []
    for cid in _add_classes(g):
        _, nz, _, _ = _split_leaves(g, cid)
        if len(nz) < 2:
            continue
        rows = []
        plain = []
        for x in nz:
            r = None if x in g.bits else _first_row(g, x)
            if r is None:
                plain.append(x)
            else:
                rows.append(r[2])
        if not rows:
            continue
        width = max(len(r) for r in rows)
        slots: list[list] = [[] for _ in range(width)]  # LSB-first
        slots[0].extend(plain)
        for r in rows:
            for i, x in enumerate(reversed(r)):
                if not _is_zero(g, x):
                    slots[i].append(x)
        out.append((cid, R("row", *[chain(s) if len(s) != 1 else s[0]
                                    for s in reversed(slots)])))
    return out


def _search_sum_of_bits(g):
    out = []
    for cid, node in g.index().get("sum", ()):
        kids = node[2]
        if all(k in g.bits for k in kids):
            out.append((cid, chain(kids)))
    return out


def _search_sum_of_rows(g):
    out = []
    for cid, node in g.index().get("sum", ()):
        kids = node[2]
        if all(k in g.bits for k in kids):
            continue
        rows = [_as_row_slots(g, k) for k in kids]
        if any(r is None for r in rows):
            continue
        width = max(len(r) for r in rows)
        padded = [[None] * (width - len(r)) + list(r) for r in rows]
        cols = []
        for i in range(width):
            cols.append(R("sum", *[x if x is not None else _zero() for x in (r[i] for r in padded)]))
        out.append((cid, R("row", *cols)))
    return out


def _max_sum_arity(g):
    # mutually nested sum classes would otherwise flatten without bound
    return 2 * g.output_width if g.output_width else 64


def _search_sum_flatten(g):
    out = []
    cap = _max_sum_arity(g)
    for cid, node in g.index().get("sum", ()):
        kids = node[2]
        flat = []
        changed = False
        for k in kids:
            inner = g.first(k, "sum") if k != cid else None
            if inner is not None:
                flat.extend(inner[2])
                changed = True
            else:
                flat.append(k)
        if changed and len(flat) <= cap:
            out.append((cid, R("sum", *flat)))
    return out


def _search_constant_merge(g):
    """Fold two slot-disjoint operand rows of a sum into one row."""
    out = []
    for cid, node in g.index().get("sum", ()):
        kids = node[2]
        rows = [_as_row_slots(g, k) for k in kids]
        found = None
        for i, j in itertools.combinations(range(len(kids)), 2):
            a, b = rows[i], rows[j]
            if a is None or b is None:
                continue
            width = max(len(a), len(b))
            a2 = [None] * (width - len(a)) + a
            b2 = [None] * (width - len(b)) + b
            merged = []
            for x, y in zip(a2, b2):
                xz = x is None or _is_zero(g, x)
                yz = y is None or _is_zero(g, y)
                if xz:
                    merged.append(y if y is not None else x)
                elif yz:
                    merged.append(x)
                else:
                    merged = None
                    break
            if merged is not None:
                found = (i, j, [m if m is not None else _zero() for m in merged])
                break
        if found is None:
            continue
        i, j, merged = found
        rest = [k for t, k in enumerate(kids) if t not in (i, j)]
        merged_row = R("row", *merged)
        out.append((cid, merged_row if not rest else R("sum", merged_row, *rest)))
    return out


def _search_row_of_rows(g):
    out = []
    for cid, node in g.index().get("row", ()):
        if len(node[2]) != 2:
            continue
        a, b = node[2]
        ra = next((r for r in _rows(g, a) if len(r[2]) == 2), None)
        rb = next((r for r in _rows(g, b) if len(r[2]) == 2), None)
        if ra is None or rb is None:
            continue
        a1, a0 = ra[2]
        b1, b0 = rb[2]
        out.append((cid, R("row", a1, R("sum", R("row", a0), R("row", b1)), b0)))
    return out


def row_of_rows_general(n: int) -> Rewrite:
    """The general row-of-rows shape for inner rows of length ``n``; not
    shipped (unsound for n > 2 under slot-positional rows)."""

    def searcher(g):
        out = []
        for cid, node in g.index().get("row", ()):
            if len(node[2]) != 2:
                continue
            ra = next((r for r in _rows(g, node[2][0]) if len(r[2]) == n), None)
            rb = next((r for r in _rows(g, node[2][1]) if len(r[2]) == n), None)
            if ra is None or rb is None:
                continue
            a, b = ra[2], rb[2]
            out.append((cid, R("row", a[0], R("sum", R("row", *a[1:]), R("row", *b[:-1])), b[-1])))
        return out

    def samples():
        a = [var("a", i) for i in reversed(range(n))]
        b = [var("b", i) for i in reversed(range(n))]
        return [row(row(*a), row(*b))]

    return Rewrite(f"row-of-rows-n{n}", ONE_PHASE, "(row (row ?a...) (row ?b...))",
                   "(row a_{n-1} (sum (row a_{n-2}..a_0) (row b_{n-1}..b_1)) b_0)",
                   searcher, samples=samples, dynamic=True)


def _distribute(g, slots, chosen):
    """Spread row-valued slots into their parent row. ``slots`` is MSB-first,
    ``chosen`` maps an LSB slot index to the inner row's MSB-first slots."""
    n = len(slots)
    lsb = list(reversed(slots))
    width = n
    for i, inner in chosen.items():
        width = max(width, i + len(inner))
    acc: list[list] = [[] for _ in range(width)]
    for i in range(n):
        if i in chosen:
            for j, x in enumerate(reversed(chosen[i])):
                if not _is_zero(g, x):
                    acc[i + j].append(x)
        elif not _is_zero(g, lsb[i]):
            acc[i].insert(0, lsb[i])
    out = []
    for entries in reversed(acc):
        out.append(_zero() if not entries else entries[0] if len(entries) == 1 else chain(entries))
    return R("row", *out)


def _search_carry_merge(g, max_alternatives=2):
    out = []
    for cid, node in g.index().get("row", ()):
        slots = node[2]
        lsb = list(reversed(slots))
        options: dict[int, list] = {}
        for i, s in enumerate(lsb):
            if s in g.bits or s == cid:
                continue
            rs = [r[2] for r in _rows(g, s) if r is not node]
            if rs:
                options[i] = rs[:max_alternatives]
        if not options:
            continue
        base = {i: rs[0] for i, rs in options.items()}
        out.append((cid, _distribute(g, slots, base)))
        for i, rs in options.items():
            for alt in rs[1:]:
                variant = dict(base)
                variant[i] = alt
                out.append((cid, _distribute(g, slots, variant)))
    return out


def _column_leaves(g, cid):
    """Bit operands of a row slot, or None when the slot is not a bit or a
    pure addition of bits."""
    if cid in g.bits:
        return [] if _is_zero(g, cid) else [cid]
    if g.first(cid, "add") is None:
        return None
    ls = [x for x in leaves(g, cid) if not _is_zero(g, x)]
    if not all(x in g.bits for x in ls):
        return None
    return ls


def compress_columns(cols, half_adders=True):
    """One reduction stage over LSB-first columns of bit operands (recipes):
    each full triple becomes a full adder, a leftover pair a half adder.
    Returns the new LSB-first columns, one longer when a carry leaves the top."""
    out: list[list] = [[] for _ in range(len(cols) + 1)]
    for i, col in enumerate(cols):
        k = len(col) // 3
        for t in range(k):
            a, b, c = col[3 * t: 3 * t + 3]
            out[i].append(R("fas", a, b, c))
            out[i + 1].append(R("fac", a, b, c))
        rest = col[3 * k:]
        if len(rest) == 2 and half_adders:
            out[i].append(R("has", *rest))
            out[i + 1].append(R("hac", *rest))
        else:
            out[i].extend(rest)
    if not out[-1]:
        out.pop()
    return out


def _columns_to_row(cols):
    slots = []
    for entries in reversed(cols):
        slots.append(_zero() if not entries else entries[0] if len(entries) == 1 else chain(entries))
    return R("row", *slots)


def _search_compress_stage(g):
    out = []
    for cid, node in g.index().get("row", ()):
        cols = []
        for s in reversed(node[2]):
            ls = _column_leaves(g, s)
            if ls is None:
                cols = None
                break
            cols.append(ls)
        if cols is None or all(len(c) <= 1 for c in cols):
            continue
        out.append((cid, _columns_to_row(compress_columns(cols))))
        if any(len(c) % 3 == 2 for c in cols):
            out.append((cid, _columns_to_row(compress_columns(cols, half_adders=False))))
    return out


def _search_msb_truncate(g):
    w = g.output_width
    if w is None or g.root is None:
        return []
    out = []
    for node in g.nodes(g.root):
        if node[0] == "row" and len(node[2]) > w:
            out.append((g.root, R("row", *node[2][-w:])))
    return out


def _search_repeated_bit(g):
    w = g.output_width
    if w is None:
        return []
    out = []
    for cid, node in g.index().get("row", ()):
        slots = node[2]
        if len(slots) != w:
            continue
        a = slots[0]
        if a not in g.bits or _is_zero(g, a) or g.is_const(a, 1):
            continue
        k = 1
        while k < len(slots) and slots[k] == a:
            k += 1
        if k < 2:
            continue
        m = len(slots) - k
        ones = R("row", *([R("const", arg=1)] * k), *slots[k:])
        if m == 0:
            corr = R("not", a)
        else:
            corr = R("row", R("not", a), *([_zero()] * m))
        out.append((cid, R("sum", ones, corr)))
    return out


def _search_and_array(g):
    out = []
    for cid, node in g.index().get("mul", ()):
        ra = _first_row(g, node[2][0])
        rb = _first_row(g, node[2][1])
        if ra is None or rb is None:
            continue
        a, b = ra[2], rb[2]
        if not all(x in g.bits for x in a + b):
            continue
        # squaring: operands sort by slot weight so p_i*p_j and p_j*p_i share a node
        same = tuple(a) == tuple(b)
        rows = []
        for j, bj in enumerate(reversed(b)):
            slots = []
            for pos, ai in enumerate(a):
                if ai == bj:
                    slots.append(ai)
                elif same and len(a) - 1 - pos < j:
                    slots.append(R("and", bj, ai))
                else:
                    slots.append(R("and", ai, bj))
            rows.append(R("row", *slots, *([_zero()] * j)))
        out.append((cid, rows[0] if len(rows) == 1 else R("sum", *rows)))
    return out


# pre-pass

def split_product(a: list, b: list):
    """Four half-width products of MSB-first operand slot lists (even length)."""
    n = len(a)
    h = n // 2
    ah, al = a[:h], a[h:]
    bh, bl = b[:h], b[h:]
    return [(ah, bh, n), (ah, bl, h), (al, bh, h), (al, bl, 0)]


def _search_dnc(g):
    out = []
    for cid, node in g.index().get("mul", ()):
        ra = _first_row(g, node[2][0])
        rb = _first_row(g, node[2][1])
        if ra is None or rb is None:
            continue
        a, b = list(ra[2]), list(rb[2])
        if len(a) != len(b) or len(a) % 2 or len(a) < 2:
            continue
        parts = []
        for x, y, k in split_product(a, b):
            m = R("mul", R("row", *x), R("row", *y))
            parts.append(R("shl", m, arg=k) if k else m)
        out.append((cid, R("sum", *parts)))
    return out


def _search_shl_normalize(g):
    out = []
    for cid, node in g.index().get("shl", ()):
        k = node[1]
        slots = _as_row_slots(g, node[2][0])
        if slots is None:
            continue
        out.append((cid, R("row", *slots, *([_zero()] * k))))
    return out


def dynamic(name, phase, lhs, rhs, searcher, samples, mode=EXACT, extra=False):
    return Rewrite(name, phase, lhs, rhs, searcher, mode=mode, samples=samples,
                   dynamic=True, extra=extra)


def _v(name, i=0):
    return var(name, i)


def _bits(name, k):
    return [var(name, i) for i in range(k)]


def compress_stage_rule() -> Rewrite:
    """One Wallace-style column compression stage per application. Opt-in:
    it reaches a row of bits in fewer iterations, but the designs it leads to
    are usually deeper than those found cell by cell."""
    a, b, c, d, e, f = (_v(x) for x in "abcdef")
    return dynamic("compress-stage", ONE_PHASE, "(row (add ..) .. (add ..))",
                   "(row .. (add (fac ..) (hac ..) (fas ..) ..) ..)", _search_compress_stage,
                   lambda: [row(add_chain([a, b, c]), add(d, e)),
                            row(add(a, b), add_chain([c, d, e, f])),
                            row(add(a, b)), row(a, add_chain([b, c, d, e]), f),
                            row(add(a, a), add_chain([b, c, a]))],
                   extra=True)


def phase1_rules(compress_stage: bool = False) -> list[Rewrite]:
    a, b, c, d, e, f = (_v(x) for x in "abcdef")
    rules = [
        dynamic("place-half-adder", ONE_PHASE, "(add ?a ?b)", "(row (hac ?a ?b) (has ?a ?b))",
                _search_place_ha,
                lambda: [add(a, b), add(add(a, b), row(c, d)), add(add(ZERO, a), b)]),
        dynamic("place-full-adder", ONE_PHASE, "(add (add ?a ?b) ?c)",
                "(row (fac ?a ?b ?c) (fas ?a ?b ?c))", _search_place_fa,
                lambda: [add_chain([a, b, c]), add_chain([a, b, c, d]),
                         add_chain([a, b, c, d, e, f]), add(a, add(b, c)),
                         add_chain([a, b, a, c]), add_chain([a, row(b, c), d, e])]),
        dynamic("add-same", ONE_PHASE, "(add ?a ?a)", "(row ?a 0)", _search_add_same,
                lambda: [add(a, a), add_chain([a, b, a]), add_chain([a, a, a, b, b]),
                         add_chain([a, row(b, c), a])]),
        dynamic("row-add", ONE_PHASE, "(add ?a (row ?b...))", "(row ?b_{n-1} .. (add ?a ?b_0))",
                _search_row_add,
                lambda: [add(a, row(b, c)), add(row(b, c, d), a), add_chain([a, row(b, c), d]),
                         add(row(a, b), row(c, d, e)), add(a, row(b)),
                         add(row(a, ZERO), b)]),
        dynamic("sum-of-rows", ONE_PHASE, "(sum (row ?a...) (row ?b...))",
                "(row (sum ?a_{n-1} ?b_{n-1}) .. (sum ?a_0 ?b_0))", _search_sum_of_rows,
                lambda: [sum_(row(a, b), row(c, d, ZERO)), sum_(row(a, b, c), row(d), row(e, f)),
                         sum_(row(a, b), c)]),
        dynamic("sum-of-bits", ONE_PHASE, "(sum ?a ?b ?c...)", "(add (add ?a ?b) ?c ...)",
                _search_sum_of_bits,
                lambda: [sum_(a, b), sum_(a, b, c, d), sum_(ZERO, a, b)]),
        dynamic("row-of-rows", ONE_PHASE, "(row (row ?a1 ?a0) (row ?b1 ?b0))",
                "(row ?a1 (sum (row ?a0) (row ?b1)) ?b0)", _search_row_of_rows,
                lambda: [row(row(a, b), row(c, d))]),
        dynamic("carry-merge", ONE_PHASE, "(row .. ?e_{i+1} (row ?x_{m-1} .. ?x_0) ..)",
                "(row .. (add ?e_{i+1} ?x_1) ?x_0 ..)", _search_carry_merge,
                lambda: [row(a, row(b, c), d), row(row(a, b)), row(row(a, b), c),
                         row(a, b, row(c, d, e), f), row(row(a, b), row(c, d)),
                         row(a, row(b, c), row(d, e)), row(add(a, b), row(c, d))],
                extra=True),
        dynamic("msb-truncate", ONE_PHASE, "(row ?x ?r...) at root, longer than W",
                "(row ?r...)", _search_msb_truncate,
                lambda: [(row(a, b, c, d, e), 4), (row(a, b, c), 2), (row(a, b, c, d), 2)],
                mode=MOD2W, extra=True),
        dynamic("repeated-bit", ONE_PHASE, "(row ?a ?a .. ?a)", "(sum (row 1 .. 1) (not ?a))",
                _search_repeated_bit,
                lambda: [row(a, a, a), row(a, a), row(a, a, a, a), row(a, a, b, c),
                         row(a, a, a, b)], mode=MOD2W),
        dynamic("constant-merge", ONE_PHASE, "(sum (row ..) (row ..)) with disjoint slots",
                "(row ..)", _search_constant_merge,
                lambda: [sum_(row(ONE, ONE, ZERO), row(ZERO, ZERO, a)),
                         sum_(row(a, ZERO, b, ZERO), row(c, ZERO, d), row(e, f)),
                         sum_(row(a, b, ZERO, ZERO), row(c, d))]),
        dynamic("and-array", ONE_PHASE, "(mul (row ?a...) (row ?b...))",
                "(sum (row ?a_i&?b_0 ..) (row ?a_i&?b_1 .. 0) ..)", _search_and_array,
                lambda: [mul(row(a, b), row(c, d)), mul(row(a, b, c), row(d, e, f)),
                         mul(row(a, b), row(a, b)), mul(row(a), row(b))], extra=True),
        dynamic("add-zero", ONE_PHASE, "(add ?a 0)", "?a", _search_add_zero,
                lambda: [add(a, ZERO), add(ZERO, a), add_chain([ZERO, a, ZERO, b]),
                         add(ZERO, ZERO)], extra=True),
        dynamic("sum-flatten", ONE_PHASE, "(sum (sum ?a...) ?b...)", "(sum ?a... ?b...)",
                _search_sum_flatten,
                lambda: [sum_(sum_(a, b), c), sum_(a, sum_(b, c, d), row(e, f))]),
        pattern_rule("sum-swap", ONE_PHASE, "(sum ?a ?b ?c...)", "(sum ?b ?a ?c...)"),
        pattern_rule("row-single", ONE_PHASE, "(row ?a)", "?a", extra=True),
        pattern_rule("add-comm", ONE_PHASE, "(add ?a ?b)", "(add ?b ?a)"),
        pattern_rule("add-assoc", ONE_PHASE, "(add (add ?a ?b) ?c)", "(add ?a (add ?b ?c))"),
    ]
    if compress_stage:
        rules.append(compress_stage_rule())
    return rules


def phase2_rules() -> list[Rewrite]:
    P = pattern_rule
    rules = [
        P("half-adder-sum", TWO_PHASE, "(has ?a ?b)", "(xor ?a ?b)"),
        P("half-adder-carry", TWO_PHASE, "(hac ?a ?b)", "(and ?a ?b)"),
        P("full-adder-sum", TWO_PHASE, "(fas ?a ?b ?c)", "(xor (xor ?a ?b) ?c)"),
        P("full-adder-carry", TWO_PHASE, "(fac ?a ?b ?c)", "(or (and ?a ?b) (and ?c (xor ?a ?b)))"),
        P("sop-xor", TWO_PHASE, "(xor ?a ?b)", "(or (and ?a (not ?b)) (and (not ?a) ?b))"),
        P("de-morgan-and", TWO_PHASE, "(not (and ?a ?b))", "(or (not ?a) (not ?b))"),
        P("de-morgan-or", TWO_PHASE, "(not (or ?a ?b))", "(and (not ?a) (not ?b))"),
        P("distrib-and-or", TWO_PHASE, "(and ?a (or ?b ?c))", "(or (and ?a ?b) (and ?a ?c))"),
        P("distrib-and-xor", TWO_PHASE, "(and ?a (xor ?b ?c))", "(xor (and ?a ?b) (and ?a ?c))"),
        P("xor-and", TWO_PHASE, "(xor ?a (and ?a ?b))", "(and ?a (not ?b))"),
        P("or-not-and", TWO_PHASE, "(or (not ?a) (and ?a ?b))", "(or (not ?a) ?b)"),
        # standard algebra
        P("and-comm", TWO_PHASE, "(and ?a ?b)", "(and ?b ?a)", extra=True),
        P("or-comm", TWO_PHASE, "(or ?a ?b)", "(or ?b ?a)", extra=True),
        P("xor-comm", TWO_PHASE, "(xor ?a ?b)", "(xor ?b ?a)", extra=True),
        P("and-assoc", TWO_PHASE, "(and (and ?a ?b) ?c)", "(and ?a (and ?b ?c))", extra=True),
        P("or-assoc", TWO_PHASE, "(or (or ?a ?b) ?c)", "(or ?a (or ?b ?c))", extra=True),
        P("xor-assoc", TWO_PHASE, "(xor (xor ?a ?b) ?c)", "(xor ?a (xor ?b ?c))", extra=True),
        P("factor-and-or", TWO_PHASE, "(or (and ?a ?b) (and ?a ?c))", "(and ?a (or ?b ?c))", extra=True),
        P("factor-and-xor", TWO_PHASE, "(xor (and ?a ?b) (and ?a ?c))", "(and ?a (xor ?b ?c))", extra=True),
        # learnt simplifications
        P("and-idem", TWO_PHASE, "(and ?a ?a)", "?a", extra=True),
        P("or-idem", TWO_PHASE, "(or ?a ?a)", "?a", extra=True),
        P("not-not", TWO_PHASE, "(not (not ?a))", "?a", extra=True),
        P("and-absorb", TWO_PHASE, "(and ?a (or ?a ?b))", "?a", extra=True),
        P("or-absorb", TWO_PHASE, "(or ?a (and ?a ?b))", "?a", extra=True),
        P("xor-not-and", TWO_PHASE, "(xor (not ?a) (and ?a ?b))", "(or (not ?a) ?b)", extra=True),
        P("xor-self", TWO_PHASE, "(xor ?a ?a)", "0", extra=True),
        P("and-compl", TWO_PHASE, "(and ?a (not ?a))", "0", extra=True),
        P("or-compl", TWO_PHASE, "(or ?a (not ?a))", "1", extra=True),
        P("xor-compl", TWO_PHASE, "(xor ?a (not ?a))", "1", extra=True),
        P("and-zero", TWO_PHASE, "(and ?a 0)", "0", extra=True),
        P("and-one", TWO_PHASE, "(and ?a 1)", "?a", extra=True),
        P("or-zero", TWO_PHASE, "(or ?a 0)", "?a", extra=True),
        P("or-one", TWO_PHASE, "(or ?a 1)", "1", extra=True),
        P("xor-zero", TWO_PHASE, "(xor ?a 0)", "?a", extra=True),
        P("xor-one", TWO_PHASE, "(xor ?a 1)", "(not ?a)", extra=True),
        P("not-zero", TWO_PHASE, "(not 0)", "1", extra=True),
        P("not-one", TWO_PHASE, "(not 1)", "0", extra=True),
    ]
    return rules


def prepass_rules(width: int | None = None) -> list[Rewrite]:
    a, b = _bits("a", 4), _bits("b", 4)
    return [
        dynamic("divide-and-conquer", PRE, "(mul (row ?a...) (row ?b...)), n even",
                "(sum (shl_n (mul aH bH)) (shl_n/2 (mul aH bL)) (shl_n/2 (mul aL bH)) (mul aL bL))",
                _search_dnc,
                lambda: [mul(row(*a[:2]), row(*b[:2])), mul(row(*a), row(*b))]),
        dynamic("shl-normalize", PRE, "(shl_k (row ?e...))", "(row ?e... 0 .. 0)",
                _search_shl_normalize,
                lambda: [shl(row(a[0]), 2), shl(row(a[0], a[1], a[2]), 1), shl(a[0], 3)],
                extra=True),
    ]


def all_rules() -> list[Rewrite]:
    """Every shipped rule, including the opt-in compress stage."""
    return prepass_rules() + phase1_rules(compress_stage=True) + phase2_rules()


# soundness checking

@dataclass
class SoundnessResult:
    rule: str
    passed: bool
    cases: int = 0
    instances: int = 0
    counterexample: dict | None = None
    lhs: str | None = None
    rhs: str | None = None

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


def _realize_fresh(g: EGraph, ids: dict[Term, int]):
    by_class = {}
    for t, cid in ids.items():
        by_class.setdefault(g.find(cid), t)

    def realize(r):
        if isinstance(r, int):
            return by_class[g.find(r)]
        op, arg, kids = r
        return Term(op, [realize(k) for k in kids], arg)
    return realize


def _assignments(names: list[str]):
    n = len(names)
    idx = np.arange(1 << n, dtype=np.int64)
    # first name is the most significant bit of the enumeration index
    return idx, {name: (idx >> (n - 1 - i)) & 1 for i, name in enumerate(names)}


def soundness_check(rule: Rewrite, samples: list | None = None) -> SoundnessResult:
    """Exhaustively compare every instance the rule produces on its sample
    left-hand sides (at most 12 free bits each). A sample is a term or a
    ``(term, output_width)`` pair; the width defaults to the row length.
    A rule that never fires on its samples fails."""
    samples = rule.samples() if samples is None else samples
    cases = 0
    instances = 0
    for sample in samples:
        lhs, width = sample if isinstance(sample, tuple) else (sample, None)
        if width is None and lhs.op == "row":
            width = len(lhs.children)
        g = EGraph(output_width=width)
        ids: dict[Term, int] = {}
        g.root = g.add_term(lhs, ids)
        g.rebuild()
        realize = _realize_fresh(g, ids)
        for cid, recipe in rule.search(g):
            left, right = realize(cid), realize(recipe)
            names = [v.name for v in free_vars(row(left, right))]
            if len(names) > 12:
                raise ValueError(f"{rule.name}: sample has {len(names)} free bits")
            idx, env = _assignments(names)
            lv, rv = eval_many([left, right], env)
            lv = np.broadcast_to(lv, idx.shape)
            rv = np.broadcast_to(rv, idx.shape)
            if rule.modulo:
                if width is None:
                    raise ValueError(f"{rule.name}: modulo rule needs an output width")
                mask = (1 << width) - 1
                bad = np.nonzero((lv & mask) != (rv & mask))[0]
            else:
                bad = np.nonzero(lv != rv)[0]
            instances += 1
            cases += len(idx)
            if len(bad):
                k = int(bad[0])
                cex = {name: int(env[name][k]) for name in names}
                cex["lhs_value"] = int(lv[k])
                cex["rhs_value"] = int(rv[k])
                return SoundnessResult(rule.name, False, cases, instances, cex,
                                       str(left), str(right))
    if instances == 0:
        return SoundnessResult(rule.name, False, 0, 0, None, None, None)
    return SoundnessResult(rule.name, True, cases, instances)
