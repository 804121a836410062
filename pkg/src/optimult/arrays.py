"""Initial AND-array construction for multipliers and squarers."""
from __future__ import annotations

from dataclasses import dataclass

from .term import ZERO, Term, and_, p, q, row, sum_


@dataclass(frozen=True)
class ArraySpec:
    width: int
    square: bool = False

    def __post_init__(self):
        if not isinstance(self.width, int) or self.width < 2:
            raise ValueError(f"operand width must be an integer >= 2, got {self.width!r}")

    @property
    def output_width(self) -> int:
        return 2 * self.width

    @property
    def n_inputs(self) -> int:
        return self.width if self.square else 2 * self.width

    @property
    def tag(self) -> str:
        return f"m{self.width}{'s' if self.square else 'm'}"


def partial_product(i: int, j: int, square: bool) -> Term:
    """Bit p_i * q_j; for squarers q is p, diagonals fold and operands sort."""
    if not square:
        return and_(p(i), q(j))
    if i == j:
        return p(i)
    hi, lo = max(i, j), min(i, j)
    return and_(p(hi), p(lo))


def build_and_array(spec: ArraySpec) -> Term:
    n = spec.width
    rows = []
    for j in range(n):
        bits = [partial_product(i, j, spec.square) for i in reversed(range(n))]
        rows.append(row(*bits, *([ZERO] * j)))
    return sum_(*rows)


def pad_rows(rows: list[Term], target_len: int) -> list[Term]:
    """Left-pad each row with constant-0 MSB slots up to ``target_len``."""
    out = []
    for r in rows:
        slots = r.children if r.op == "row" else (r,)
        if len(slots) > target_len:
            raise ValueError(f"row of length {len(slots)} exceeds target {target_len}")
        out.append(row(*([ZERO] * (target_len - len(slots))), *slots))
    return out
