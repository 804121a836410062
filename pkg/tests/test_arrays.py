import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optimult.arrays import ArraySpec, build_and_array, pad_rows
from optimult.term import ZERO, and_, eval_many, eval_term, p, q, row, sum_, var


def all_values(t, n, square):
    cases = 1 << (n if square else 2 * n)
    idx = np.arange(cases, dtype=np.int64)
    env = {f"p{i}": (idx >> i) & 1 for i in range(n)}
    if not square:
        env.update({f"q{i}": (idx >> (n + i)) & 1 for i in range(n)})
    got = np.broadcast_to(eval_many([t], env)[0], idx.shape)
    pv = idx & ((1 << n) - 1)
    qv = pv if square else idx >> n
    return got, pv * qv


def test_spec_validation():
    assert ArraySpec(4).output_width == 8
    assert ArraySpec(4, True).n_inputs == 4
    assert ArraySpec(3, True).tag == "m3s"
    with pytest.raises(ValueError):
        ArraySpec(1)


def test_two_bit_layout():
    t = build_and_array(ArraySpec(2))
    assert t is sum_(row(and_(p(1), q(0)), and_(p(0), q(0))),
                     row(and_(p(1), q(1)), and_(p(0), q(1)), ZERO))


def test_two_bit_square_layout():
    t = build_and_array(ArraySpec(2, True))
    p1p0 = and_(p(1), p(0))
    assert t is sum_(row(p1p0, p(0)), row(p(1), p1p0, ZERO))


@pytest.mark.parametrize("n", range(2, 9))
@pytest.mark.parametrize("square", [False, True])
def test_array_correct(n, square):
    got, want = all_values(build_and_array(ArraySpec(n, square)), n, square)
    assert np.array_equal(got, want)


def test_pad_rows_examples():
    a = var("a", 0)
    assert pad_rows([row(a)], 2) == [row(ZERO, a)]
    fig = build_and_array(ArraySpec(2)).children
    assert pad_rows(list(fig), 3)[0] is row(ZERO, and_(p(1), q(0)), and_(p(0), q(0)))
    with pytest.raises(ValueError):
        pad_rows([row(a, a, a)], 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([p(0), p(1), ZERO]), min_size=1, max_size=5), st.integers(0, 3))
def test_pad_preserves_value(slots, extra):
    r = row(*slots)
    (padded,) = pad_rows([r], len(slots) + extra)
    for pv in range(4):
        env = {"p0": pv & 1, "p1": pv >> 1}
        assert eval_term(padded, env) == eval_term(r, env)
