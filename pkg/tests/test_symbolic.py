import math

import numpy as np
import pytest

from relucheck.intervals import Box, RoundingPolicy
from relucheck.symbolic import LinearExpr, ReluState, SymInterval, affine_sym, expr_bounds, relu_sym

from conftest import random_box

EXACT = RoundingPolicy(mode="none")


def box(lo, hi):
    return Box.from_arrays(lo, hi)


def test_expr_bounds_demo_hidden_neuron():
    e = LinearExpr([2.0, 3.0], 0.0)
    r = expr_bounds(e, box([4, 1], [6, 5]), EXACT)
    assert (r.lo, r.hi) == (11.0, 27.0)


def test_expr_bounds_constant():
    r = expr_bounds(LinearExpr([0.0, 0.0], 7.0), box([0, 0], [1, 1]), EXACT)
    assert (r.lo, r.hi) == (7.0, 7.0)


def test_expr_bounds_sign_split():
    r = expr_bounds(LinearExpr([1.0], -5.0), box([4], [6]), EXACT)
    assert (r.lo, r.hi) == (-1.0, 1.0)


def test_expr_bounds_dimension_mismatch():
    with pytest.raises(ValueError):
        expr_bounds(LinearExpr([1.0, 2.0], 0.0), box([0], [1]))


def test_expr_bounds_outward_contains_true_range():
    e = LinearExpr([0.1, -0.2], 0.3)
    b = box([-1.7, 0.3], [2.9, 1.1])
    r = expr_bounds(e, b)
    lo_true = 0.1 * -1.7 - 0.2 * 1.1 + 0.3
    hi_true = 0.1 * 2.9 - 0.2 * 0.3 + 0.3
    assert r.lo <= lo_true and r.hi >= hi_true


def test_affine_sym_demo_output_layer():
    e1 = SymInterval.exact(LinearExpr([2.0, 3.0], 0.0))
    e2 = SymInterval.exact(LinearExpr([1.0, 1.0], 0.0))
    (out,) = affine_sym([e1, e2], [[1.0, -1.0]], [0.0])
    assert out.low == LinearExpr([1.0, 2.0], 0.0)
    assert out.up == LinearExpr([1.0, 2.0], 0.0)


def test_affine_sym_identity():
    exprs = [SymInterval.exact(LinearExpr([1.0, 0.0], 0.5)), SymInterval.exact(LinearExpr([0.0, 2.0], -1.0))]
    out = affine_sym(exprs, np.eye(2), [0.0, 0.0])
    assert out[0] == exprs[0] and out[1] == exprs[1]


def test_affine_sym_zero_row():
    exprs = [SymInterval.exact(LinearExpr([1.0], 0.0))]
    (out,) = affine_sym(exprs, [[0.0]], [0.0])
    assert out.low == LinearExpr([0.0], 0.0)
    assert out.up == LinearExpr([0.0], 0.0)


def test_affine_sym_mixed_signs_bounds_correct():
    # upper uses positive weights on upper exprs and negative on lower
    low, up = LinearExpr([1.0], 0.0), LinearExpr([1.0], 1.0)
    (out,) = affine_sym([SymInterval(low, up)], [[-2.0]], [0.5])
    assert out.up == LinearExpr([-2.0], 0.5)
    assert out.low == LinearExpr([-2.0], -1.5)


def test_relu_sym_active():
    s = SymInterval.exact(LinearExpr([2.0, 3.0], 0.0))
    out, state = relu_sym(s, box([4, 1], [6, 5]))
    assert state is ReluState.ACTIVE
    assert out == s


def test_relu_sym_zero():
    s = SymInterval.exact(LinearExpr([-1.0], 0.0))
    out, state = relu_sym(s, box([1], [2]))
    assert state is ReluState.ZERO
    assert out.low == LinearExpr([0.0], 0.0) and out.up == LinearExpr([0.0], 0.0)


def test_relu_sym_unstable_concretizes_upper():
    # x - 5 over [4,6]: upper's lower bound is -1 <= 0, so up becomes the
    # constant 1 (its upper bound) and low drops to 0
    s = SymInterval.exact(LinearExpr([1.0], -5.0))
    out, state = relu_sym(s, box([4], [6]), EXACT)
    assert state is ReluState.UNSTABLE
    assert out.low == LinearExpr([0.0], 0.0)
    assert out.up == LinearExpr([0.0], 1.0)


def test_relu_sym_unstable_keeps_symbolic_upper():
    # low can be negative while up stays positive over the whole box
    s = SymInterval(LinearExpr([1.0], -5.0), LinearExpr([1.0], 1.0))
    out, state = relu_sym(s, box([4], [6]), EXACT)
    assert state is ReluState.UNSTABLE
    assert out.low == LinearExpr([0.0], 0.0)
    assert out.up == LinearExpr([1.0], 1.0)


def test_sandwich_on_sampled_points():
    rng = np.random.default_rng(7)
    for _ in range(50):
        d = int(rng.integers(1, 4))
        b = random_box(rng, d)
        s = SymInterval.exact(LinearExpr(rng.uniform(-2, 2, d), rng.uniform(-1, 1)))
        out, _ = relu_sym(s, b)
        pts = rng.uniform(b.lo_array(), b.hi_array(), size=(200, d))
        for p in pts:
            val = max(0.0, s.low.eval(p))
            assert out.low.eval(p) <= val + 1e-12
            assert out.up.eval(p) >= val - 1e-12


def test_point_box_bounds_are_tight():
    e = LinearExpr([0.3, -0.7], 0.11)
    p = [1.234, -5.678]
    r = expr_bounds(e, Box.from_point(p))
    v = e.eval(p)
    assert r.contains(v)
    assert r.hi - r.lo <= 8 * math.ulp(max(abs(v), 4.0))
