"""Linear symbolic bound expressions per neuron and their transformations.

A neuron's value over the input box is sandwiched between two linear
expressions in the d network inputs. Affine layers transform the pair
exactly; ReLU either keeps the expressions, zeroes them, or concretizes
the upper bound, depending on the sign information available over the box.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .intervals import Box, Interval, RoundingPolicy, DEFAULT_POLICY

__all__ = ["LinearExpr", "SymInterval", "ReluState", "expr_bounds", "affine_sym", "relu_sym"]


class ReluState(enum.Enum):
    """Activation state of a ReLU over the current box.

    The gradient interval of the unit is [0,0] for ZERO, [1,1] for ACTIVE
    and [0,1] for UNSTABLE.
    """

    ZERO = 0
    ACTIVE = 1
    UNSTABLE = 2

    @property
    def grad_lo(self) -> float:
        return 1.0 if self is ReluState.ACTIVE else 0.0

    @property
    def grad_hi(self) -> float:
        return 0.0 if self is ReluState.ZERO else 1.0


@dataclass(frozen=True)
class LinearExpr:
    """coeffs . x + constant over the d network inputs."""

    coeffs: np.ndarray
    constant: float

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "constant", float(self.constant))
        if not np.all(np.isfinite(c)) or not np.isfinite(self.constant):
            raise ValueError("linear expression entries must be finite")

    @classmethod
    def const(cls, value: float, dim: int) -> "LinearExpr":
        return cls(np.zeros(dim), value)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def eval(self, x) -> float:
        return float(self.coeffs @ np.asarray(x, dtype=np.float64) + self.constant)

    def __sub__(self, other: "LinearExpr") -> "LinearExpr":
        return LinearExpr(self.coeffs - other.coeffs, self.constant - other.constant)

    def __eq__(self, other):
        return (
            isinstance(other, LinearExpr)
            and np.array_equal(self.coeffs, other.coeffs)
            and self.constant == other.constant
        )


@dataclass(frozen=True)
class SymInterval:
    """Paired lower/upper linear bound expressions for one neuron."""

    low: LinearExpr
    up: LinearExpr

    @classmethod
    def exact(cls, e: LinearExpr) -> "SymInterval":
        return cls(e, e)

    @property
    def dim(self) -> int:
        return self.low.dim


def _eval_bounds_arrays(coeffs, consts, box_lo, box_hi, upper: bool):
    """Sign-split evaluation of rows of a coefficient matrix over the box."""
    pos = np.maximum(coeffs, 0.0)
    neg = np.minimum(coeffs, 0.0)
    if upper:
        return pos @ box_hi + neg @ box_lo + consts
    return pos @ box_lo + neg @ box_hi + consts


def _slack(coeffs, consts, box_lo, box_hi, policy: RoundingPolicy):
    """Accumulated-error slack covering the (d+1)-term evaluation sum.

    Coefficient arithmetic is done in working precision; soundness of the
    concretized bound is restored here with the standard dot-product
    roundoff bound, n * u * sum(|terms|) with u the unit roundoff.
    """
    if policy.mode == "none":
        return 0.0
    amax = np.maximum(np.abs(box_lo), np.abs(box_hi))
    mag = np.abs(coeffs) @ amax + np.abs(consts)
    n = coeffs.shape[-1] + 1
    fi = np.finfo(policy.dtype)
    return n * (fi.eps / 2) * mag + 2 * fi.tiny


def bounds_of_rows(coeffs_low, consts_low, coeffs_up, consts_up, box: Box, policy=DEFAULT_POLICY):
    """Concrete (lo, hi) arrays for stacked lower/upper expression rows."""
    bl, bh = box.lo_array(), box.hi_array()
    lo = _eval_bounds_arrays(coeffs_low, consts_low, bl, bh, upper=False)
    hi = _eval_bounds_arrays(coeffs_up, consts_up, bl, bh, upper=True)
    lo = lo - _slack(coeffs_low, consts_low, bl, bh, policy)
    hi = hi + _slack(coeffs_up, consts_up, bl, bh, policy)
    return lo, hi


def expr_bounds(e: LinearExpr, x: Box, policy: RoundingPolicy = DEFAULT_POLICY) -> Interval:
    """Sound concrete range of a linear expression over the box."""
    if e.dim != len(x):
        raise ValueError(f"dimension mismatch: expr has {e.dim}, box has {len(x)}")
    c = e.coeffs[np.newaxis, :]
    k = np.array([e.constant])
    lo, hi = bounds_of_rows(c, k, c, k, x, policy)
    return Interval(float(lo[0]), float(hi[0]))


def affine_sym(prev, W, b, policy: RoundingPolicy = DEFAULT_POLICY):
    """Symbolic affine image of a vector of SymIntervals.

    Positive weights propagate like bounds, negative weights swap them;
    biases enter the constant term of both expressions.
    """
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if W.shape[1] != len(prev):
        raise ValueError(f"shape mismatch: W has {W.shape[1]} cols, {len(prev)} expressions")
    d = prev[0].dim
    low_c = np.stack([s.low.coeffs for s in prev])
    low_k = np.array([s.low.constant for s in prev])
    up_c = np.stack([s.up.coeffs for s in prev])
    up_k = np.array([s.up.constant for s in prev])
    pos = np.maximum(W, 0.0)
    neg = np.minimum(W, 0.0)
    new_up_c = pos @ up_c + neg @ low_c
    new_up_k = pos @ up_k + neg @ low_k + b
    new_low_c = pos @ low_c + neg @ up_c
    new_low_k = pos @ low_k + neg @ up_k + b
    return [
        SymInterval(LinearExpr(new_low_c[i], new_low_k[i]), LinearExpr(new_up_c[i], new_up_k[i]))
        for i in range(W.shape[0])
    ]


def relu_sym(s: SymInterval, x: Box, policy: RoundingPolicy = DEFAULT_POLICY):
    """Push a symbolic interval through ReLU, concretizing only as needed.

    Returns the transformed pair together with the unit's activation state.
    """
    d = s.dim
    up_rng = expr_bounds(s.up, x, policy)
    if up_rng.hi <= 0.0:
        zero = LinearExpr.const(0.0, d)
        return SymInterval(zero, zero), ReluState.ZERO
    low_rng = expr_bounds(s.low, x, policy)
    if low_rng.lo >= 0.0:
        return s, ReluState.ACTIVE
    new_low = LinearExpr.const(0.0, d)
    if up_rng.lo <= 0.0:
        new_up = LinearExpr.const(up_rng.hi, d)
    else:
        new_up = s.up
    return SymInterval(new_low, new_up), ReluState.UNSTABLE
