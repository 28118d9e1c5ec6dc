"""Backward interval Jacobian, smear-based split selection, monotonicity.

The Jacobian pass starts from the output layer's weights and walks the
hidden layers backwards, taking a Hadamard product with each unit's
gradient interval ([0,0] / [1,1] / [0,1] depending on its mask) followed
by an interval product with the layer's weights.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .intervals import Box, Interval, RoundingPolicy, DEFAULT_POLICY, round_out
from .network import Network
from .propagate import ReluMaskMatrix

__all__ = [
    "IntervalJacobian",
    "Monotonicity",
    "NoSplittableDimensionError",
    "backward_gradient",
    "smear_split_choice",
    "monotonic_features",
]


class NoSplittableDimensionError(ValueError):
    """All dimensions are at or below the splitting precision."""


class Monotonicity(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class IntervalJacobian:
    """Entrywise bounds on d(output_i)/d(input_j) over a box; shape m x d."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or lo.ndim != 2:
            raise ValueError(f"Jacobian bound shapes disagree: {lo.shape} vs {hi.shape}")
        if np.any(lo > hi):
            raise ValueError("inverted Jacobian entry")

    @property
    def shape(self):
        return self.lo.shape

    def entry(self, i: int, j: int) -> Interval:
        return Interval(self.lo[i, j], self.hi[i, j])

    def abs_upper(self) -> np.ndarray:
        """max(|lo|, |hi|) per entry -- the upper bound on |J_ij|."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))


def _interval_matmul(g_lo, g_hi, W, policy):
    """[g_lo, g_hi] @ W with exact-weight columns; outward-rounded."""
    pos = np.maximum(W, 0.0)
    neg = np.minimum(W, 0.0)
    lo = g_lo @ pos + g_hi @ neg
    hi = g_hi @ pos + g_lo @ neg
    return round_out(lo, hi, policy)


def backward_gradient(
    net: Network, masks: ReluMaskMatrix, policy: RoundingPolicy = DEFAULT_POLICY
) -> IntervalJacobian:
    """Interval Jacobian of outputs w.r.t. inputs, given activation masks."""
    if len(masks) != net.num_hidden:
        raise ValueError(
            f"mask has {len(masks)} hidden layers, network has {net.num_hidden}"
        )
    g_lo = net.layers[-1].W.astype(np.float64).copy()
    g_hi = g_lo.copy()
    for k in range(net.num_hidden - 1, -1, -1):
        states = masks[k]
        if len(states) != net.layers[k].out_size:
            raise ValueError(f"mask layer {k} size disagrees with network")
        m_lo = np.array([s.grad_lo for s in states])
        m_hi = np.array([s.grad_hi for s in states])
        # Hadamard with the mask gradient interval (columns = layer-k units)
        cands = np.stack([m_lo * g_lo, m_hi * g_lo, m_lo * g_hi, m_hi * g_hi])
        g_lo = cands.min(axis=0)
        g_hi = cands.max(axis=0)
        g_lo, g_hi = _interval_matmul(g_lo, g_hi, net.layers[k].W, policy)
    return IntervalJacobian(g_lo, g_hi)


def smear_split_choice(
    J: IntervalJacobian, x: Box, precision: float = 0.0
) -> int:
    """Index of the most influential splittable input.

    Score per input j: max over outputs of upper|J_ij| times width(x_j).
    Dimensions no wider than `precision` are excluded; ties break low.
    """
    widths = x.widths()
    splittable = widths > precision
    if not np.any(splittable):
        raise NoSplittableDimensionError("exhausted: no dimension wider than precision")
    influence = J.abs_upper().max(axis=0)
    smear = np.where(splittable, influence * widths, -np.inf)
    return int(np.argmax(smear))


def monotonic_features(J: IntervalJacobian, output_indices=None):
    """Per-input monotonicity over the referenced outputs.

    Increasing when every referenced partial derivative is strictly
    positive over the box, decreasing when strictly negative.
    """
    m, d = J.shape
    idx = list(range(m)) if output_indices is None else sorted(set(output_indices))
    out = []
    for j in range(d):
        if idx and all(J.lo[i, j] > 0.0 for i in idx):
            out.append(Monotonicity.INCREASING)
        elif idx and all(J.hi[i, j] < 0.0 for i in idx):
            out.append(Monotonicity.DECREASING)
        else:
            out.append(Monotonicity.UNKNOWN)
    return out
