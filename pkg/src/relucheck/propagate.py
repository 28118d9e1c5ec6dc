"""Forward output-range analysis: naive interval extension and symbolic mode.

Both produce sound overestimates of the network image over a box; the
symbolic mode additionally yields per-neuron activation masks consumed by
the backward gradient pass, and output expressions used for tight pairwise
property checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .intervals import Box, Interval, RoundingPolicy, DEFAULT_POLICY, matvec_bounds
from .network import Activation, Network
from .symbolic import LinearExpr, ReluState, SymInterval, bounds_of_rows

__all__ = ["ReluMaskMatrix", "ForwardResult", "naive_forward", "symbolic_forward"]


@dataclass(frozen=True)
class ReluMaskMatrix:
    """Per hidden layer, the activation state of every ReLU unit."""

    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(l) for l in self.layers))

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, k):
        return self.layers[k]


@dataclass(frozen=True)
class ForwardResult:
    out_bounds: tuple
    out_sym: Optional[tuple] = None
    masks: Optional[ReluMaskMatrix] = None

    def lo_array(self) -> np.ndarray:
        return np.array([iv.lo for iv in self.out_bounds])

    def hi_array(self) -> np.ndarray:
        return np.array([iv.hi for iv in self.out_bounds])


def _check_dims(net: Network, x: Box):
    if len(x) != net.input_dim:
        raise ValueError(f"box has {len(x)} dims, network expects {net.input_dim}")


def naive_forward(net: Network, x: Box, policy: RoundingPolicy = DEFAULT_POLICY) -> ForwardResult:
    """Layerwise interval matvec + ReLU clamp; no dependency tracking."""
    _check_dims(net, x)
    lo, hi = x.lo_array(), x.hi_array()
    for layer in net.layers:
        lo, hi = matvec_bounds(layer.W, layer.b, lo, hi, policy)
        if layer.activation is Activation.RELU:
            lo = np.maximum(lo, 0.0)
            hi = np.maximum(hi, 0.0)
    return ForwardResult(tuple(Interval(a, b) for a, b in zip(lo, hi)))


def _affine_rows(low_c, low_k, up_c, up_k, W, b):
    pos = np.maximum(W, 0.0)
    neg = np.minimum(W, 0.0)
    return (
        pos @ low_c + neg @ up_c,
        pos @ low_k + neg @ up_k + b,
        pos @ up_c + neg @ low_c,
        pos @ up_k + neg @ low_k + b,
    )


def symbolic_forward(net: Network, x: Box, policy: RoundingPolicy = DEFAULT_POLICY) -> ForwardResult:
    """Symbolic interval analysis with per-ReLU concretization.

    Keeps one lower and one upper linear expression per neuron, dropping
    to concrete bounds only where a ReLU's sign is unresolved over the box.
    """
    _check_dims(net, x)
    d = net.input_dim
    # identity expressions over the inputs
    low_c = np.eye(d)
    low_k = np.zeros(d)
    up_c = np.eye(d)
    up_k = np.zeros(d)
    mask_layers = []
    for layer in net.layers:
        low_c, low_k, up_c, up_k = _affine_rows(low_c, low_k, up_c, up_k, layer.W, layer.b)
        if layer.activation is Activation.RELU:
            up_lo, up_hi = bounds_of_rows(up_c, up_k, up_c, up_k, x, policy)
            low_lo, _ = bounds_of_rows(low_c, low_k, low_c, low_k, x, policy)
            states = []
            for i in range(layer.out_size):
                if up_hi[i] <= 0.0:
                    states.append(ReluState.ZERO)
                    low_c[i] = 0.0
                    low_k[i] = 0.0
                    up_c[i] = 0.0
                    up_k[i] = 0.0
                elif low_lo[i] >= 0.0:
                    states.append(ReluState.ACTIVE)
                else:
                    states.append(ReluState.UNSTABLE)
                    low_c[i] = 0.0
                    low_k[i] = 0.0
                    if up_lo[i] <= 0.0:
                        up_c[i] = 0.0
                        up_k[i] = up_hi[i]
            mask_layers.append(tuple(states))
    out_lo, out_hi = bounds_of_rows(low_c, low_k, up_c, up_k, x, policy)
    out_sym = tuple(
        SymInterval(LinearExpr(low_c[i], low_k[i]), LinearExpr(up_c[i], up_k[i]))
        for i in range(net.output_dim)
    )
    out_bounds = tuple(Interval(a, b) for a, b in zip(out_lo, out_hi))
    return ForwardResult(out_bounds, out_sym, ReluMaskMatrix(tuple(mask_layers)))
