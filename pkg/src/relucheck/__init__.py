"""relucheck: sound, parallel verification of ReLU feed-forward networks.

Output ranges are bounded with outward-rounded interval arithmetic and
symbolic interval propagation; inconclusive regions are refined by
gradient-guided bisection until proved, refuted with a concrete
counterexample, or out of budget.
"""

from .intervals import (
    Box,
    Interval,
    IntervalOverflowError,
    RoundingPolicy,
    UnsplittableError,
    iv_add,
    iv_bisect,
    iv_matvec,
    iv_relu,
    iv_scale,
    iv_width,
    box_max_width,
)
from .symbolic import LinearExpr, ReluState, SymInterval, affine_sym, expr_bounds, relu_sym
from .network import Activation, Layer, Network, NetworkFormatError, eval_concrete, load_network
from .propagate import ForwardResult, ReluMaskMatrix, naive_forward, symbolic_forward
from .gradients import (
    IntervalJacobian,
    Monotonicity,
    backward_gradient,
    monotonic_features,
    smear_split_choice,
)
from .properties import (
    InputSpec,
    RobustnessSpec,
    TriState,
    check_concrete,
    check_sound,
    parse_property,
    robustness_to_property,
)
from .engine import (
    Config,
    PartitionReport,
    Status,
    SubStatus,
    Verdict,
    enumerate_regions,
    verify,
)

__version__ = "0.1.0"
