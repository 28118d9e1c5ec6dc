"""Security properties: input regions plus an output-constraint tree.

Atoms compare raw output scores (`le`, `ge`), pairwise differences
(`diffle i j c` meaning y_i - y_j <= c), or rank positions (`ismin`,
`ismax`, `notmin`, `notmax`). Rank atoms desugar into difference atoms
with non-strict comparisons, so a tie counts as minimal/maximal.

Sound evaluation over a box is three-valued internally: an atom is
definitely-true when the bounds prove it for every point, definitely-false
when they refute it everywhere, otherwise unknown. Only definitely-true
maps to the Holds verdict.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .intervals import Box, Interval
from .propagate import ForwardResult
from .symbolic import expr_bounds

__all__ = [
    "PropertyParseError",
    "TriState",
    "InputSpec",
    "RobustnessSpec",
    "OutLE",
    "OutGE",
    "DiffLE",
    "IsMin",
    "IsMax",
    "NotMin",
    "NotMax",
    "And",
    "Or",
    "Not",
    "desugar",
    "referenced_outputs",
    "parse_property",
    "robustness_to_property",
    "check_sound",
    "check_concrete",
]


class PropertyParseError(ValueError):
    pass


class TriState(enum.Enum):
    HOLDS = "holds"
    MAY_VIOLATE = "may_violate"


@dataclass(frozen=True)
class InputSpec:
    """Union of input boxes, with a raw/normalized units flag."""

    regions: tuple
    units: str = "raw"

    def __post_init__(self):
        regions = tuple(self.regions)
        object.__setattr__(self, "regions", regions)
        if not regions:
            raise PropertyParseError("property needs at least one input region")
        if self.units not in ("raw", "normalized"):
            raise PropertyParseError(f"bad units flag {self.units!r}")
        d = len(regions[0])
        if any(len(r) != d for r in regions):
            raise PropertyParseError("all regions must share one dimension")

    @property
    def dim(self) -> int:
        return len(self.regions[0])


@dataclass(frozen=True)
class RobustnessSpec:
    """L-infinity ball around a seed point; the label must stay on top."""

    seed: np.ndarray
    radius: float
    label: int

    def __post_init__(self):
        object.__setattr__(self, "seed", np.asarray(self.seed, dtype=np.float64))
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")


# ---------------------------------------------------------------------------
# constraint tree


@dataclass(frozen=True)
class OutLE:
    i: int
    c: float


@dataclass(frozen=True)
class OutGE:
    i: int
    c: float


@dataclass(frozen=True)
class DiffLE:
    """y_i - y_j <= c"""

    i: int
    j: int
    c: float


@dataclass(frozen=True)
class IsMin:
    i: int


@dataclass(frozen=True)
class IsMax:
    i: int


@dataclass(frozen=True)
class NotMin:
    i: int


@dataclass(frozen=True)
class NotMax:
    i: int


@dataclass(frozen=True)
class And:
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Or:
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Not:
    arg: object


_RANK_ATOMS = (IsMin, IsMax, NotMin, NotMax)


def desugar(c, m: int):
    """Rewrite rank atoms into difference atoms over m outputs."""
    if isinstance(c, IsMin):
        return And(tuple(DiffLE(c.i, j, 0.0) for j in range(m) if j != c.i))
    if isinstance(c, IsMax):
        return And(tuple(DiffLE(j, c.i, 0.0) for j in range(m) if j != c.i))
    if isinstance(c, NotMin):
        return Or(tuple(DiffLE(j, c.i, 0.0) for j in range(m) if j != c.i))
    if isinstance(c, NotMax):
        return Or(tuple(DiffLE(c.i, j, 0.0) for j in range(m) if j != c.i))
    if isinstance(c, And):
        return And(tuple(desugar(a, m) for a in c.args))
    if isinstance(c, Or):
        return Or(tuple(desugar(a, m) for a in c.args))
    if isinstance(c, Not):
        return Not(desugar(c.arg, m))
    return c


def referenced_outputs(c, m: int):
    """Output indices the constraint's truth depends on."""
    out = set()

    def walk(node):
        if isinstance(node, (OutLE, OutGE)):
            out.add(node.i)
        elif isinstance(node, DiffLE):
            out.update((node.i, node.j))
        elif isinstance(node, _RANK_ATOMS):
            out.update(range(m))
        elif isinstance(node, (And, Or)):
            for a in node.args:
                walk(a)
        elif isinstance(node, Not):
            walk(node.arg)

    walk(c)
    return sorted(out)


def max_output_index(c) -> int:
    idx = [-1]

    def walk(node):
        if isinstance(node, (OutLE, OutGE, IsMin, IsMax, NotMin, NotMax)):
            idx[0] = max(idx[0], node.i)
        if isinstance(node, DiffLE):
            idx[0] = max(idx[0], node.i, node.j)
        if isinstance(node, (And, Or)):
            for a in node.args:
                walk(a)
        if isinstance(node, Not):
            walk(node.arg)

    walk(c)
    return idx[0]


# ---------------------------------------------------------------------------
# evaluation


def check_concrete(y, c) -> bool:
    """Exact truth of the constraint at one output vector."""
    y = np.asarray(y, dtype=np.float64)
    c = desugar(c, y.shape[0])

    def ev(node) -> bool:
        if isinstance(node, OutLE):
            return bool(y[node.i] <= node.c)
        if isinstance(node, OutGE):
            return bool(y[node.i] >= node.c)
        if isinstance(node, DiffLE):
            return bool(y[node.i] - y[node.j] <= node.c)
        if isinstance(node, And):
            return all(ev(a) for a in node.args)
        if isinstance(node, Or):
            return any(ev(a) for a in node.args)
        if isinstance(node, Not):
            return not ev(node.arg)
        raise TypeError(f"unknown constraint node {node!r}")

    return ev(c)


def _tri_eval(node, fr: ForwardResult, x: Box):
    """Kleene evaluation: True / False are for-all-points certainties."""
    if isinstance(node, OutLE):
        b = fr.out_bounds[node.i]
        if b.hi <= node.c:
            return True
        if b.lo > node.c:
            return False
        return None
    if isinstance(node, OutGE):
        b = fr.out_bounds[node.i]
        if b.lo >= node.c:
            return True
        if b.hi < node.c:
            return False
        return None
    if isinstance(node, DiffLE):
        if fr.out_sym is not None:
            # one combined expression keeps shared input terms correlated
            up = expr_bounds(fr.out_sym[node.i].up - fr.out_sym[node.j].low, x)
            if up.hi <= node.c:
                return True
            lo = expr_bounds(fr.out_sym[node.i].low - fr.out_sym[node.j].up, x)
            if lo.lo > node.c:
                return False
            return None
        bi, bj = fr.out_bounds[node.i], fr.out_bounds[node.j]
        if bi.hi - bj.lo <= node.c:
            return True
        if bi.lo - bj.hi > node.c:
            return False
        return None
    if isinstance(node, And):
        vals = [_tri_eval(a, fr, x) for a in node.args]
        if all(v is True for v in vals):
            return True
        if any(v is False for v in vals):
            return False
        return None
    if isinstance(node, Or):
        vals = [_tri_eval(a, fr, x) for a in node.args]
        if any(v is True for v in vals):
            return True
        if vals and all(v is False for v in vals):
            return False
        if not vals:
            return False
        return None
    if isinstance(node, Not):
        v = _tri_eval(node.arg, fr, x)
        return None if v is None else (not v)
    raise TypeError(f"unknown constraint node {node!r}")


def check_sound(fr: ForwardResult, c, x: Box) -> TriState:
    """Holds only when the bounds prove the constraint for all of x."""
    c = desugar(c, len(fr.out_bounds))
    return TriState.HOLDS if _tri_eval(c, fr, x) is True else TriState.MAY_VIOLATE


# ---------------------------------------------------------------------------
# robustness ball


def robustness_to_property(r: RobustnessSpec, domain: Optional[Box] = None):
    """L-inf ball around the seed (clamped to the domain) + IsMax(label)."""
    lo = r.seed - r.radius
    hi = r.seed + r.radius
    if domain is not None:
        if len(domain) != r.seed.shape[0]:
            raise ValueError("domain dimension disagrees with seed")
        lo = np.maximum(lo, domain.lo_array())
        hi = np.minimum(hi, domain.hi_array())
    box = Box.from_arrays(lo, hi)
    return InputSpec((box,)), IsMax(r.label)


# ---------------------------------------------------------------------------
# property file parsing


_ATOM_ARITY = {
    "le": ("ic", OutLE),
    "ge": ("ic", OutGE),
    "diffle": ("ijc", DiffLE),
    "ismin": ("i", IsMin),
    "ismax": ("i", IsMax),
    "notmin": ("i", NotMin),
    "notmax": ("i", NotMax),
}
_COMBINATORS = {"and": And, "or": Or}


def _tokenize(text: str):
    for ch in "(),":
        text = text.replace(ch, f" {ch} ")
    return text.split()


class _ConstraintParser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise PropertyParseError("unexpected end of constraint")
        if expected is not None and tok != expected:
            raise PropertyParseError(f"expected {expected!r}, got {tok!r}")
        self.pos += 1
        return tok

    def number(self) -> float:
        tok = self.take()
        try:
            return float(tok)
        except ValueError:
            raise PropertyParseError(f"expected a number, got {tok!r}") from None

    def index(self) -> int:
        v = self.number()
        if v != int(v) or v < 0:
            raise PropertyParseError(f"output index must be a nonnegative integer, got {v}")
        return int(v)

    def expr(self):
        tok = self.take()
        if tok in _COMBINATORS:
            self.take("(")
            args = []
            while self.peek() != ")":
                args.append(self.expr())
                if self.peek() == ",":
                    self.take(",")
            self.take(")")
            return _COMBINATORS[tok](tuple(args))
        if tok == "not":
            self.take("(")
            inner = self.expr()
            self.take(")")
            return Not(inner)
        if tok in _ATOM_ARITY:
            kind, cls = _ATOM_ARITY[tok]
            if kind == "i":
                return cls(self.index())
            if kind == "ic":
                return cls(self.index(), self.number())
            return cls(self.index(), self.index(), self.number())
        raise PropertyParseError(f"unknown constraint token {tok!r}")

    def parse(self):
        node = self.expr()
        if self.peek() is not None:
            raise PropertyParseError(f"trailing constraint tokens from {self.peek()!r}")
        return node


def parse_property(source, num_outputs: Optional[int] = None):
    """Parse a property file into (InputSpec, desugared constraint).

    Sections: ``domain:`` (d lines ``lo hi``), one or more ``region:``
    sections (``lo hi`` or ``*`` per line), ``constraint:`` (prefix
    expression), optional ``units:`` and ``outputs:`` headers. When the
    output count is neither given nor declared, it is inferred from the
    largest referenced index.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")

    units = "raw"
    declared_outputs = None
    domain = []
    region_specs = []
    constraint_tokens = []
    section = None

    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low.startswith("units:"):
            units = line.split(":", 1)[1].strip().lower()
            if units not in ("raw", "normalized"):
                raise PropertyParseError(f"line {lineno}: units must be raw|normalized")
            continue
        if low.startswith("outputs:"):
            declared_outputs = int(line.split(":", 1)[1])
            continue
        if low == "domain:":
            section = "domain"
            continue
        if low == "region:":
            region_specs.append([])
            section = "region"
            continue
        if low == "constraint:":
            section = "constraint"
            continue
        if section == "domain":
            vals = line.split()
            if len(vals) != 2:
                raise PropertyParseError(f"line {lineno}: domain line must be 'lo hi'")
            domain.append((float(vals[0]), float(vals[1])))
        elif section == "region":
            if line == "*":
                region_specs[-1].append(None)
            else:
                vals = line.split()
                if len(vals) != 2:
                    raise PropertyParseError(f"line {lineno}: region line must be 'lo hi' or '*'")
                region_specs[-1].append((float(vals[0]), float(vals[1])))
        elif section == "constraint":
            constraint_tokens.extend(_tokenize(line))
        else:
            raise PropertyParseError(f"line {lineno}: content outside any section")

    if not domain:
        raise PropertyParseError("missing domain: section")
    d = len(domain)
    if not region_specs:
        raise PropertyParseError("missing region: section")
    if not constraint_tokens:
        raise PropertyParseError("missing constraint: section")

    regions = []
    for k, spec in enumerate(region_specs):
        if len(spec) != d:
            raise PropertyParseError(
                f"region {k} has {len(spec)} lines, domain has {d}"
            )
        dims = []
        for j, entry in enumerate(spec):
            lo, hi = entry if entry is not None else domain[j]
            if lo > hi:
                raise PropertyParseError(f"region {k} dim {j}: empty range [{lo}, {hi}]")
            dims.append(Interval(lo, hi))
        regions.append(Box(tuple(dims)))

    constraint = _ConstraintParser(constraint_tokens).parse()
    m = num_outputs if num_outputs is not None else declared_outputs
    if m is None:
        m = max_output_index(constraint) + 1
    if max_output_index(constraint) >= m:
        raise PropertyParseError("constraint references an output index out of range")
    return InputSpec(tuple(regions), units), desugar(constraint, m)
