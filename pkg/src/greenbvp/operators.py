"""Even-order linear differential operators with piecewise coefficients.

An operator of order ``2n`` is ``u^(2n) + a_{2n-1} u^(2n-1) + ... + a_0 u``
on ``[0, L]`` with unit leading coefficient.  Coefficients are stored as
piecewise segments whose evaluation maps are affine in ``t``, so the even and
odd reflection extensions (to the doubled and quadrupled intervals) and the
coefficient reflection are represented exactly rather than resampled.
Breakpoints between segments fall on multiples of the base interval length,
and integrators must treat them as hard boundaries: odd extensions of
nonvanishing coefficients jump there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .expressions import ExprAst, compile_expr, parse_expression, to_string, uses_t

__all__ = [
    "CoeffSegment",
    "LinearOperator",
    "shift_lambda",
    "extend_to_double",
    "extend_to_quadruple",
    "reflect",
    "coeff_value",
]


@dataclass(frozen=True)
class CoeffSegment:
    """One piece of a coefficient: value(t) = sign * expr(shift + scale*t)."""

    lo: float
    hi: float
    expr: ExprAst
    shift: float = 0.0
    scale: float = 1.0
    sign: float = 1.0

    def evaluate(self, t, lam: float = 0.0):
        f = compile_expr(self.expr)
        return self.sign * f(self.shift + self.scale * np.asarray(t, dtype=float), lam)

    def mapped(self, new_lo: float, new_hi: float, about: float, flip_sign: bool) -> "CoeffSegment":
        """Segment for the reflection t -> about - t, relocated to [new_lo, new_hi]."""
        return CoeffSegment(
            lo=new_lo,
            hi=new_hi,
            expr=self.expr,
            shift=self.shift + self.scale * about,
            scale=-self.scale,
            sign=-self.sign if flip_sign else self.sign,
        )

    def is_constant(self) -> bool:
        return not uses_t(self.expr)


def _as_segments(coeff, length: float) -> tuple[CoeffSegment, ...]:
    if isinstance(coeff, str):
        coeff = parse_expression(coeff)
    if isinstance(coeff, CoeffSegment):
        return (coeff,)
    if isinstance(coeff, (tuple, list)) and coeff and isinstance(coeff[0], CoeffSegment):
        return tuple(coeff)
    # a bare ExprAst covers the whole interval
    return (CoeffSegment(0.0, length, coeff),)


@dataclass(frozen=True)
class LinearOperator:
    """Operator u^(2n) + sum a_k u^(k) on [0, length], with a_0 offset lam."""

    n: int
    length: float
    coeffs: tuple[tuple[CoeffSegment, ...], ...]
    lam: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("half-order n must be a positive integer")
        if not self.length > 0:
            raise ValueError("interval length must be positive")
        if len(self.coeffs) != 2 * self.n:
            raise ValueError(f"expected {2 * self.n} coefficients, got {len(self.coeffs)}")
        for k, segs in enumerate(self.coeffs):
            cursor = 0.0
            for seg in segs:
                if not math.isclose(seg.lo, cursor, abs_tol=1e-12 * max(1.0, self.length)):
                    raise ValueError(f"coefficient {k}: segments do not partition the interval")
                cursor = seg.hi
                vals = seg.evaluate(np.linspace(seg.lo, seg.hi, 9), 0.0)
                if not np.all(np.isfinite(vals)):
                    raise ValueError(f"coefficient {k}: non-finite values on [{seg.lo}, {seg.hi}]")
            if not math.isclose(cursor, self.length, abs_tol=1e-12 * max(1.0, self.length)):
                raise ValueError(f"coefficient {k}: segments stop at {cursor}, not {self.length}")

    @classmethod
    def from_exprs(cls, n: int, length: float, coeffs, lam: float = 0.0) -> "LinearOperator":
        """Build from 2n expression strings or ASTs, lowest order (a_0) first."""
        segs = tuple(_as_segments(c, float(length)) for c in coeffs)
        return cls(n=n, length=float(length), coeffs=segs, lam=float(lam))

    @property
    def order(self) -> int:
        return 2 * self.n

    def breakpoints(self) -> np.ndarray:
        """Sorted union of all segment boundaries, including 0 and length."""
        pts = {0.0, self.length}
        for segs in self.coeffs:
            for seg in segs:
                pts.add(seg.lo)
                pts.add(seg.hi)
        return np.array(sorted(pts))

    def coeff_segment_at(self, k: int, t: float) -> CoeffSegment:
        segs = self.coeffs[k]
        for seg in segs[:-1]:
            if t < seg.hi:
                return seg
        return segs[-1]

    def is_t_constant_on(self, lo: float, hi: float) -> bool:
        """True when every coefficient is constant in t throughout [lo, hi]."""
        mid = 0.5 * (lo + hi)
        return all(self.coeff_segment_at(k, mid).is_constant() for k in range(self.order))

    def describe(self) -> list[str]:
        return [" | ".join(to_string(seg.expr) for seg in segs) for segs in self.coeffs]


def shift_lambda(op: LinearOperator, lam: float) -> LinearOperator:
    """The operator with a_0 replaced by a_0 + lam; composes additively."""
    return replace(op, lam=op.lam + float(lam))


def extend_to_double(op: LinearOperator) -> LinearOperator:
    """Extend to [0, 2L]: even-index coefficients reflect evenly about L,
    odd-index ones oddly (value -a(2L - t) on the new half)."""
    L = op.length
    new_coeffs = []
    for k, segs in enumerate(op.coeffs):
        mirrored = tuple(
            seg.mapped(2 * L - seg.hi, 2 * L - seg.lo, about=2 * L, flip_sign=(k % 2 == 1))
            for seg in reversed(segs)
        )
        new_coeffs.append(segs + mirrored)
    return LinearOperator(n=op.n, length=2 * L, coeffs=tuple(new_coeffs), lam=op.lam)


def extend_to_quadruple(op: LinearOperator) -> LinearOperator:
    """Two successive doublings, yielding the operator on [0, 4L]."""
    return extend_to_double(extend_to_double(op))


def reflect(op: LinearOperator) -> LinearOperator:
    """Coefficient reflection: a_k(t) becomes (-1)^k a_k(L - t)."""
    L = op.length
    new_coeffs = []
    for k, segs in enumerate(op.coeffs):
        new_coeffs.append(
            tuple(
                seg.mapped(L - seg.hi, L - seg.lo, about=L, flip_sign=(k % 2 == 1))
                for seg in reversed(segs)
            )
        )
    return LinearOperator(n=op.n, length=L, coeffs=tuple(new_coeffs), lam=op.lam)


def coeff_value(op: LinearOperator, k: int, t: float, lam: float = 0.0) -> float:
    """Value of a_k(t); ``lam`` (plus the operator's own offset) is added when k=0."""
    if not 0 <= k < op.order:
        raise IndexError(f"coefficient index {k} out of range for order {op.order}")
    if t < -1e-12 or t > op.length + 1e-12:
        raise ValueError(f"t={t} outside the operator interval [0, {op.length}]")
    seg = op.coeff_segment_at(k, min(max(t, 0.0), op.length))
    value = float(seg.evaluate(t, lam))
    if k == 0:
        value += op.lam + lam
    return value


def coeff_values(op: LinearOperator, k: int, ts: np.ndarray, lam: float = 0.0) -> np.ndarray:
    """Vectorized coefficient sampling (t values may span several segments)."""
    ts = np.asarray(ts, dtype=float)
    out = np.empty_like(ts)
    segs = op.coeffs[k]
    bounds = np.array([seg.hi for seg in segs[:-1]])
    idx = np.searchsorted(bounds, ts, side="right")
    for i, seg in enumerate(segs):
        mask = idx == i
        if np.any(mask):
            out[mask] = seg.evaluate(ts[mask], lam)
    if k == 0:
        out += op.lam + lam
    return out
