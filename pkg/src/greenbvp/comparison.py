"""Nonhomogeneous solves via the Green integral and comparison principles.

u(t) = integral of G(t, s) sigma(s) ds is evaluated by composite Simpson
quadrature on the kernel grid, with the s-integral split at s = t because the
kernel is continuous but not smooth across the diagonal.  The comparison
checks verify the pointwise kernel dominations and the solution inequalities
that follow from a constant-sign premise kernel on the doubled interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expressions import ExprAst, compile_expr, parse_expression
from .greens import BCKind, GreensEvaluator, ProblemSpec, build_greens
from .integrate import DEFAULT_TOL
from .operators import LinearOperator, extend_to_double
from .signscan import NONNEGATIVE, NONPOSITIVE, ZERO_ON_GRID, classify_sign

__all__ = [
    "SampledSolution",
    "HypothesisError",
    "solve_bvp",
    "check_kernel_domination",
    "check_solution_comparison",
    "THEOREM_TAGS",
]

SLACK_REL = 1e-9


class HypothesisError(ValueError):
    """The source pair violates the hypothesis of the requested case."""


@dataclass
class SampledSolution:
    kind: BCKind
    ts: np.ndarray
    values: np.ndarray
    source: str

    def to_rows(self) -> list[dict]:
        return [{"t": float(t), "u": float(u)} for t, u in zip(self.ts, self.values)]


def _as_expr(sigma) -> ExprAst:
    if isinstance(sigma, str):
        return parse_expression(sigma)
    return sigma


def _simpson_nodes(vals: np.ndarray, xs: np.ndarray) -> float:
    """Composite Simpson on the given nodes (>= 2 subintervals)."""
    n = len(xs) - 1
    h = xs[1] - xs[0]
    total = 0.0
    start = 0
    if n % 2 == 1:
        total += 3 * h / 8 * (vals[0] + 3 * vals[1] + 3 * vals[2] + vals[3])
        start = 3
    seg = vals[start:]
    if len(seg) >= 3:
        total += h / 3 * (seg[0] + 4 * seg[1:-1:2].sum() + 2 * seg[2:-2:2].sum() + seg[-1])
    return float(total)


def solve_bvp(G: GreensEvaluator, sigma, m: int = 81) -> SampledSolution:
    """Solution samples u(t_i) of L[lam] u = sigma under the kernel's
    boundary conditions, by Simpson quadrature split at the diagonal.

    m must be odd and at least 41 so every split panel keeps at least
    fourth-order accuracy.
    """
    if m < 41 or m % 2 == 0:
        raise ValueError("quadrature grid must be odd and at least 41")
    expr = _as_expr(sigma)
    f = compile_expr(expr)
    lam = G.problem.lam
    ts = np.linspace(0.0, G.length, m)
    sig = np.broadcast_to(np.asarray(f(ts, lam), dtype=float), ts.shape)
    grid = G.eval_grid(ts, ts)
    values = np.empty(m)
    for i in range(m):
        left = grid[i, : i + 1] * sig[: i + 1]
        right = grid[i, i:] * sig[i:]
        total = 0.0
        for vals, xs, lo_idx in ((left, ts[: i + 1], 0), (right, ts[i:], i)):
            n = len(xs) - 1
            if n == 0:
                continue
            if n == 1:
                mid = 0.5 * (xs[0] + xs[1])
                gm = G(ts[i], mid) * float(f(mid, lam))
                total += (xs[1] - xs[0]) / 6.0 * (vals[0] + 4 * gm + vals[1])
            else:
                total += _simpson_nodes(vals, xs)
        values[i] = total
    source = sigma if isinstance(sigma, str) else "<expr>"
    return SampledSolution(G.problem.kind, ts, values, source)


# theorem tag -> (premise kernel kind on the doubled interval,
#                 primary problem, secondary problem)
THEOREM_TAGS = {
    "ND": (BCKind.PERIODIC, BCKind.NEUMANN, BCKind.DIRICHLET),
    "NM1": (BCKind.NEUMANN, BCKind.NEUMANN, BCKind.MIXED1),
    "M2D": (BCKind.DIRICHLET, BCKind.MIXED2, BCKind.DIRICHLET),
}


@dataclass
class DominationRow:
    tag: str
    premise: str
    applicable: bool
    passed: bool
    worst_violation: float
    location: tuple[float, float]

    def to_row(self) -> dict:
        return {"tag": self.tag, "premise": self.premise, "applicable": self.applicable,
                "pass": self.passed, "worst_violation": self.worst_violation,
                "location": list(self.location)}


def _check_pointwise(diff: np.ndarray, ts: np.ndarray, scale: float):
    """diff >= -slack everywhere; returns (passed, worst, location)."""
    slack = SLACK_REL * scale
    i, j = np.unravel_index(np.argmin(diff), diff.shape)
    worst = float(diff[i, j])
    return bool(worst >= -slack), worst, (float(ts[i]), float(ts[j]))


def check_kernel_domination(op: LinearOperator, lam: float, m: int = 41,
                            tol: float = DEFAULT_TOL) -> list[DominationRow]:
    """The pointwise kernel dominations implied by a constant-sign premise:
    premise >= 0 gives A >= |B|, premise <= 0 gives A <= -|B| on the base
    square, for the pairs (N, D), (N, M1) and (M2, D)."""
    op2 = extend_to_double(op)
    ts = np.linspace(0.0, op.length, m)
    rows = []
    for tag, (premise_kind, primary, secondary) in THEOREM_TAGS.items():
        premise_class = _premise_classification(op2, premise_kind, lam, tol)
        name = f"{tag}: {premise_kind.value}[2T] {premise_class}"
        if premise_class not in (NONNEGATIVE, NONPOSITIVE):
            rows.append(DominationRow(name, premise_class, False, True, 0.0, (0.0, 0.0)))
            continue
        A = build_greens(ProblemSpec(op, primary, lam), tol=tol).eval_grid(ts, ts)
        B = build_greens(ProblemSpec(op, secondary, lam), tol=tol).eval_grid(ts, ts)
        scale = max(np.abs(A).max(), np.abs(B).max())
        if premise_class == NONNEGATIVE:
            diff = A - np.abs(B)
        else:
            diff = -np.abs(B) - A
        passed, worst, loc = _check_pointwise(diff, ts, scale)
        rows.append(DominationRow(name, premise_class, True, passed, worst, loc))
    return rows


def _premise_classification(op2, kind, lam, tol):
    from .greens import ResonantProblemError
    try:
        GP = build_greens(ProblemSpec(op2, kind, lam), tol=tol)
    except ResonantProblemError:
        return "resonant"
    return classify_sign(GP).classification


@dataclass
class ComparisonReport:
    tag: str
    case: int
    applicable: bool
    premise: str
    passed: bool
    conclusions: list[dict]
    primary: SampledSolution | None = None
    secondary: SampledSolution | None = None

    def to_json(self) -> dict:
        return {"tag": self.tag, "case": self.case, "applicable": self.applicable,
                "premise": self.premise, "pass": self.passed,
                "conclusions": self.conclusions}


def check_solution_comparison(tag: str, case: int, op: LinearOperator, lam: float,
                              sigma1, sigma2, m: int = 81,
                              tol: float = DEFAULT_TOL) -> ComparisonReport:
    """One comparison theorem case.

    Case 1 (premise >= 0, |sigma2| <= sigma1): |u_secondary| <= u_primary.
    Case 2 (premise <= 0, 0 <= sigma2 <= sigma1): u_primary <= 0 and
    u_primary <= u_secondary.
    Case 3 (premise <= 0, sigma1 <= sigma2 <= 0): u_primary >= 0 and
    u_secondary <= u_primary.

    The sigma hypothesis is verified on the quadrature grid and violations
    are rejected before solving; a premise kernel of the wrong sign yields a
    not-applicable report.
    """
    if tag not in THEOREM_TAGS:
        raise ValueError(f"unknown theorem tag {tag!r}; expected one of {list(THEOREM_TAGS)}")
    if case not in (1, 2, 3):
        raise ValueError("case must be 1, 2 or 3")
    premise_kind, primary_kind, secondary_kind = THEOREM_TAGS[tag]

    f1 = compile_expr(_as_expr(sigma1))
    f2 = compile_expr(_as_expr(sigma2))
    ts = np.linspace(0.0, op.length, m)
    s1 = np.broadcast_to(np.asarray(f1(ts, lam), dtype=float), ts.shape)
    s2 = np.broadcast_to(np.asarray(f2(ts, lam), dtype=float), ts.shape)
    htol = 1e-12 * max(1.0, np.abs(s1).max(), np.abs(s2).max())
    if case == 1:
        if not np.all(np.abs(s2) <= s1 + htol):
            raise HypothesisError("case 1 needs |sigma2| <= sigma1 on the interval")
    elif case == 2:
        if not (np.all(s2 >= -htol) and np.all(s2 <= s1 + htol)):
            raise HypothesisError("case 2 needs 0 <= sigma2 <= sigma1 on the interval")
    else:
        if not (np.all(s2 <= htol) and np.all(s1 <= s2 + htol)):
            raise HypothesisError("case 3 needs sigma1 <= sigma2 <= 0 on the interval")

    op2 = extend_to_double(op)
    premise_class = _premise_classification(op2, premise_kind, lam, tol)
    required = NONNEGATIVE if case == 1 else NONPOSITIVE
    if premise_class not in (required, ZERO_ON_GRID):
        return ComparisonReport(tag, case, False, premise_class, True, [])

    u1 = solve_bvp(build_greens(ProblemSpec(op, primary_kind, lam), tol=tol), sigma1, m)
    u2 = solve_bvp(build_greens(ProblemSpec(op, secondary_kind, lam), tol=tol), sigma2, m)
    scale = max(np.abs(u1.values).max(), np.abs(u2.values).max(), 1e-300)
    slack = SLACK_REL * scale

    conclusions = []

    def record(name, diff):
        worst = float(diff.min())
        k = int(np.argmin(diff))
        conclusions.append({"conclusion": name, "worst_slack": worst,
                            "location": float(ts[k]), "pass": bool(worst >= -slack)})

    if case == 1:
        record("|u2| <= u1", u1.values - np.abs(u2.values))
    elif case == 2:
        record("u1 <= 0", -u1.values)
        record("u1 <= u2", u2.values - u1.values)
    else:
        record("u1 >= 0", u1.values)
        record("u2 <= u1", u1.values - u2.values)
    passed = all(c["pass"] for c in conclusions)
    return ComparisonReport(tag, case, True, premise_class, passed, conclusions, u1, u2)
