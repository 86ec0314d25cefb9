"""Sign classification of kernels and constant-sign lambda intervals.

A kernel is classified on a uniform grid augmented with geometrically spaced
near-boundary points: constant-sign intervals typically end where the kernel
develops a zero at the boundary of the square, and the first violations past
the endpoint live in thin strips or corners (scaling like t*s) that a uniform
grid resolves far too late.  Values inside a relative zero band count as
zero, since kernels legitimately vanish along boundary lines.  The interval
search walks outward from the principal eigenvalue until the classification
flips and then bisects the flip point.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field

import numpy as np

from .greens import BCKind, ProblemSpec, ResonantProblemError, build_greens, GreensEvaluator
from .integrate import DEFAULT_TOL, integrate_fundamental_batch
from .operators import LinearOperator, extend_to_double, extend_to_quadruple
from .spectrum import principal_eigenvalue

__all__ = [
    "NONNEGATIVE",
    "NONPOSITIVE",
    "SIGN_CHANGING",
    "ZERO_ON_GRID",
    "SignReport",
    "SignIntervalResult",
    "SignSearchError",
    "classify_sign",
    "classify_problem",
    "sign_interval",
    "verify_sign_corollary",
    "reproduce_counterexamples",
    "sweep_extrema",
    "resolve_kernel",
]

NONNEGATIVE = "nonnegative"
NONPOSITIVE = "nonpositive"
SIGN_CHANGING = "sign-changing"
ZERO_ON_GRID = "identically-zero-on-grid"

# Relative offsets of the extra near-boundary sample points.
_EDGE_OFFSETS = (1e-4, 3e-4, 1e-3, 3e-3)


class SignSearchError(RuntimeError):
    """No constant-sign region adjacent to the principal eigenvalue."""


@dataclass
class SignReport:
    classification: str
    grid_size: int
    min_value: float
    argmin: tuple[float, float]
    max_value: float
    argmax: tuple[float, float]
    zero_band: float

    def to_row(self) -> dict:
        return {
            "classification": self.classification,
            "grid_size": self.grid_size,
            "min": self.min_value,
            "argmin": list(self.argmin),
            "max": self.max_value,
            "argmax": list(self.argmax),
            "zero_band": self.zero_band,
        }


def _sample_points(length: float, m: int) -> np.ndarray:
    pts = set(np.linspace(0.0, length, m))
    for rel in _EDGE_OFFSETS:
        pts.add(rel * length)
        pts.add((1.0 - rel) * length)
    return np.array(sorted(pts))


def classify_sign(G: GreensEvaluator, m: int = 101, zero_band: float = 1e-9) -> SignReport:
    """Classify the kernel sign on its square.

    Values within zero_band * max|G| count as zero.  One adaptive refinement
    pass doubles the resolution inside cells whose corners touch the zero
    band, which is where a developing sign change can hide.
    """
    if m < 41:
        raise ValueError("classification grid must have at least 41 points per side")
    pts = _sample_points(G.length, m)
    values = G.eval_grid(pts, pts)
    scale = float(np.abs(values).max())
    if scale == 0.0:
        zero = (0.0, 0.0)
        return SignReport(ZERO_ON_GRID, m, 0.0, zero, 0.0, zero, zero_band)
    band = zero_band * scale

    ambiguous = np.abs(values) <= band
    cell = ambiguous[:-1, :-1] | ambiguous[1:, :-1] | ambiguous[:-1, 1:] | ambiguous[1:, 1:]
    t_flags = np.zeros(len(pts) - 1, dtype=bool)
    s_flags = np.zeros(len(pts) - 1, dtype=bool)
    rows, cols = np.nonzero(cell)
    t_flags[rows] = True
    s_flags[cols] = True
    mid_t = 0.5 * (pts[:-1] + pts[1:])[t_flags]
    mid_s = 0.5 * (pts[:-1] + pts[1:])[s_flags]

    clouds = [(pts, pts, values)]
    if mid_t.size:
        clouds.append((mid_t, pts, G.eval_grid(mid_t, pts)))
    if mid_s.size:
        clouds.append((pts, mid_s, G.eval_grid(pts, mid_s)))
    if mid_t.size and mid_s.size:
        clouds.append((mid_t, mid_s, G.eval_grid(mid_t, mid_s)))

    vmin, vmax = np.inf, -np.inf
    argmin = argmax = (0.0, 0.0)
    for ts, ss, vals in clouds:
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        if vals[i, j] < vmin:
            vmin, argmin = float(vals[i, j]), (float(ts[i]), float(ss[j]))
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        if vals[i, j] > vmax:
            vmax, argmax = float(vals[i, j]), (float(ts[i]), float(ss[j]))

    has_pos = vmax > band
    has_neg = vmin < -band
    if has_pos and has_neg:
        classification = SIGN_CHANGING
    elif has_pos:
        classification = NONNEGATIVE
    elif has_neg:
        classification = NONPOSITIVE
    else:
        classification = ZERO_ON_GRID
    return SignReport(classification, m, vmin, argmin, vmax, argmax, zero_band)


def classify_problem(op: LinearOperator, kind: BCKind, lam: float, m: int = 101,
                     zero_band: float = 1e-9, tol: float = DEFAULT_TOL) -> str:
    """Classification string for one problem; 'resonant' when G does not exist."""
    try:
        G = build_greens(ProblemSpec(op, kind, lam), tol=tol)
    except ResonantProblemError:
        return "resonant"
    return classify_sign(G, m=m, zero_band=zero_band).classification


@dataclass
class SignIntervalResult:
    kind: BCKind
    side: str                      # "nonpositive-below-principal" | "nonnegative-above-principal"
    lam_lo: float
    lam_hi: float
    endpoint_status: str           # "threshold-found" | "window-exhausted"
    lam_tol: float
    principal: float

    def threshold(self) -> float:
        """The detected endpoint away from the principal eigenvalue."""
        return self.lam_lo if self.side.startswith("nonpositive") else self.lam_hi

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "side": self.side,
            "interval": [self.lam_lo, self.lam_hi],
            "endpoint_status": self.endpoint_status,
            "lam_tol": self.lam_tol,
            "principal": self.principal,
        }


_SIDES = {
    "neg": "nonpositive-below-principal",
    "pos": "nonnegative-above-principal",
    "nonpositive-below-principal": "nonpositive-below-principal",
    "nonnegative-above-principal": "nonnegative-above-principal",
}


def sign_interval(op: LinearOperator, kind: BCKind, side: str,
                  search_window=None, lam_tol: float = 1e-4, m: int = 101,
                  principal_window=None, tol: float = DEFAULT_TOL) -> SignIntervalResult:
    """Maximal constant-sign lambda interval abutting the principal eigenvalue.

    Scans outward from the principal eigenvalue in steps of one percent of
    the window width until the classification flips (to sign-changing,
    the opposite sign, or a resonance), then bisects the flip to lam_tol.
    """
    side = _SIDES.get(side)
    if side is None:
        raise ValueError("side must be 'neg'/'pos' or a full side name")
    want = NONPOSITIVE if side.startswith("nonpositive") else NONNEGATIVE
    direction = -1.0 if side.startswith("nonpositive") else +1.0

    if principal_window is None:
        principal_window = search_window if search_window is not None else (-60.0, 10.0)
    principal = principal_eigenvalue(op, kind, principal_window, tol=tol)
    if search_window is None:
        search_window = (principal - 500.0, principal + 500.0)
    lo_w, hi_w = float(search_window[0]), float(search_window[1])
    if not lo_w <= principal <= hi_w:
        raise ValueError("principal eigenvalue lies outside the search window")
    step = (hi_w - lo_w) / 100.0

    def ok(lam: float) -> bool:
        c = classify_problem(op, kind, lam, m=m, tol=tol)
        return c == want or c == ZERO_ON_GRID

    good = principal
    probe = principal
    status = "threshold-found"
    while True:
        probe = probe + direction * step
        if probe < lo_w or probe > hi_w:
            status = "window-exhausted"
            probe = lo_w if direction < 0 else hi_w
            if probe == good or ok(probe):
                found = probe
                break
            # flip sits between the last good probe and the window edge
            found = _bisect_flip(ok, good, probe, lam_tol)
            status = "threshold-found"
            break
        if ok(probe):
            good = probe
            continue
        found = _bisect_flip(ok, good, probe, lam_tol)
        break

    if status == "threshold-found" and abs(found - principal) <= 2 * lam_tol:
        raise SignSearchError(
            f"no {want} region adjacent to the principal eigenvalue "
            f"{principal:.8g} of the {kind.value} problem")
    lam_lo, lam_hi = (found, principal) if direction < 0 else (principal, found)
    return SignIntervalResult(kind, side, lam_lo, lam_hi, status, lam_tol, principal)


def _bisect_flip(ok, good: float, bad: float, lam_tol: float) -> float:
    while abs(bad - good) > lam_tol:
        mid = 0.5 * (good + bad)
        if ok(mid):
            good = mid
        else:
            bad = mid
    return 0.5 * (good + bad)


_COROLLARY_CASES = [
    ("P2T<=0 => N<=0", "P2T", NONPOSITIVE, "N"),
    ("P2T>=0 => N>=0", "P2T", NONNEGATIVE, "N"),
    ("N2T<=0 => N<=0", "N2T", NONPOSITIVE, "N"),
    ("N2T>=0 => N>=0", "N2T", NONNEGATIVE, "N"),
    ("D2T<=0 => M2<=0", "D2T", NONPOSITIVE, "M2"),
    ("D2T>=0 => M2>=0", "D2T", NONNEGATIVE, "M2"),
]


def resolve_kernel(op: LinearOperator, code: str) -> tuple[LinearOperator, BCKind]:
    """Map a kernel code (N, D, M1, M2, P2T, A2T, N2T, D2T, P4T) to the
    operator on the right interval and its boundary family."""
    table = {
        "N": (op, BCKind.NEUMANN),
        "D": (op, BCKind.DIRICHLET),
        "M1": (op, BCKind.MIXED1),
        "M2": (op, BCKind.MIXED2),
        "P2T": (extend_to_double(op), BCKind.PERIODIC),
        "A2T": (extend_to_double(op), BCKind.ANTIPERIODIC),
        "N2T": (extend_to_double(op), BCKind.NEUMANN),
        "D2T": (extend_to_double(op), BCKind.DIRICHLET),
        "P4T": (extend_to_quadruple(op), BCKind.PERIODIC),
    }
    if code not in table:
        raise ValueError(f"unknown kernel code {code!r}")
    return table[code]


def verify_sign_corollary(op: LinearOperator, lam_samples, m: int = 101,
                          tol: float = DEFAULT_TOL) -> list[dict]:
    """For each lambda where a premise kernel has constant sign, assert the
    implied sign of the conclusion kernel; violating rows carry the location
    of the offending extremum."""
    rows = []
    for lam in lam_samples:
        cache: dict[str, SignReport | str] = {}

        def rep(code):
            if code not in cache:
                o, kind = resolve_kernel(op, code)
                try:
                    G = build_greens(ProblemSpec(o, kind, lam), tol=tol)
                except ResonantProblemError:
                    cache[code] = "resonant"
                else:
                    cache[code] = classify_sign(G, m=m)
            return cache[code]

        def cls(code):
            r = rep(code)
            return r if isinstance(r, str) else r.classification

        for tag, premise_code, premise_sign, conclusion_code in _COROLLARY_CASES:
            premise = cls(premise_code)
            if premise != premise_sign:
                rows.append({"tag": tag, "lambda": lam, "applicable": False,
                             "premise": premise, "conclusion": None, "pass": True})
                continue
            conclusion = cls(conclusion_code)
            ok = conclusion in (premise_sign, ZERO_ON_GRID)
            row = {"tag": tag, "lambda": lam, "applicable": True,
                   "premise": premise, "conclusion": conclusion, "pass": ok}
            if not ok and not isinstance(rep(conclusion_code), str):
                r = rep(conclusion_code)
                row["violation_location"] = list(
                    r.argmin if premise_sign == NONNEGATIVE else r.argmax)
            rows.append(row)
    return rows


def sweep_extrema(op: LinearOperator, kind: BCKind, lams, m: int = 41,
                  tol: float = DEFAULT_TOL) -> list[tuple[float, float, float]]:
    """Rows (lambda, min G, max G) for plotting; resonant lambdas give NaN."""
    rows = []
    for lam in np.atleast_1d(np.asarray(lams, dtype=float)):
        try:
            G = build_greens(ProblemSpec(op, kind, float(lam)), tol=tol)
        except ResonantProblemError:
            rows.append((float(lam), float("nan"), float("nan")))
            continue
        g = G.sample_grid(m)
        rows.append((float(lam), float(g.min()), float(g.max())))
    return rows


def _load_fixtures() -> dict:
    text = importlib.resources.files("greenbvp").joinpath("data/paper_examples.json").read_text()
    return json.loads(text)


def _operator_from_fixture(spec: dict) -> LinearOperator:
    return LinearOperator.from_exprs(spec["n"], spec["T"], spec["coefficients"])


@dataclass
class ReproductionReport:
    rows: list[dict] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(r["pass"] for r in self.rows)


def reproduce_counterexamples(fixtures: dict | None = None, m: int = 101,
                              tol: float = DEFAULT_TOL) -> ReproductionReport:
    """Run the fixed scenario list: sign classifications at the quoted
    lambdas and the threshold searches, each row pass/fail."""
    data = fixtures if fixtures is not None else _load_fixtures()
    report = ReproductionReport()

    for scenario in data.get("classification_scenarios", []):
        op = _operator_from_fixture(scenario["operator"])
        lam = float(scenario["lambda"])
        for code, expected in scenario["expected"].items():
            o, kind = resolve_kernel(op, code)
            observed = classify_problem(o, kind, lam, m=m, tol=tol)
            report.rows.append({
                "scenario": scenario["name"],
                "lambda": lam,
                "kernel": code,
                "expected": expected,
                "observed": observed,
                "pass": observed == expected,
            })

    for row in data.get("thresholds", []):
        op = _operator_from_fixture(row["operator"])
        o, kind = resolve_kernel(op, row["kernel"])
        expected = float(row["value"])
        rel_tol = float(row.get("rel_tol", 1e-2))
        pw = tuple(row["principal_window"])
        if row["type"] == "principal":
            observed = principal_eigenvalue(o, kind, pw, tol=tol)
        else:
            side = "neg" if row["type"] == "nonpositive" else "pos"
            result = sign_interval(o, kind, side, principal_window=pw, m=m, tol=tol)
            observed = result.threshold()
        rel = abs(observed - expected) / abs(expected)
        report.rows.append({
            "scenario": row["name"],
            "lambda": expected,
            "kernel": row["kernel"],
            "expected": expected,
            "observed": observed,
            "pass": rel <= rel_tol,
        })
    return report
