"""Step-by-step verification of the sup-norm estimate chain.

Each inequality of the chain becomes one record.  Steps with a computable
constant (boundary growth, boundary Holder, boundary-max vs volume-max) are
asserted on every corpus element: they are theorems about all functions and
admit no violations.  Steps whose constant is merely known to exist
(interpolation ratio, main estimate) are never asserted pointwise; the suite
tracks their maxima across refinement and reports saturation, the testable
surrogate for a function-independent constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import FemFunction, fem_space
from .linear_solver import SMOOTH_FIELDS, smooth_field_from_coefficients
from .nonlinear import SolveOutcome, ar_check
from .norms import gn_ratio, norm_h1, norm_linf, norm_lp

__all__ = [
    "CertificationError",
    "CorpusDescriptor",
    "Corpus",
    "build_corpus",
    "StepRecord",
    "ChainReport",
    "sup_branch",
    "chain_boundary_growth",
    "boundary_holder",
    "infty_cont",
    "run_universal_suite",
    "gn_ratio_suite",
    "GnSuiteReport",
    "main_estimate_ratio",
    "h1_trace_bound",
    "norm_equivalence_report",
    "EquivalenceReport",
    "energy_bound_check",
    "EnergyReport",
]


class CertificationError(ValueError):
    """Raised when a solution-only step receives an uncertified function."""


@dataclass(frozen=True)
class CorpusDescriptor:
    seed: int
    size: int
    n: int


@dataclass(eq=False)
class Corpus:
    descriptor: CorpusDescriptor
    functions: list
    kinds: list


def build_corpus(mesh, size, seed, solutions=()):
    """Seeded test corpus: half random nodal noise, a quarter smooth fields,
    a quarter computed solutions (cycled with seeded positive scalings when
    fewer distinct solutions than slots are available).

    Amplitudes are drawn log-uniformly so both branches of the sup-norm
    dichotomy (max above / below one) are exercised.
    """
    rng = np.random.default_rng(seed)
    nv = mesh.num_vertices
    n_random = size // 2
    n_smooth = size // 4 if solutions else size - n_random
    n_solution = size - n_random - n_smooth if solutions else 0

    functions, kinds = [], []
    for _ in range(n_random):
        amp = 10.0 ** rng.uniform(-2.0, 1.0)
        functions.append(FemFunction(mesh, amp * rng.standard_normal(nv)))
        kinds.append("random")
    for _ in range(n_smooth):
        coeffs = rng.standard_normal(len(SMOOTH_FIELDS))
        amp = 10.0 ** rng.uniform(-2.0, 1.0)
        fn = smooth_field_from_coefficients(coeffs)
        functions.append(FemFunction(mesh, amp * fn(mesh.vertices)))
        kinds.append("smooth")
    for i in range(n_solution):
        base = solutions[i % len(solutions)]
        scale = 1.0 if i < len(solutions) else 10.0 ** rng.uniform(-1.0, 1.0)
        functions.append(FemFunction(mesh, scale * base.values))
        kinds.append("solution")
    return Corpus(
        descriptor=CorpusDescriptor(seed=seed, size=size, n=mesh.n),
        functions=functions,
        kinds=kinds,
    )


@dataclass(eq=False)
class StepRecord:
    step: str
    left: float
    right: float
    constant: float
    verdict: str
    branch: str = ""
    n: int = 0
    data: dict = field(default_factory=dict)

    def as_dict(self):
        out = {
            "step": self.step,
            "left": self.left,
            "right": self.right,
            "constant": self.constant,
            "verdict": self.verdict,
            "branch": self.branch,
            "n": self.n,
        }
        out.update(self.data)
        return out


def sup_branch(u):
    """Which side of the sup-norm dichotomy a function exercises."""
    return "sup>1" if norm_linf(u) > 1.0 else "sup<=1"


# -- explicit-constant steps ---------------------------------------------------


def chain_boundary_growth(u, ctx, B0=1.0):
    """Boundary growth step with its computable constant.

    Checks ||f(u)||_{L^q(bnd)}^q <= C * (1 + max|u|^(pq - r) * int_bnd |u|^r)
    with r the trace-critical exponent, f the B0-scaled pure power and
    C = B0^q * 2^(q-1) * max(|bnd|, 1).  This holds for every function, not
    only solutions, so the verdict asserts it outright.
    """
    p = float(ctx.p)
    q = float(ctx.q)
    r = float(ctx.two_low_star)
    if p * q < r:
        raise ValueError("boundary growth step requires p*q >= trace-critical exponent")
    space = fem_space(u.mesh)
    area = float(space.face_areas.sum())
    constant = B0**q * 2.0 ** (q - 1.0) * max(area, 1.0)

    flux_q = B0**q * norm_lp(u, p * q, "boundary") ** (p * q)
    linf = norm_linf(u)
    trace_mass = norm_lp(u, r, "boundary") ** r
    right = constant * (1.0 + linf ** (p * q - r) * trace_mass)
    verdict = "pass" if flux_q <= right else "fail"
    return StepRecord(
        step="boundary_growth",
        left=flux_q,
        right=right,
        constant=constant,
        verdict=verdict,
        branch=sup_branch(u),
        n=u.mesh.n,
        data={"ctx_key": ctx.key()},
    )


def boundary_holder(u, psi, ctx, B0=1.0):
    """Duality bound int_bnd |f(u) psi| <= ||f(u)||_{conj} * ||psi||_{trace-critical}."""
    p = float(ctx.p)
    r = float(ctx.two_low_star)
    r_conj = r / (r - 1.0)
    space = fem_space(u.mesh)
    uq = space.boundary_values(u.values)
    fq = B0 * np.sign(uq) * np.abs(uq) ** p
    psiq = space.boundary_values(psi.values)
    left = space.boundary_integral(np.abs(fq * psiq))
    f_norm = space.boundary_integral(np.abs(fq) ** r_conj) ** (1.0 / r_conj)
    right = f_norm * norm_lp(psi, r, "boundary")
    verdict = "pass" if left <= right * (1.0 + 1e-10) + 1e-300 else "fail"
    return StepRecord(
        step="boundary_holder",
        left=left,
        right=right,
        constant=1.0,
        verdict=verdict,
        branch=sup_branch(u),
        n=u.mesh.n,
        data={"ctx_key": ctx.key()},
    )


def infty_cont(u):
    """Discrete form of ||u||_{inf, bnd} <= ||u||_{inf, volume} (exact)."""
    left = norm_linf(u, "boundary")
    right = norm_linf(u, "volume")
    return StepRecord(
        step="boundary_max_vs_volume_max",
        left=left,
        right=right,
        constant=1.0,
        verdict="pass" if left <= right else "fail",
        branch=sup_branch(u),
        n=u.mesh.n,
    )


def run_universal_suite(mesh, ctx, B0, size, seed, solutions=()):
    """All explicit-constant steps over a fresh corpus; returns a ChainReport."""
    corpus = build_corpus(mesh, size, seed, solutions=solutions)
    records = []
    size_actual = len(corpus.functions)
    for i, u in enumerate(corpus.functions):
        psi = corpus.functions[(i + 1) % size_actual]
        records.append(chain_boundary_growth(u, ctx, B0))
        records.append(boundary_holder(u, psi, ctx, B0))
        records.append(infty_cont(u))
    return ChainReport(context=ctx, records=records, corpus=corpus.descriptor)


# -- fitted-constant steps -----------------------------------------------------


@dataclass(eq=False)
class GnSuiteReport:
    rows: list          # per n: n, size, max_ratio, branch counts
    verdict: str        # "saturating" or "growing"
    factors: list       # max-ratio factors between consecutive levels

    def max_ratio(self, n):
        for row in self.rows:
            if row["n"] == n:
                return row["max_ratio"]
        raise KeyError(n)


def gn_ratio_suite(corpora, ctx):
    """Interpolation-ratio maxima per mesh level over the given corpora.

    The verdict is "saturating" when the max at each finer level is at most
    twice the max at the previous one.
    """
    rows = []
    for corpus in sorted(corpora, key=lambda c: c.descriptor.n):
        ratios = []
        gt1 = le1 = 0
        for u in corpus.functions:
            ratios.append(gn_ratio(u, ctx))
            if sup_branch(u) == "sup>1":
                gt1 += 1
            else:
                le1 += 1
        rows.append(
            {
                "n": corpus.descriptor.n,
                "size": len(corpus.functions),
                "max_ratio": max(ratios),
                "branch_sup_gt1": gt1,
                "branch_sup_le1": le1,
            }
        )
    factors = [b["max_ratio"] / a["max_ratio"] for a, b in zip(rows, rows[1:])]
    verdict = "saturating" if all(f <= 2.0 for f in factors) else "growing"
    return GnSuiteReport(rows=rows, verdict=verdict, factors=factors)


def _require_certified(outcome, what):
    if not isinstance(outcome, SolveOutcome):
        raise CertificationError(f"{what} requires a SolveOutcome carrying its residual")
    if not outcome.weak_residual <= outcome.tolerance:
        raise CertificationError(
            f"{what} rejects uncertified input: weak residual "
            f"{outcome.weak_residual:.3e} exceeds tolerance {outcome.tolerance:.3e}"
        )


def main_estimate_ratio(outcome, ctx):
    """Observed constants of the main estimate for one certified solution.

    Records rho = ||u||_inf / (1 + ||u||_H1)^A and the split form
    rho_hat = ||u||_inf / ((1 + ||u||_{trace})^A1 (1 + ||u||_{volume})^A2);
    across a family of solutions the running max of rho is the fitted
    constant.
    """
    _require_certified(outcome, "main_estimate_ratio")
    u = outcome.solution
    A = float(ctx.A)
    a1 = float(ctx.A_hat1)
    a2 = float(ctx.A_hat2)
    linf = norm_linf(u)
    h1 = norm_h1(u)
    trace = norm_lp(u, float(ctx.two_low_star), "boundary")
    vol = norm_lp(u, float(ctx.two_star), "volume")
    right = (1.0 + h1) ** A
    rho = linf / right
    rho_hat = linf / ((1.0 + trace**a1) * (1.0 + vol**a2))
    ok = np.isfinite(rho) and np.isfinite(rho_hat)
    return StepRecord(
        step="main_estimate",
        left=linf,
        right=right,
        constant=rho,
        verdict="finite" if ok else "nonfinite",
        branch=sup_branch(u),
        n=u.mesh.n,
        data={
            "rho": rho,
            "rho_hat": rho_hat,
            "h1": h1,
            "l_two_low_star_boundary": trace,
            "l_two_star_volume": vol,
            "ctx_key": ctx.key(),
        },
    )


def h1_trace_bound(u, nl, rel_tol=1e-6):
    """Two-part bound behind the trace estimate of the H1 norm.

    (a) the weak form tested with the solution itself:
        ||u||_H1^2 equals int_bnd f(u) u within rel_tol (encodes solutionhood);
    (b) the Holder bound int_bnd f(u) u <= ||f(u)||_{conj} ||u||_{trace-critical},
        which holds for every function.

    Accepts a certified SolveOutcome or a bare FemFunction (for which (a) is
    expected to fail unless the function happens to solve the problem).
    """
    if isinstance(u, SolveOutcome):
        _require_certified(u, "h1_trace_bound")
        u = u.solution
    space = fem_space(u.mesh)
    h1_sq = space.h1_operator().quadratic_form(u.values)
    uq = space.boundary_values(u.values)
    fq = nl.f(space.bnd_pts, uq)
    uf = space.boundary_integral(fq * uq)

    part_a = abs(h1_sq - uf) <= rel_tol * max(1.0, h1_sq)

    r = 4.0  # trace-critical exponent at N = 3
    r_conj = r / (r - 1.0)
    f_norm = space.boundary_integral(np.abs(fq) ** r_conj) ** (1.0 / r_conj)
    trace_norm = space.boundary_integral(np.abs(uq) ** r) ** (1.0 / r)
    holder_left = space.boundary_integral(np.abs(fq * uq))
    part_b = holder_left <= f_norm * trace_norm * (1.0 + 1e-10) + 1e-300

    return StepRecord(
        step="h1_trace_bound",
        left=h1_sq,
        right=uf,
        constant=1.0,
        verdict="pass" if (part_a and part_b) else "fail",
        branch=sup_branch(u),
        n=u.mesh.n,
        data={
            "part_a": "pass" if part_a else "fail",
            "part_b": "pass" if part_b else "fail",
            "holder_left": holder_left,
            "holder_right": f_norm * trace_norm,
        },
    )


# -- family-level reports --------------------------------------------------------


@dataclass(eq=False)
class EquivalenceReport:
    rows: list
    column_max: dict
    co_bounded: bool
    co_vanishing: bool


_EQUIV_COLUMNS = ("l_two_low_star_boundary", "h1", "linf", "c_norm")


def norm_equivalence_report(outcomes):
    """The four equivalent norms tabulated over a certified family.

    ``co_bounded``: every column maximum is finite.  ``co_vanishing``: every
    column decays along the family ordering (last value below max(1e-8,
    1e-3 * first) -- the finite-sample reading of joint convergence to zero).
    The continuous-max norm column equals the discrete sup norm for P1.
    """
    if not outcomes:
        raise ValueError("norm equivalence requires a non-empty family")
    for outcome in outcomes:
        _require_certified(outcome, "norm_equivalence_report")
    rows = []
    for idx, outcome in enumerate(outcomes):
        u = outcome.solution
        linf = norm_linf(u)
        rows.append(
            {
                "member": idx,
                "n": u.mesh.n,
                "l_two_low_star_boundary": norm_lp(u, 4.0, "boundary"),
                "h1": norm_h1(u),
                "linf": linf,
                "c_norm": linf,
            }
        )
    column_max = {c: max(r[c] for r in rows) for c in _EQUIV_COLUMNS}
    co_bounded = all(np.isfinite(v) for v in column_max.values())
    co_vanishing = all(
        rows[-1][c] <= max(1e-8, 1e-3 * rows[0][c]) for c in _EQUIV_COLUMNS
    )
    return EquivalenceReport(
        rows=rows, column_max=column_max, co_bounded=co_bounded, co_vanishing=co_vanishing
    )


@dataclass(eq=False)
class EnergyReport:
    rows: list
    bounded_energy: bool
    bounded_h1: bool
    consistent: bool


def energy_bound_check(outcomes, nl, rel_tol=1e-6):
    """Energy bound of the superlinear problem over a certified family.

    Per member: J[u], ||u||_H1^2, int_bnd u f(u) and theta int_bnd F(u), plus
    the lower bound J >= (1/2 - 1/theta) ||u||_H1^2 - C(s0) with the explicit
    C(s0) (zero for the pure power, where s0 = 0).  The two boundedness flags
    realise both directions of the equivalence on the finite family.
    """
    from .norms import energy_J

    check = ar_check(nl)
    if not check.ok:
        raise ValueError(f"nonlinearity fails the superlinearity check: {check.message}")
    for outcome in outcomes:
        _require_certified(outcome, "energy_bound_check")

    if nl.s0 == 0.0:
        c_s0 = 0.0
    else:
        s_grid = np.linspace(-nl.s0, nl.s0, 2001)
        x = np.zeros((s_grid.size, 3))
        gap = nl.F(x, s_grid) - s_grid * nl.f(x, s_grid) / nl.theta
        c_s0 = 6.0 * float(np.max(np.maximum(gap, 0.0)))

    rows = []
    all_ok = True
    for idx, outcome in enumerate(outcomes):
        u = outcome.solution
        space = fem_space(u.mesh)
        h1_sq = space.h1_operator().quadratic_form(u.values)
        uq = space.boundary_values(u.values)
        uf = space.boundary_integral(nl.f(space.bnd_pts, uq) * uq)
        theta_F = nl.theta * space.boundary_integral(nl.F(space.bnd_pts, uq))
        J = energy_J(u, nl)
        bound = (0.5 - 1.0 / nl.theta) * h1_sq - c_s0
        ok = J >= bound - rel_tol * max(1.0, h1_sq)
        all_ok = all_ok and ok
        row = {
            "member": idx,
            "n": u.mesh.n,
            "J": J,
            "h1_sq": h1_sq,
            "uf_integral": uf,
            "theta_F_integral": theta_F,
            "lower_bound": bound,
            "bound_verdict": "pass" if ok else "fail",
        }
        if nl.kind == "power":
            target = (0.5 - 1.0 / nl.theta) * h1_sq
            row["identity_rel_error"] = abs(J - target) / max(1.0, abs(target))
        rows.append(row)

    max_J = max((r["J"] for r in rows), default=0.0)
    max_h1 = max((r["h1_sq"] for r in rows), default=0.0)
    bounded_energy = np.isfinite(max_J)
    bounded_h1 = np.isfinite(max_h1)
    report = EnergyReport(
        rows=rows,
        bounded_energy=bool(bounded_energy),
        bounded_h1=bool(bounded_h1),
        consistent=bool(bounded_energy == bounded_h1) and all_ok,
    )
    return report


# -- report container -----------------------------------------------------------


@dataclass(eq=False)
class ChainReport:
    """Record set for one verification run, tied to a single exponent context."""

    context: object
    records: list
    corpus: CorpusDescriptor = None

    def __post_init__(self):
        keys = {r.data["ctx_key"] for r in self.records if "ctx_key" in r.data}
        expected = self.context.key()
        if keys - {expected}:
            raise ValueError(
                f"records mix exponent contexts: {sorted(keys)} vs {expected}"
            )

    @property
    def violations(self):
        return [r for r in self.records if r.verdict == "fail"]

    def branch_counts(self):
        counts = {"sup>1": 0, "sup<=1": 0}
        for r in self.records:
            if r.branch in counts:
                counts[r.branch] += 1
        return counts

    def both_branches(self):
        counts = self.branch_counts()
        return counts["sup>1"] > 0 and counts["sup<=1"] > 0

    def summary_rows(self):
        """Aggregated per-step rows: (step, n, p, q, max_ratio_or_margin, verdict, branch)."""
        groups = {}
        for r in self.records:
            groups.setdefault((r.step, r.n), []).append(r)
        rows = []
        for (step, n), records in groups.items():
            margins = [r.right - r.left for r in records]
            verdict = "pass" if all(r.verdict != "fail" for r in records) else "fail"
            branches = {r.branch for r in records if r.branch}
            branch = "both" if len(branches) > 1 else (branches.pop() if branches else "")
            rows.append(
                {
                    "step": step,
                    "n": n,
                    "p": float(self.context.p),
                    "q": float(self.context.q),
                    "max_ratio_or_margin": min(margins),
                    "verdict": verdict,
                    "branch": branch,
                }
            )
        return rows

    def as_dict(self):
        out = {
            "context": {k: str(v) for k, v in (
                ("N", self.context.N),
                ("p", self.context.p),
                ("q", self.context.q),
                ("m", self.context.m),
                ("sigma", self.context.sigma),
                ("A", self.context.A),
                ("A_hat1", self.context.A_hat1),
                ("A_hat2", self.context.A_hat2),
            )},
            "records": [r.as_dict() for r in self.records],
        }
        if self.corpus is not None:
            out["corpus"] = {
                "seed": self.corpus.seed,
                "size": self.corpus.size,
                "n": self.corpus.n,
            }
        return out
