"""Membership decisions with verified certificates, plus moment body geometry.

:func:`decide` runs the whole pipeline: precondition, cheap rejections,
L-BFGS, back-mapping of the certificate and an independent re-check of it in
the caller's coordinates. The ``verify_*`` functions recompute everything they
need from scratch and share nothing with the solver.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import InvalidInput, NotASeparator, NotPreconditioned, NotUnit
from .moment_map import Instance, MomentMap
from .precondition import (
    PreconditionedInstance,
    TransformRecord,
    backmap_feasible,
    backmap_infeasible,
    precondition,
)
from .solver import (
    Feasible,
    Indeterminate,
    Infeasible,
    IterationTrace,
    NotInterior,
    SolverConfig,
    minimize,
)
from .spectral import entropy_term, exp1, lambda_extremes

UNIT_TOL = 1e-8


class QuickReject(NamedTuple):
    reason: str
    direction: np.ndarray  # unit vector separating b from the body


class FeasibilityCheck(NamedTuple):
    passed: bool
    residual: float
    min_eigenvalue: float
    trace_error: float


class SeparationCheck(NamedTuple):
    passed: bool
    gap: float


@dataclass
class MembershipReport:
    verdict: str
    certificate: dict
    verification: dict
    duality_check: dict | None = None
    quick_reject_reason: str | None = None
    iterations: int = 0
    timings: dict = field(default_factory=dict)
    outcome: object = None
    trace: IterationTrace | None = None


def radius(n: int) -> float:
    """Radius of a normalized moment body around the origin."""
    return float(np.sqrt((n - 1) / n))


def thickness(n: int) -> float:
    """Lower bound on the width of a normalized moment body in any direction."""
    return float(np.sqrt(n / ((n // 2) * ((n + 1) // 2))))


def quick_reject(map: MomentMap, b_hat) -> QuickReject | None:
    """Cheap infeasibility tests valid for a normalized map.

    Rejects when ``||b|| > sqrt((n-1)/n)`` or when some ``b_i`` lies outside
    ``[lambda_min(A_i), lambda_max(A_i)]``; in both cases a separating unit
    direction comes for free.
    """
    b_hat = np.asarray(b_hat, dtype=float)
    if b_hat.shape != (map.m,):
        raise InvalidInput("b has the wrong length")
    nb = float(np.linalg.norm(b_hat))
    rad = radius(map.n)
    if nb > rad:
        return QuickReject(f"||b|| = {nb:.6g} exceeds the radius {rad:.6g}", b_hat / nb)
    lam = np.linalg.eigvalsh(map.mats)
    for i in range(map.m):
        lo, hi = float(lam[i, 0]), float(lam[i, -1])
        if b_hat[i] > hi or b_hat[i] < lo:
            u = np.zeros(map.m)
            u[i] = 1.0 if b_hat[i] > hi else -1.0
            return QuickReject(
                f"b[{i}] = {b_hat[i]:.6g} outside [{lo:.6g}, {hi:.6g}]", u
            )
    return None


def verify_feasible(inst: Instance, X, eps: float) -> FeasibilityCheck:
    """Check that ``X`` is a density matrix with ``||A(X) - b|| <= eps``."""
    X = np.asarray(X, dtype=float)
    if X.shape != (inst.n, inst.n):
        raise InvalidInput("certificate matrix has the wrong size")
    if not np.all(np.isfinite(X)):
        return FeasibilityCheck(False, np.inf, -np.inf, np.inf)
    asym = float(np.abs(X - X.T).max())
    lam = np.linalg.eigvalsh(0.5 * (X + X.T))
    tr_err = float(abs(np.trace(X) - 1.0))
    residual = float(np.linalg.norm(inst.map.flat @ X.ravel() - inst.b))
    passed = residual <= eps and lam[0] >= -eps and tr_err <= eps and asym <= eps
    return FeasibilityCheck(bool(passed), residual, float(lam[0]), tr_err)


def verify_infeasible(inst: Instance, u) -> SeparationCheck:
    """Check the separating hyperplane ``b.u > lambda_max(A(u))``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (inst.m,):
        raise InvalidInput("direction has the wrong length")
    if abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
        raise NotUnit(f"direction has norm {np.linalg.norm(u):.6g}, expected 1")
    gap = float(inst.b @ u - lambda_extremes(inst.map.adjoint(u))[1])
    return SeparationCheck(gap > 0, gap)


def support(map: MomentMap, u) -> float:
    """Support function ``h(u) = max_{x in M} u.x = lambda_max(A(u))``."""
    return lambda_extremes(map.adjoint(np.asarray(u, dtype=float)))[1]


def width(map: MomentMap, u) -> float:
    """Width ``h(u) + h(-u)``, the spectral gap of ``A(u)``."""
    lo, hi = lambda_extremes(map.adjoint(np.asarray(u, dtype=float)))
    return hi - lo


def boundary_sample(map: MomentMap, directions) -> tuple[np.ndarray, np.ndarray]:
    """Boundary points ``A(v v^T)`` for the top eigenvector ``v`` of ``A(u)``.

    Returns ``(points, support_values)`` with one row per direction. When the
    top eigenvalue is repeated, the first eigenvector of the top cluster is
    used; every choice gives a point on the same exposed face.
    """
    U = np.atleast_2d(np.asarray(directions, dtype=float))
    if U.shape[1] != map.m:
        raise InvalidInput(f"directions must have {map.m} columns")
    points = np.empty_like(U)
    h = np.empty(len(U))
    for r, u in enumerate(U):
        lam, V = np.linalg.eigh(map.adjoint(u))
        scale = max(1.0, abs(lam).max())
        k = int(np.argmax(lam >= lam[-1] - 1e-12 * scale))
        v = V[:, k]
        points[r] = map.flat @ np.outer(v, v).ravel()
        h[r] = lam[-1]
    return points, h


def circle_directions(count: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(theta), np.sin(theta)])


def sphere_directions(count: int) -> np.ndarray:
    """Fibonacci lattice on the unit sphere in R^3."""
    k = np.arange(count) + 0.5
    z = 1 - 2 * k / count
    r = np.sqrt(1 - z * z)
    phi = np.pi * (3 - np.sqrt(5)) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def gradient_map(map: MomentMap, y) -> np.ndarray:
    """``y -> A(exp1(A(y)))``, a diffeomorphism onto the interior of the body."""
    X, _ = exp1(map.adjoint(np.asarray(y, dtype=float)))
    return map.flat @ X.ravel()


def gradient_map_roundtrip(map: MomentMap, y, config: SolverConfig | None = None) -> np.ndarray:
    """Image of ``y`` under :func:`gradient_map`, solved back for ``y``."""
    x = gradient_map(map, y)
    out, _ = minimize(map, x, config, require_normalized=map.normalized)
    if not isinstance(out, Feasible):
        raise RuntimeError(f"round trip did not converge: {out.verdict}")
    return out.y_star


def duality_check(outcome: Feasible) -> dict:
    """Compare the dual optimum with the entropy of the primal certificate."""
    p = np.linalg.eigvalsh(outcome.density)
    plogp = entropy_term(np.clip(p, 0.0, None))
    return {
        "f_star": float(outcome.value),
        "entropy_of_X_star": -plogp,
        "mismatch": float(abs(outcome.value + plogp)),
    }


def decide(
    inst: Instance,
    config: SolverConfig | None = None,
    *,
    precondition_map: bool = True,
    use_blocks: bool = False,
    force: bool = False,
) -> MembershipReport:
    """Decide whether ``inst.b`` lies in the moment body of ``inst.map``.

    With ``precondition_map`` (the default) the map is centered and whitened
    first and the solver tolerance is tightened by ``||W^{-1}||`` so that a
    Feasible verdict carries ``||A(X) - b|| <= tol`` in the original
    coordinates. Without it the map must already be normalized, unless
    ``force`` is set; a forced raw solve skips the quick rejections, whose
    bounds only hold for normalized maps.

    Raises
    ------
    RankDeficient
        If ``I, A_1, ..., A_m`` are linearly dependent.
    NotPreconditioned
        If ``precondition_map`` is False and the map is not normalized.
    """
    config = config or SolverConfig()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    if precondition_map:
        pre = precondition(inst)
        scale = max(pre.record.residual_scale(), 1.0)
        solve_config = _with_tol(config, config.tol / scale)
    else:
        if not inst.map.normalized and not force:
            raise NotPreconditioned("map is not traceless and orthonormal")
        pre = PreconditionedInstance(inst.map, np.asarray(inst.b), _identity_record(inst))
        solve_config = config
    timings["precondition"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    raw = not pre.map.normalized
    rejected = None if raw else quick_reject(pre.map, pre.b_hat)
    timings["quick_reject"] = time.perf_counter() - t0
    if rejected is not None:
        u, check = _separator(pre.record, rejected.direction, inst)
        return MembershipReport(
            verdict="infeasible",
            certificate={"u": u.tolist(), "gap": check.gap},
            verification={"passed": check.passed, "gap": check.gap},
            quick_reject_reason=rejected.reason,
            timings=timings,
        )

    t0 = time.perf_counter()
    outcome, trace = minimize(pre.map, pre.b_hat, solve_config, use_blocks=use_blocks,
                              require_normalized=not raw)
    timings["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    report = MembershipReport(
        verdict=outcome.verdict,
        certificate={},
        verification={},
        iterations=outcome.iters,
        outcome=outcome,
        trace=trace,
    )
    if isinstance(outcome, Feasible):
        X, residual = backmap_feasible(pre.record, outcome.density, inst)
        check = verify_feasible(inst, X, 2 * config.tol)
        report.certificate = {"X": X.tolist(), "residual": residual}
        report.verification = check._asdict()
        report.duality_check = duality_check(outcome)
    elif isinstance(outcome, Infeasible):
        u, check = _separator(pre.record, outcome.u, inst)
        report.certificate = {"u": u.tolist(), "gap": check.gap}
        report.verification = check._asdict()
    elif isinstance(outcome, NotInterior):
        report.certificate = {
            "y_last": outcome.y_last.tolist(),
            "grad_norm": outcome.grad_norm,
            "margin": outcome.margin,
            "norm_bound": outcome.norm_bound,
        }
        report.verification = {"passed": None}
    elif isinstance(outcome, Indeterminate):
        report.certificate = {"y_last": outcome.y_last.tolist(), "grad_norm": outcome.grad_norm,
                              "reason": outcome.reason}
        report.verification = {"passed": None}
    timings["verify"] = time.perf_counter() - t0
    report.timings = timings
    return report


def _separator(record: TransformRecord, u_hat, inst: Instance) -> tuple[np.ndarray, SeparationCheck]:
    try:
        u, _ = backmap_infeasible(record, u_hat, inst)
    except NotASeparator:
        u = record.whitener.T @ np.asarray(u_hat, dtype=float)
        u = u / np.linalg.norm(u)
    return u, verify_infeasible(inst, u)


def _identity_record(inst: Instance) -> TransformRecord:
    m = inst.m
    return TransformRecord(np.zeros(m), np.eye(m), np.eye(m), np.ones(m), inst.n, m)


def _with_tol(config: SolverConfig, tol: float) -> SolverConfig:
    return replace(config, tol=tol, boundary_tol=config.margin_tol())
