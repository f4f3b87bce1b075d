"""L-BFGS with a strong-Wolfe line search for the log-partition dual.

Termination, checked after every accepted step (and once at ``y = 0``):

1. separation: ``f(y) < 0`` or ``b.y > lambda_max(A(y))``. The direction
   ``y / ||y||`` is re-verified with an independent eigenvalue computation and
   returned as :class:`Infeasible` only if the gap is strictly positive;
2. ``||grad f(y)|| <= tol``: :class:`Feasible`, ``X(y)`` is the certificate;
3. supporting-hyperplane margin ``lambda_max(A(u)) - b.u <= boundary_tol``
   with ``u = y / ||y||``: ``b`` is within ``boundary_tol`` of the complement
   of the body, :class:`NotInterior`. An optional norm guard
   ``||y|| > factor * sqrt(n) * log(1/beta)`` can be switched on as well;
4. iteration or line-search budget exhausted: :class:`Indeterminate`.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidConfig, InvalidInput, LineSearchFailed, NotPreconditioned
from .logpart import DualEval, evaluate, evaluate_blocks, spectral_bound
from .moment_map import MomentMap, block_split
from .spectral import lambda_max

log = logging.getLogger(__name__)

MAX_ITERS_CAP = 100_000


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iters: int | None = None  # default min(10 n^3, 100000)
    memory: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_linesearch: int = 40
    boundary_tol: float | None = None  # default: tol
    norm_guard_factor: float | None = None  # None disables the norm guard
    value_noise: float = 1e-14  # relative rounding level of f, see wolfe_linesearch

    def __post_init__(self):
        if not (0 < self.wolfe_c1 < self.wolfe_c2 < 1):
            raise InvalidConfig("need 0 < c1 < c2 < 1")
        if not self.tol > 0:
            raise InvalidConfig("tol must be positive")
        if self.memory < 1:
            raise InvalidConfig("memory must be at least 1")
        if self.max_iters is not None and self.max_iters < 0:
            raise InvalidConfig("max_iters must be non-negative")
        if self.max_linesearch < 1:
            raise InvalidConfig("max_linesearch must be at least 1")
        if self.boundary_tol is not None and self.boundary_tol < 0:
            raise InvalidConfig("boundary_tol must be non-negative")
        if self.norm_guard_factor is not None and not self.norm_guard_factor > 0:
            raise InvalidConfig("norm_guard_factor must be positive")
        if not self.value_noise >= 0:
            raise InvalidConfig("value_noise must be non-negative")

    def iteration_budget(self, n: int) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return int(min(10 * n**3, MAX_ITERS_CAP))

    def margin_tol(self) -> float:
        return self.tol if self.boundary_tol is None else self.boundary_tol


# -- outcomes ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Feasible:
    y_star: np.ndarray
    density: np.ndarray
    residual_norm: float
    value: float
    iters: int
    verdict = "feasible"


@dataclass(frozen=True, eq=False)
class Infeasible:
    u: np.ndarray
    gap: float
    iters: int
    verdict = "infeasible"


@dataclass(frozen=True, eq=False)
class NotInterior:
    y_last: np.ndarray
    grad_norm: float
    norm_bound: float | None
    iters: int
    direction: np.ndarray | None = None
    margin: float | None = None
    verdict = "not_interior"


@dataclass(frozen=True, eq=False)
class Indeterminate:
    y_last: np.ndarray
    grad_norm: float
    iters: int
    reason: str
    verdict = "indeterminate"


SolveOutcome = Feasible | Infeasible | NotInterior | Indeterminate


@dataclass(frozen=True)
class IterRecord:
    k: int
    value: float
    grad_norm: float
    y_norm: float
    step: float
    ls_evals: int


@dataclass
class IterationTrace:
    records: list[IterRecord] = field(default_factory=list)
    spectral_bound_violated: bool = False

    def append(self, rec: IterRecord) -> None:
        self.records.append(rec)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    def __len__(self) -> int:
        return len(self.records)


# -- L-BFGS pieces ----------------------------------------------------------

def two_loop_direction(history: Sequence[tuple[np.ndarray, np.ndarray]], grad) -> np.ndarray:
    """Two-loop recursion: ``-H_k grad`` for the L-BFGS inverse Hessian.

    ``history`` holds ``(s, y)`` pairs oldest first, each with ``s.y > 0``.
    The seed matrix is ``gamma * I`` with ``gamma = s.y / y.y`` from the newest
    pair (``gamma = 1`` with no history).
    """
    q = np.array(grad, dtype=float)
    if not history:
        return -q
    rhos = [1.0 / float(s @ yv) for s, yv in history]
    alphas = []
    for (s, yv), rho in zip(reversed(history), reversed(rhos)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * yv
    s_new, y_new = history[-1]
    q *= float(s_new @ y_new) / float(y_new @ y_new)
    for (s, yv), rho, a in zip(history, rhos, reversed(alphas)):
        beta = rho * float(yv @ q)
        q += (a - beta) * s
    return -q


@dataclass(frozen=True, eq=False)
class LineSearchResult:
    step: float
    value: float
    gradient: np.ndarray
    payload: object
    evals: int
    strong_wolfe: bool


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating (a, fa, da), (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    x = b - (b - a) * (db + d2 - d1) / denom
    return x if np.isfinite(x) else None


def wolfe_linesearch(
    f_eval: Callable[[np.ndarray], tuple[float, np.ndarray, object]],
    y: np.ndarray,
    direction: np.ndarray,
    config: SolverConfig | None = None,
    *,
    f0: float | None = None,
    g0: np.ndarray | None = None,
    step0: float = 1.0,
    step_max: float = 1e12,
    f_noise: float = 0.0,
) -> LineSearchResult:
    """Find a step along ``direction`` satisfying the strong Wolfe conditions.

    ``f_eval(y)`` returns ``(value, gradient, payload)``. Bracketing with
    expansion followed by cubic-interpolation zoom. If the evaluation budget
    runs out, the lowest sufficient-decrease step seen is returned with
    ``strong_wolfe=False``.

    Near a minimizer the predicted decrease ``c1 * a * slope`` drops below
    the rounding error of ``f`` and no step can pass the Armijo test. A step
    with ``f(a) <= f0 + f_noise`` that meets the curvature condition is then
    accepted (the approximate Wolfe test of Hager and Zhang), flagged with
    ``strong_wolfe=False``.

    Raises
    ------
    InvalidInput
        If ``direction`` is not a descent direction.
    LineSearchFailed
        If no step with sufficient decrease was found.
    """
    config = config or SolverConfig()
    c1, c2 = config.wolfe_c1, config.wolfe_c2
    y = np.asarray(y, dtype=float)
    d = np.asarray(direction, dtype=float)
    if f0 is None or g0 is None:
        f0, g0, _ = f_eval(y)
    dphi0 = float(g0 @ d)
    if not dphi0 < 0:
        raise InvalidInput(f"not a descent direction (slope {dphi0:.3e})")

    evals = 0
    best: LineSearchResult | None = None

    def phi(a):
        nonlocal evals, best
        evals += 1
        fa, ga, pa = f_eval(y + a * d)
        res = LineSearchResult(a, fa, ga, pa, evals, False)
        if fa <= f0 + c1 * a * dphi0 and fa < f0 and (best is None or fa < best.value):
            best = res
        return fa, float(ga @ d), res

    def approx_wolfe(fa, da):
        return f_noise > 0 and fa <= f0 + f_noise and abs(da) <= -c2 * dphi0

    def done(res: LineSearchResult) -> LineSearchResult:
        return LineSearchResult(res.step, res.value, res.gradient, res.payload, evals, True)

    def fallback() -> LineSearchResult:
        if best is None:
            raise LineSearchFailed(f"no sufficient decrease after {evals} evaluations")
        return LineSearchResult(best.step, best.value, best.gradient, best.payload, evals, False)

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        while evals < config.max_linesearch:
            width = hi - lo
            if abs(width) <= 1e-16 * max(abs(lo), abs(hi)):
                break
            a = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            left, right = sorted((lo, hi))
            margin = 0.1 * (right - left)
            if a is None or not (left + margin <= a <= right - margin):
                a = 0.5 * (lo + hi)
            fa, da, res = phi(a)
            if approx_wolfe(fa, da):
                return res
            if fa > f0 + c1 * a * dphi0 or fa >= f_lo:
                hi, f_hi, d_hi = a, fa, da
            else:
                if abs(da) <= -c2 * dphi0:
                    return done(res)
                if da * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = a, fa, da
        return fallback()

    a_prev, f_prev, d_prev = 0.0, f0, dphi0
    a = min(step0, step_max)
    while evals < config.max_linesearch:
        fa, da, res = phi(a)
        if np.isfinite(fa) and approx_wolfe(fa, da):
            return res
        if not np.isfinite(fa):
            return zoom(a_prev, f_prev, d_prev, a, np.inf, 0.0) if a_prev > 0 else fallback()
        if fa > f0 + c1 * a * dphi0 or (evals > 1 and fa >= f_prev):
            return zoom(a_prev, f_prev, d_prev, a, fa, da)
        if abs(da) <= -c2 * dphi0:
            return done(res)
        if da >= 0:
            return zoom(a, fa, da, a_prev, f_prev, d_prev)
        if a >= step_max:
            break
        a_prev, f_prev, d_prev = a, fa, da
        a = min(4.0 * a, step_max)
    return fallback()


# -- driver -----------------------------------------------------------------

def _objective(map: MomentMap, b: np.ndarray, use_blocks: bool):
    if use_blocks:
        parts = block_split(map)
        return lambda y: evaluate_blocks(parts, b, y)
    return lambda y: evaluate(map, b, y)


def minimize(
    map: MomentMap,
    b,
    config: SolverConfig | None = None,
    *,
    use_blocks: bool = False,
    require_normalized: bool = True,
) -> tuple[SolveOutcome, IterationTrace]:
    """Minimize the dual from ``y = 0`` and classify ``b``.

    Parameters
    ----------
    map : MomentMap
        Must carry the traceless and orthonormal flags unless
        ``require_normalized`` is False.
    b : array_like, shape (m,)
    config : SolverConfig, optional
    use_blocks : bool
        Evaluate the dual block by block (``map.blocks`` must be declared).
    """
    config = config or SolverConfig()
    if require_normalized and not map.normalized:
        raise NotPreconditioned("map must be traceless and orthonormal; precondition it first")
    b = np.asarray(b, dtype=float)
    if b.shape != (map.m,) or not np.all(np.isfinite(b)):
        raise InvalidInput(f"b must be a finite vector of length {map.m}")

    objective = _objective(map, b, use_blocks)
    n = map.n
    budget = config.iteration_budget(n)
    margin_tol = config.margin_tol()
    b_norm = float(np.linalg.norm(b))
    norm_bound = None
    if config.norm_guard_factor is not None and b_norm < 1.0:
        norm_bound = config.norm_guard_factor * np.sqrt(n) * np.log(1.0 / (1.0 - b_norm))
    lam_bound = spectral_bound(n)

    trace = IterationTrace()
    y = np.zeros(map.m)
    ev: DualEval = objective(y)
    history: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=config.memory)
    gnorm = float(np.linalg.norm(ev.gradient))
    trace.append(IterRecord(0, ev.value, gnorm, 0.0, 0.0, 0))

    def f_eval(z):
        e = objective(z)
        return e.value, e.gradient, e

    k = 0
    downgraded = False
    while True:
        y_norm = float(np.linalg.norm(y))

        if y_norm > 0 and (ev.value < 0 or b @ y > ev.spectrum[-1]):
            u = y / y_norm
            gap = float(b @ u - lambda_max(map.adjoint(u)))
            if gap > 0:
                return Infeasible(u, gap, k), trace

        if gnorm <= config.tol:
            return Feasible(y.copy(), ev.density, gnorm, ev.value, k), trace

        if y_norm > 0:
            margin = float(ev.spectrum[-1] / y_norm - b @ y / y_norm)
            if 0 <= margin <= margin_tol:
                return NotInterior(y.copy(), gnorm, norm_bound, k, y / y_norm, margin), trace
        if norm_bound is not None and y_norm > norm_bound:
            return NotInterior(y.copy(), gnorm, norm_bound, k), trace

        if k >= budget:
            return Indeterminate(y.copy(), gnorm, k, "iteration budget exhausted"), trace

        direction = two_loop_direction(history, ev.gradient)
        if not float(direction @ ev.gradient) < 0:
            history.clear()
            direction = -ev.gradient
        try:
            f_noise = config.value_noise * max(1.0, abs(ev.value), y_norm)
            ls = wolfe_linesearch(f_eval, y, direction, config, f0=ev.value, g0=ev.gradient,
                                  f_noise=f_noise)
            if not ls.value <= ev.value + f_noise:
                raise LineSearchFailed("step did not decrease f")
        except LineSearchFailed as exc:
            if downgraded or not history:
                return Indeterminate(y.copy(), gnorm, k, f"line search failed: {exc}"), trace
            log.debug("line search failed at k=%d, restarting from steepest descent", k)
            downgraded = True
            history.clear()
            continue

        s = ls.step * direction
        y_new = y + s
        ev_new: DualEval = ls.payload
        yv = ev_new.gradient - ev.gradient
        sy = float(s @ yv)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yv):
            history.append((s, yv))

        y, ev = y_new, ev_new
        k += 1
        downgraded = False
        gnorm = float(np.linalg.norm(ev.gradient))
        trace.append(IterRecord(k, ev.value, gnorm, float(np.linalg.norm(y)), ls.step, ls.evals))
        if not trace.spectral_bound_violated and np.abs(ev.spectrum).max() > lam_bound + 1e-12:
            trace.spectral_bound_violated = True
            log.info(
                "iterate %d leaves the sublevel spectral bound %.4g (max |lambda| = %.4g)",
                k, lam_bound, np.abs(ev.spectrum).max(),
            )
