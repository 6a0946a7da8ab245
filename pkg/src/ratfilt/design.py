"""Nested minimization pipeline producing low worst-case-rate filters.

Inner loop: a gradient-based fit of the filter parameters against the ideal
response under a fixed weight function.  Outer loop: derivative-free descent
on the weight vector, scoring each candidate by the worst-case convergence
rate of the freshly fitted filter.  One outer iteration runs a coordinate
descent pass (1-d differential evolution per coordinate), a Nelder-Mead
polish with the two gap-adjacent breakpoints held fixed, and a convergence
check on the relative change of the rate.

The whole search runs at the shifted gap sqrt(G); the returned filter is
rescaled so its magnitude inside the entire search interval [-1, 1] exceeds
its magnitude beyond the gap, at the price of a slightly larger rate.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .filters import (
    DegenerateFilterError,
    RationalFilter,
    compute_wcr,
    scale_filter,
)
from .least_squares import (
    Segments,
    pack,
    restore_quadrant,
    unpack,
    value_and_grad_from_params,
    value_from_params,
)
from .optim import BoxSpec, OptimReport, bfgs_minimize, de_minimize_1d, lbfgsb_minimize, nelder_mead
from .weights import OrderingViolationError, WeightVector, repair_into_vs


@dataclasses.dataclass(frozen=True)
class DesignConfig:
    """Knobs of one design job.

    ``de_evals`` and ``nm_evals`` budget the per-coordinate differential
    evolution and the Nelder-Mead polish; the defaults keep a full m = 4
    design within minutes without measurably hurting the final rate.
    """

    gap: float
    m: int
    s: int = 5
    box: BoxSpec | None = None
    res_tol: float = 1e-9
    inner_tol: float = 1e-8
    seed: int = 0
    max_outer_iters: int = 50
    inner_max_iter: int = 150
    de_evals: int = 200
    nm_evals: int = 600
    stall_patience: int = 2
    plateau_tol: float = 5e-3

    def __post_init__(self):
        if not 0.0 < self.gap < 1.0:
            raise ValueError(f"gap must lie in (0, 1), got {self.gap}")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def shifted_gap(self) -> float:
        return math.sqrt(self.gap)


@dataclasses.dataclass(frozen=True)
class TraceEntry:
    outer_iter: int
    h: float
    residual: float
    f_omega: float
    inner_iters: int


@dataclasses.dataclass(frozen=True)
class DesignResult:
    """Final scaled filter plus the search trail.

    ``wcr`` is the modified rate of the scaled filter (denominator over the
    whole [-1, 1] at the user gap); ``unscaled_wcr`` is the rate the outer
    loop actually minimized (at the shifted gap), equal to ``wcr`` up to the
    scaling identity.
    """

    filter: RationalFilter
    weight: WeightVector
    wcr: float
    unscaled_wcr: float
    trace: tuple[TraceEntry, ...]
    converged: bool
    status: str = "converged"


def fit_filter(f0: RationalFilter, w: WeightVector, box: BoxSpec | None = None,
               tol: float = 1e-8, max_iter: int = 500) -> tuple[RationalFilter, OptimReport]:
    """Minimize the weighted least-squares objective from a starting filter.

    Unconstrained runs use full-matrix BFGS; with a box the limited-memory
    projected variant keeps every iterate at distance >= lb from the real
    axis.  The result has its poles reflected back into the first quadrant.
    A flagged (non-converged) result is still returned; callers decide
    acceptance by value.
    """
    seg = Segments.from_weights(w)
    m = f0.m
    cache: dict[bytes, tuple] = {}

    def fobj(x):
        key = x.tobytes()
        hit = cache.get(key)
        if hit is not None:
            return hit[0]
        val = value_from_params(x, m, seg)
        cache[key] = (val, None)
        return val

    def fgrad(x):
        key = x.tobytes()
        hit = cache.get(key)
        if hit is not None and hit[1] is not None:
            return hit[1]
        val, grad = value_and_grad_from_params(x, m, seg)
        cache[key] = (val, grad)
        return grad

    x0 = pack(f0)
    if box is not None:
        x, report = lbfgsb_minimize(fobj, fgrad, x0, box, tol=tol, max_iter=max_iter)
    else:
        x, report = bfgs_minimize(fobj, fgrad, x0, tol=tol, max_iter=max_iter)
    fitted = restore_quadrant(unpack(x, m, f0.gap, scaled=False))
    return fitted, report


class _RateObjective:
    """Evaluator of the weight-vector objective: rate of the fitted filter.

    Two precision tiers share the machinery: the scan tier caps the inner
    fit at ``inner_max_iter`` (cheap candidate ranking inside DE and
    Nelder-Mead), the full tier runs the fit out (acceptance decisions and
    recorded rates).  Results are memoized on the exact bits of the weight
    vector per tier; the memo is valid while the incumbent parameters are
    unchanged and is cleared when they move.
    """

    FULL_MAX_ITER = 500

    def __init__(self, incumbent: RationalFilter, cfg: DesignConfig):
        self.incumbent = incumbent
        self.cfg = cfg
        self.gap_shifted = cfg.shifted_gap
        self.memo: dict[tuple[bytes, bool], tuple] = {}
        self.evals = 0

    def set_incumbent(self, filt: RationalFilter) -> None:
        if not filt.equal_params(self.incumbent):
            self.incumbent = filt
            self.memo.clear()

    def evaluate(self, v_arr: np.ndarray, full: bool = True):
        """Returns (rate, fitted filter | None, optimizer report | None)."""
        v_arr = np.asarray(v_arr, dtype=float)
        key = (v_arr.tobytes(), full)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        try:
            w = WeightVector(s=self.cfg.s, v=v_arr, gap=self.gap_shifted)
        except (OrderingViolationError, ValueError):
            result = (math.inf, None, None)
            self.memo[key] = result
            return result
        self.evals += 1
        max_iter = self.FULL_MAX_ITER if full else self.cfg.inner_max_iter
        fitted, report = fit_filter(self.incumbent, w, box=self.cfg.box,
                                    tol=self.cfg.inner_tol, max_iter=max_iter)
        try:
            rate = compute_wcr(fitted, self.gap_shifted, "gap").wcr
        except (DegenerateFilterError, FloatingPointError):
            rate = math.inf
        result = (rate, fitted, report)
        self.memo[key] = result
        return result


def wcr_for_weights(beta, z, v: WeightVector, cfg: DesignConfig):
    """Rate objective for one weight vector: fit from (beta, z), then rate.

    Returns (rate, fitted filter); the rate is measured at the shifted gap
    with the denominator over the gap interval.  A degenerate fit reports
    +inf (rejected candidate).
    """
    start = RationalFilter(beta=np.asarray(beta, dtype=complex),
                           z=np.asarray(z, dtype=complex), gap=cfg.gap)
    evaluator = _RateObjective(start, cfg)
    rate, fitted, _ = evaluator.evaluate(np.asarray(v.v, dtype=float))
    return rate, fitted


def _coordinate_interval(i: int, v: np.ndarray, s: int, gap: float):
    """Search interval of 1-based coordinate i around the current vector."""
    ginv = 1.0 / gap
    if i == 1:
        return gap, 1.0
    if i == 2:
        return 1.0, ginv
    if i == 3:
        return ginv, v[3] if s >= 5 else ginv
    if 4 <= i < s - 1:
        return v[i - 2], v[i]
    if i == s - 1:
        return v[i - 2], 3.0 * v[i - 1]
    return 0.1 * v[i - 1], 10.0 * v[i - 1]


def _coordinate_pass(evaluator: _RateObjective, v: np.ndarray, w_cur: float,
                     cfg: DesignConfig, outer_iter: int):
    """One coordinate-descent sweep; accepts only strict improvements.

    Candidates inside the per-coordinate differential evolution are ranked
    at scan precision; the winner is re-measured at full precision before
    the acceptance test.
    """
    n = 2 * cfg.s - 3
    accepted = False
    best_filter = None
    for i in range(1, n + 1):
        lo, hi = _coordinate_interval(i, v, cfg.s, evaluator.gap_shifted)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
            continue

        def h_coord(c, _i=i - 1):
            trial = v.copy()
            trial[_i] = c
            return evaluator.evaluate(trial, full=False)[0]

        seed = np.random.SeedSequence([cfg.seed, outer_iter, i])
        c_best, _ = de_minimize_1d(h_coord, lo, hi, max_evals=cfg.de_evals, seed=seed)
        trial = v.copy()
        trial[i - 1] = c_best
        h_best, filt_best, _ = evaluator.evaluate(trial, full=True)
        if h_best < w_cur:
            v = trial
            w_cur = h_best
            best_filter = filt_best
            accepted = True
    return v, w_cur, best_filter, accepted


def coordinate_descent_pass(v: WeightVector, beta, z, cfg: DesignConfig,
                            outer_iter: int = 1) -> WeightVector:
    """Public coordinate-descent sweep over the weight vector.

    Coordinates are improved in order against the prescribed neighborhoods,
    each through a seeded 1-d differential evolution; a candidate replaces
    the coordinate only when it strictly lowers the rate objective.
    """
    start = RationalFilter(beta=np.asarray(beta, dtype=complex),
                           z=np.asarray(z, dtype=complex), gap=cfg.gap)
    evaluator = _RateObjective(start, cfg)
    w0, _, _ = evaluator.evaluate(np.asarray(v.v, dtype=float))
    v_new, _, _, _ = _coordinate_pass(evaluator, np.asarray(v.v, dtype=float), w0, cfg, outer_iter)
    return WeightVector(s=cfg.s, v=v_new, gap=evaluator.gap_shifted)


def minimize_wcr(v0: WeightVector, f0: RationalFilter, cfg: DesignConfig,
                 on_outer=None) -> DesignResult:
    """Full nested design loop; returns the scaled filter and its trail.

    Each outer iteration: coordinate descent, Nelder-Mead over all but the
    two gap-adjacent breakpoints (repaired by absolute value, rejected on a
    remaining ordering violation), refit, and the relative-rate residual
    check.  Only strictly improving iterations update the state, so the
    accepted rate sequence is non-increasing.  The loop exits at the
    residual tolerance ("converged"), when the per-iteration improvement
    stays below ``plateau_tol`` for ``stall_patience`` iterations
    ("plateau"), or at the iteration cap ("max_outer").  ``on_outer``, if
    given, receives each TraceEntry as it is produced.
    """
    gap_s = cfg.shifted_gap
    v = WeightVector(s=cfg.s, v=np.asarray(v0.v, dtype=float), gap=gap_s)

    evaluator = _RateObjective(f0, cfg)
    w_cur, best_filter, report0 = evaluator.evaluate(v.v)
    if best_filter is None:
        raise ValueError("initial weight vector is not evaluable")
    last_f_omega, last_inner = report0.f, report0.iterations

    trace: list[TraceEntry] = []
    status = "max_outer"
    stalled = 0
    nm_steps = (0.05, 0.02, 0.1)
    for outer in range(1, cfg.max_outer_iters + 1):
        w_before = w_cur
        v_arr, w_cur, filt_cd, cd_accepted = _coordinate_pass(
            evaluator, v.v.copy(), w_cur, cfg, outer)
        if cd_accepted and filt_cd is not None:
            best_filter = filt_cd

        # Nelder-Mead on v_3..v_{2s-3}; v_1, v_2 stay at their descent
        # values.  On rejection the simplex is restarted from the same
        # iterate with an adjusted initial step (stagnation escape), up to
        # one retry per outer iteration.
        head = v_arr[:2]

        def nm_obj(tail):
            return evaluator.evaluate(np.concatenate([head, tail]), full=False)[0]

        nm_accepted = False
        w_new = w_cur
        res = math.inf
        step0 = (outer - 1) % len(nm_steps)
        for attempt in range(2):
            tail_best, _ = nelder_mead(nm_obj, v_arr[2:].copy(), ftol=1e-10,
                                       max_evals=cfg.nm_evals,
                                       initial_step=nm_steps[(step0 + attempt) % len(nm_steps)])
            candidate_raw = np.concatenate([head, tail_best])
            try:
                v_cand_arr = repair_into_vs(candidate_raw, cfg.s, gap_s).v
            except OrderingViolationError:
                continue
            w_prime, filt_prime, rep_prime = evaluator.evaluate(v_cand_arr, full=True)
            if rep_prime is not None:
                last_f_omega, last_inner = rep_prime.f, rep_prime.iterations
            res = abs(w_cur - w_prime) / w_cur if w_cur > 0 else math.inf
            if w_prime < w_cur:
                nm_accepted = True
                v_arr, w_new, best_filter = v_cand_arr, w_prime, filt_prime
                break

        v = WeightVector(s=cfg.s, v=v_arr, gap=gap_s)
        w_cur = w_new
        evaluator.set_incumbent(best_filter)
        entry = TraceEntry(outer_iter=outer, h=w_cur, residual=res,
                           f_omega=last_f_omega, inner_iters=last_inner)
        trace.append(entry)
        if on_outer is not None:
            on_outer(entry)
        if res <= cfg.res_tol:
            status = "converged"
            break
        improvement = (w_before - w_cur) / w_before if w_before > 0 else 0.0
        stalled = 0 if improvement > cfg.plateau_tol else stalled + 1
        if stalled >= cfg.stall_patience:
            status = "plateau"
            break

    scaled = scale_filter(
        dataclasses.replace(best_filter, gap=cfg.gap, scaled=False), cfg.gap)
    modified = compute_wcr(scaled, cfg.gap, "full").wcr
    return DesignResult(filter=scaled, weight=v, wcr=modified, unscaled_wcr=w_cur,
                        trace=tuple(trace), converged=status != "max_outer",
                        status=status)
